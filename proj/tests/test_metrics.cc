// Copyright (c) 2026 vqvc authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>

#include "doctest.h"
#include "testutil.h"
#include "vqvc/metrics.h"

using namespace vqvc;

namespace {
constexpr double kMcdScale = 10.0 / 2.302585092994045684;
}

TEST_CASE("mcd of identical sequences is zero") {
  Rng rng(31);
  const Tensor a = test::random_tensor({6, 8}, rng);
  CHECK(mcd(a, a, false) == doctest::Approx(0.0));
  CHECK(mcd(a, a, true) == doctest::Approx(0.0));
}

TEST_CASE("mcd closed form for a single-dimension cepstral offset") {
  Rng rng(32);
  const Tensor a = test::random_tensor({5, 8}, rng, -0.5, 0.5);
  const double delta = 0.25;
  Tensor ca = dct2_cepstra(a);
  for (Index t = 0; t < ca.dim(0); ++t) ca.at(t, 3) += static_cast<float>(delta);
  const Tensor b = idct2(ca);
  const double expected = kMcdScale * std::sqrt(2.0) * delta;
  CHECK(std::fabs(mcd(a, b, false) - expected) < 1e-6);
}

TEST_CASE("the 0th cepstral coefficient is excluded") {
  Rng rng(33);
  const Tensor a = test::random_tensor({4, 8}, rng);
  Tensor ca = dct2_cepstra(a);
  for (Index t = 0; t < ca.dim(0); ++t) ca.at(t, 0) += 2.0f;  // loudness-style offset
  const Tensor b = idct2(ca);
  CHECK(mcd(a, b, false) < 1e-5);
}

TEST_CASE("dtw equals the exhaustive-path oracle on all grids up to 5x6") {
  Rng rng(34);
  for (int trial = 0; trial < 50; ++trial) {
    const Index m = 1 + rng.uniform_int(5);
    const Index n = 1 + rng.uniform_int(6);
    std::vector<std::vector<double>> local(static_cast<size_t>(m), std::vector<double>(static_cast<size_t>(n)));
    for (auto& row : local)
      for (double& v : row) v = rng.uniform(0.0, 2.0);
    CHECK(dtw_cost(local) == doctest::Approx(test::dtw_exhaustive_oracle(local)).epsilon(1e-12));
  }
}

TEST_CASE("mcd is symmetric under dtw alignment") {
  Rng rng(35);
  const Tensor a = test::random_tensor({7, 6}, rng);
  const Tensor b = test::random_tensor({9, 6}, rng);
  CHECK(mcd(a, b, true) == doctest::Approx(mcd(b, a, true)).epsilon(1e-9));
}

TEST_CASE("dtw never costs more than the unwarped diagonal at equal lengths") {
  Rng rng(36);
  const Tensor a = test::random_tensor({8, 6}, rng);
  const Tensor b = test::random_tensor({8, 6}, rng);
  const McdResult warped = mcd_full(a, b, true);
  const McdResult straight = mcd_full(a, b, false);
  // same mean scale: compare total path costs
  const double warped_total = warped.mcd * warped.path_length;
  const double straight_total = straight.mcd * straight.path_length;
  CHECK(warped_total <= straight_total + 1e-9);
}

TEST_CASE("error_rate basics") {
  const std::vector<int> ref = {1, 2, 3, 4};
  CHECK(error_rate(ref, ref) == doctest::Approx(0.0));
  CHECK(error_rate(std::vector<int>{}, ref) == doctest::Approx(1.0));
  CHECK_THROWS_AS(error_rate(ref, std::vector<int>{}), ContractError);
  // rates above 1 are possible
  const std::vector<int> hyp = {7, 8, 9, 7, 8, 9, 7, 8};
  const std::vector<int> short_ref = {1};
  CHECK(error_rate(hyp, short_ref) > 1.0);
}

TEST_CASE("error_rate matches the recursive oracle exhaustively (3 symbols, len <= 4)") {
  std::vector<std::vector<int>> strings = {{}};
  for (int len = 1; len <= 4; ++len) {
    const size_t start = strings.size();
    std::vector<std::vector<int>> next;
    for (const auto& s : strings) {
      if (s.size() != static_cast<size_t>(len - 1)) continue;
      for (int c = 0; c < 3; ++c) {
        std::vector<int> t = s;
        t.push_back(c);
        next.push_back(std::move(t));
      }
    }
    strings.insert(strings.end(), next.begin(), next.end());
    (void)start;
  }
  for (const auto& a : strings) {
    for (const auto& b : strings) {
      CHECK(levenshtein(a, b) == test::levenshtein_oracle(a, b));
    }
  }
}

TEST_CASE("error_rate matches the recursive oracle on random longer pairs") {
  Rng rng(37);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<int> a(static_cast<size_t>(rng.uniform_int(9)));
    std::vector<int> b(static_cast<size_t>(1 + rng.uniform_int(8)));
    for (int& v : a) v = static_cast<int>(rng.uniform_int(3));
    for (int& v : b) v = static_cast<int>(rng.uniform_int(3));
    CHECK(levenshtein(a, b) == test::levenshtein_oracle(a, b));
  }
}

TEST_CASE("quantizer_stats: constant corpus vs uniform usage") {
  IndexSeq constant;
  constant.groups = 2;
  constant.vocab = 8;
  for (int t = 0; t < 12; ++t) {
    constant.tuples.push_back(5);
    constant.tuples.push_back(1);
  }
  const QuantStats s1 = quantizer_stats(std::vector<IndexSeq>{constant});
  CHECK(s1.unique_combinations == 1);
  CHECK(s1.group_perplexity[0] == doctest::Approx(1.0));

  IndexSeq uniform;
  uniform.groups = 1;
  uniform.vocab = 8;
  for (int rep = 0; rep < 4; ++rep)
    for (int v = 0; v < 8; ++v) uniform.tuples.push_back(v);
  const QuantStats s2 = quantizer_stats(std::vector<IndexSeq>{uniform});
  CHECK(s2.group_perplexity[0] == doctest::Approx(8.0).epsilon(1e-9));
}

TEST_CASE("conversion_score degenerate cases") {
  Rng rng(38);
  const Tensor oracle = test::random_tensor({6, 8}, rng);
  const Tensor source = test::random_tensor({7, 8}, rng);

  const ConversionScore perfect = conversion_score(oracle, oracle, source);
  CHECK(perfect.mcd_conv == doctest::Approx(0.0));
  CHECK(perfect.mcd_conv < perfect.mcd_copy);

  const ConversionScore copy = conversion_score(source, oracle, source);
  CHECK(copy.mcd_conv == doctest::Approx(copy.mcd_copy));
}

TEST_CASE("template decoding collapses repeats and finds nearest symbols") {
  Tensor templates({3, 2});
  templates.at(0, 0) = 0.0f;
  templates.at(1, 0) = 1.0f;
  templates.at(2, 0) = 2.0f;
  Tensor feats({5, 2});
  feats.at(0, 0) = 0.1f;
  feats.at(1, 0) = 0.05f;
  feats.at(2, 0) = 1.1f;
  feats.at(3, 0) = 1.9f;
  feats.at(4, 0) = 2.05f;
  CHECK(template_decode(feats, templates) == std::vector<int>{0, 1, 2});
}
