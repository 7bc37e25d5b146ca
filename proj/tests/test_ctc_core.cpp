// Copyright 2026 CASR Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "casr/ctc_core.hpp"
#include "test_support.hpp"

using namespace casr;

namespace {

// Builds a T x V matrix from linear probabilities, row-major.
EmissionMatrix from_probs(std::uint32_t T, std::uint32_t V,
                          const std::vector<double>& probs) {
  EmissionMatrix m;
  m.frames = T;
  m.vocab_size = V;
  m.logprobs.resize(probs.size());
  for (size_t i = 0; i < probs.size(); ++i) {
    m.logprobs[i] = static_cast<float>(std::log(probs[i]));
  }
  return m;
}

}  // namespace

TEST_CASE("collapse rule") {
  const int blank = 0;
  CHECK(collapse_path({1, 1, 0, 1, 2, 2}, blank) == std::vector<int>{1, 1, 2});
  CHECK(collapse_path({0, 0}, blank) == std::vector<int>{});
  CHECK(collapse_path({1, 0, 1}, blank) == std::vector<int>{1, 1});
  CHECK(collapse_path({}, blank) == std::vector<int>{});
}

TEST_CASE("greedy decoding") {
  const Vocabulary vocab = test::tiny_vocab(3);  // <pad> | a b c
  // frames argmax: c a <pad> t... use labels 4(c),2(a),0,3(b)
  EmissionMatrix m = from_probs(
      4, 5,
      {0.1, 0.1, 0.1, 0.1, 0.6,   // c
       0.1, 0.1, 0.6, 0.1, 0.1,   // a
       0.6, 0.1, 0.1, 0.1, 0.1,   // blank
       0.1, 0.1, 0.1, 0.6, 0.1}); // b
  CHECK(greedy_decode(m, vocab) == "cab");

  // all-blank argmax
  EmissionMatrix blanks = from_probs(3, 5,
      {0.6, 0.1, 0.1, 0.1, 0.1,
       0.6, 0.1, 0.1, 0.1, 0.1,
       0.6, 0.1, 0.1, 0.1, 0.1});
  CHECK(greedy_decode(blanks, vocab) == "");

  // exact tie goes to the lowest index: blank(0) vs 'a'(2)
  EmissionMatrix tie = from_probs(1, 5, {0.3, 0.1, 0.3, 0.2, 0.1});
  CHECK(argmax_path(tie) == std::vector<int>{0});
  CHECK(greedy_decode(tie, vocab) == "");

  // vocab size mismatch
  EmissionMatrix narrow = from_probs(1, 2, {0.5, 0.5});
  CHECK_THROWS_AS(greedy_decode(narrow, vocab), Error);
}

TEST_CASE("greedy equals the one-line path oracle") {
  Rng rng(2024);
  const Vocabulary vocab = test::tiny_vocab(2);  // V = 4
  for (int trial = 0; trial < 200; ++trial) {
    const auto m = test::random_emissions(
        rng, 1 + static_cast<std::uint32_t>(rng.uniform_below(8)), 4);
    CHECK(greedy_decode(m, vocab) ==
          vocab.render(collapse_path(argmax_path(m), vocab.blank_index)));
  }
}

TEST_CASE("forward log-probability hand cases") {
  // T=1, target "a": p(a at frame 1) = 0.6
  EmissionMatrix one = from_probs(1, 2, {0.4, 0.6});
  CHECK(ctc_log_prob(one, {1}, 0) == doctest::Approx(std::log(0.6)).epsilon(1e-12));

  // T=2, target "a": three valid paths, total 0.8
  EmissionMatrix two = from_probs(2, 2, {0.4, 0.6, 0.5, 0.5});
  CHECK(ctc_log_prob(two, {1}, 0) == doctest::Approx(std::log(0.8)).epsilon(1e-12));

  // T=2, target "aa" needs at least 3 frames
  CHECK(ctc_log_prob(two, {1, 1}, 0) == kLogZero);

  // blank in target
  CHECK_THROWS_AS(ctc_log_prob(two, {0}, 0), Error);
  // label out of range
  CHECK_THROWS_AS(ctc_log_prob(two, {7}, 0), Error);
}

TEST_CASE("forward matches brute-force enumeration and total probability is 1") {
  Rng rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    const std::uint32_t T = 1 + static_cast<std::uint32_t>(rng.uniform_below(6));
    const std::uint32_t V = 2 + static_cast<std::uint32_t>(rng.uniform_below(3));
    const auto m = test::random_emissions(rng, T, V);
    const auto oracle = test::brute_force_ctc(m, 0);

    double total = 0;
    for (const auto& [seq, prob] : oracle) {
      total += prob;
      const double expect = std::log(prob);
      const double got = ctc_log_prob(m, seq, 0);
      CHECK(std::abs(got - expect) <= 1e-9 * std::max(1.0, std::abs(expect)));
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-8));

    // sequences longer than T are impossible
    std::vector<int> too_long(T + 1, 1);
    CHECK(ctc_log_prob(m, too_long, 0) == kLogZero);
  }
}

TEST_CASE("loss and gradient") {
  Rng rng(77);

  SUBCASE("gradient rows sum to zero and posteriors are proper") {
    for (int trial = 0; trial < 20; ++trial) {
      const std::uint32_t T = 3 + static_cast<std::uint32_t>(rng.uniform_below(3));
      const std::uint32_t V = 3;
      std::vector<double> logits(T * V);
      for (auto& x : logits) x = 2.0 * rng.gaussian();
      const std::vector<int> target = {1, 2};
      const auto res = ctc_loss_grad(logits, T, V, target, 0);
      REQUIRE(res.alignable);
      CHECK(res.loss >= 0);
      for (std::uint32_t t = 0; t < T; ++t) {
        double gsum = 0, psum = 0;
        for (std::uint32_t v = 0; v < V; ++v) {
          gsum += res.grad[t * V + v];
          psum += res.posteriors[t * V + v];
        }
        CHECK(std::abs(gsum) < 1e-8);
        CHECK(psum == doctest::Approx(1.0).epsilon(1e-6));
      }
    }
  }

  SUBCASE("central finite differences") {
    int instances = 0;
    while (instances < 50) {
      const std::uint32_t T = 3 + static_cast<std::uint32_t>(rng.uniform_below(3));
      const std::uint32_t V = 3;
      const size_t n = T * V;
      std::vector<double> logits(n);
      for (auto& x : logits) x = 1.5 * rng.gaussian();
      std::vector<int> target;
      const int len = 1 + static_cast<int>(rng.uniform_below(2));
      for (int i = 0; i < len; ++i) {
        target.push_back(1 + static_cast<int>(rng.uniform_below(V - 1)));
      }
      const auto res = ctc_loss_grad(logits, T, V, target, 0);
      REQUIRE(res.alignable);
      const double h = 1e-4;
      for (size_t i = 0; i < n; ++i) {
        std::vector<double> lp = logits, lm = logits;
        lp[i] += h;
        lm[i] -= h;
        const double fp = ctc_loss_grad(lp, T, V, target, 0).loss;
        const double fm = ctc_loss_grad(lm, T, V, target, 0).loss;
        const double fd = (fp - fm) / (2 * h);
        const double an = res.grad[i];
        // relative error with a small-magnitude floor (finite differences
        // carry ~1e-8 absolute noise at h = 1e-4)
        const double err = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-3});
        CHECK(err < 1e-4);
      }
      ++instances;
    }
  }

  SUBCASE("peaked logits on a valid alignment give near-zero loss") {
    // target "ab" over 4 frames: a a b b with peak 30
    const std::uint32_t T = 4, V = 3;
    std::vector<double> logits(T * V, 0.0);
    logits[0 * V + 1] = 30;
    logits[1 * V + 1] = 30;
    logits[2 * V + 2] = 30;
    logits[3 * V + 2] = 30;
    const auto res = ctc_loss_grad(logits, T, V, {1, 2}, 0);
    CHECK(res.loss < 1e-3);
  }

  SUBCASE("unalignable target") {
    std::vector<double> logits(2 * 3, 0.0);
    const auto res = ctc_loss_grad(logits, 2, 3, {1, 1, 2}, 0);
    CHECK_FALSE(res.alignable);
    CHECK(std::isinf(res.loss));
    for (double g : res.grad) CHECK(g == 0.0);
  }

  SUBCASE("posterior support is blank and target labels only") {
    std::vector<double> logits(4 * 4);
    for (auto& x : logits) x = rng.gaussian();
    const auto res = ctc_loss_grad(logits, 4, 4, {2}, 0);
    for (std::uint32_t t = 0; t < 4; ++t) {
      CHECK(res.posteriors[t * 4 + 1] == 0.0);  // label 1 not in target
      CHECK(res.posteriors[t * 4 + 3] == 0.0);  // label 3 not in target
    }
  }
}
