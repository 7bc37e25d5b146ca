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

#include "casr/ctc_core.hpp"

#include <cmath>
#include <iostream>

#include "casr/util.hpp"

namespace casr {

std::vector<int> collapse_path(const std::vector<int>& path, int blank_index) {
  std::vector<int> out;
  int prev = -1;
  for (int p : path) {
    if (p != prev && p != blank_index) out.push_back(p);
    prev = p;
  }
  return out;
}

std::vector<int> argmax_path(const EmissionMatrix& m) {
  std::vector<int> path(m.frames);
  for (std::uint32_t t = 0; t < m.frames; ++t) {
    int best = 0;
    float best_val = m.at(t, 0);
    for (std::uint32_t v = 1; v < m.vocab_size; ++v) {
      const float x = m.at(t, v);
      if (x > best_val) {  // ties keep the lowest index
        best_val = x;
        best = static_cast<int>(v);
      }
    }
    path[t] = best;
  }
  return path;
}

std::string greedy_decode(const EmissionMatrix& m, const Vocabulary& vocab) {
  if (static_cast<int>(m.vocab_size) != vocab.size()) {
    throw Error("greedy_decode: emission V=" + std::to_string(m.vocab_size) +
                " does not match vocabulary size " + std::to_string(vocab.size()));
  }
  return vocab.render(collapse_path(argmax_path(m), vocab.blank_index));
}

namespace {

// Blank-extended target: [blank, t1, blank, t2, ..., blank].
std::vector<int> extend_with_blanks(const std::vector<int>& target, int blank) {
  std::vector<int> z;
  z.reserve(2 * target.size() + 1);
  z.push_back(blank);
  for (int t : target) {
    z.push_back(t);
    z.push_back(blank);
  }
  return z;
}

void check_target(std::uint32_t vocab_size, const std::vector<int>& target,
                  int blank_index) {
  for (int t : target) {
    if (t == blank_index) throw Error("ctc: target contains the blank label");
    if (t < 0 || t >= static_cast<int>(vocab_size)) {
      throw Error("ctc: target label " + std::to_string(t) + " out of range");
    }
  }
}

// One frame per label plus one separating blank per adjacent repeat.
size_t minimal_alignment_frames(const std::vector<int>& target) {
  size_t n = target.size();
  for (size_t i = 1; i < target.size(); ++i) {
    if (target[i] == target[i - 1]) ++n;
  }
  return n;
}

// All recursions run on double log-probabilities so the gradient check is
// not limited by float32 storage.

// Forward pass over the blank-extended target; returns T x S alpha in log
// space (S = 2L+1).
std::vector<double> ctc_alpha(const double* lp, std::uint32_t T, std::uint32_t V,
                              const std::vector<int>& z) {
  const size_t S = z.size();
  std::vector<double> alpha(static_cast<size_t>(T) * S, kLogZero);
  alpha[0] = lp[z[0]];
  if (S > 1) alpha[1] = lp[z[1]];
  for (std::uint32_t t = 1; t < T; ++t) {
    const double* row = lp + static_cast<size_t>(t) * V;
    for (size_t s = 0; s < S; ++s) {
      double acc = alpha[(t - 1) * S + s];
      if (s >= 1) acc = log_add(acc, alpha[(t - 1) * S + s - 1]);
      if (s >= 2 && z[s] != z[s - 2]) {
        acc = log_add(acc, alpha[(t - 1) * S + s - 2]);
      }
      alpha[t * S + s] = acc == kLogZero ? kLogZero : acc + row[z[s]];
    }
  }
  return alpha;
}

// Backward pass, mirror of the forward pass; beta excludes the emission at
// frame t so that alpha_t(s) + beta_t(s) sums paths through (t, s).
std::vector<double> ctc_beta(const double* lp, std::uint32_t T, std::uint32_t V,
                             const std::vector<int>& z) {
  const size_t S = z.size();
  std::vector<double> beta(static_cast<size_t>(T) * S, kLogZero);
  beta[(T - 1) * S + S - 1] = 0.0;
  if (S > 1) beta[(T - 1) * S + S - 2] = 0.0;
  for (std::uint32_t t = T - 1; t-- > 0;) {
    const double* next_row = lp + static_cast<size_t>(t + 1) * V;
    for (size_t s = 0; s < S; ++s) {
      double acc = log_add(beta[(t + 1) * S + s] + next_row[z[s]],
                           s + 1 < S ? beta[(t + 1) * S + s + 1] + next_row[z[s + 1]]
                                     : kLogZero);
      if (s + 2 < S && z[s] != z[s + 2]) {
        acc = log_add(acc, beta[(t + 1) * S + s + 2] + next_row[z[s + 2]]);
      }
      beta[t * S + s] = acc;
    }
  }
  return beta;
}

double log_prob_impl(const double* lp, std::uint32_t T, std::uint32_t V,
                     const std::vector<int>& target, int blank_index) {
  if (T < minimal_alignment_frames(target)) return kLogZero;
  const std::vector<int> z = extend_with_blanks(target, blank_index);
  const std::vector<double> alpha = ctc_alpha(lp, T, V, z);
  const size_t S = z.size();
  double result = alpha[(T - 1) * S + S - 1];
  if (S > 1) result = log_add(result, alpha[(T - 1) * S + S - 2]);
  return result;
}

}  // namespace

double ctc_log_prob(const EmissionMatrix& m, const std::vector<int>& target,
                    int blank_index) {
  check_target(m.vocab_size, target, blank_index);
  std::vector<double> lp(m.logprobs.begin(), m.logprobs.end());
  return log_prob_impl(lp.data(), m.frames, m.vocab_size, target, blank_index);
}

CtcLossResult ctc_loss_grad(const std::vector<double>& logits, std::uint32_t frames,
                            std::uint32_t vocab_size, const std::vector<int>& target,
                            int blank_index) {
  if (frames == 0 || vocab_size == 0 ||
      logits.size() != static_cast<size_t>(frames) * vocab_size) {
    throw Error("ctc_loss_grad: logits size mismatch");
  }
  check_target(vocab_size, target, blank_index);

  std::vector<double> logsoft(logits.size());
  for (std::uint32_t t = 0; t < frames; ++t) {
    const size_t base = static_cast<size_t>(t) * vocab_size;
    double mx = logits[base];
    for (std::uint32_t v = 1; v < vocab_size; ++v) mx = std::max(mx, logits[base + v]);
    double z = 0.0;
    for (std::uint32_t v = 0; v < vocab_size; ++v) z += std::exp(logits[base + v] - mx);
    const double logz = mx + std::log(z);
    for (std::uint32_t v = 0; v < vocab_size; ++v) {
      logsoft[base + v] = logits[base + v] - logz;
    }
  }

  CtcLossResult res;
  res.grad.assign(logits.size(), 0.0);
  res.posteriors.assign(logits.size(), 0.0);

  const double logp = log_prob_impl(logsoft.data(), frames, vocab_size, target,
                                    blank_index);
  if (logp == kLogZero) {
    std::cerr << "ctc_loss_grad: target of length " << target.size()
              << " is not alignable in " << frames << " frames\n";
    res.loss = std::numeric_limits<double>::infinity();
    res.alignable = false;
    return res;
  }
  res.loss = -logp;

  const std::vector<int> z = extend_with_blanks(target, blank_index);
  const size_t S = z.size();
  const std::vector<double> alpha = ctc_alpha(logsoft.data(), frames, vocab_size, z);
  const std::vector<double> beta = ctc_beta(logsoft.data(), frames, vocab_size, z);

  for (std::uint32_t t = 0; t < frames; ++t) {
    const size_t base = static_cast<size_t>(t) * vocab_size;
    for (size_t s = 0; s < S; ++s) {
      const double g = alpha[t * S + s] + beta[t * S + s] - logp;
      if (g != kLogZero) res.posteriors[base + z[s]] += std::exp(g);
    }
    for (std::uint32_t v = 0; v < vocab_size; ++v) {
      res.grad[base + v] = std::exp(logsoft[base + v]) - res.posteriors[base + v];
    }
  }
  return res;
}

}  // namespace casr
