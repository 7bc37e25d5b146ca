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

#ifndef CASR_CTC_CORE_HPP_
#define CASR_CTC_CORE_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "casr/corpus_io.hpp"

namespace casr {

/// Merges adjacent equal labels, then deletes blanks.
std::vector<int> collapse_path(const std::vector<int>& path, int blank_index);

/// Per-frame argmax path; ties break toward the lowest vocabulary index.
std::vector<int> argmax_path(const EmissionMatrix& m);

/// Best-path (Viterbi) decoding: argmax path, CTC collapse, boundary
/// rendered as space.
std::string greedy_decode(const EmissionMatrix& m, const Vocabulary& vocab);

/// Exact log P(target | emissions) summed over all frame paths that
/// collapse to target. Forward recursion over the blank-extended target in
/// log space. Returns -inf when T is shorter than the minimal alignment.
/// The target must not contain the blank label.
double ctc_log_prob(const EmissionMatrix& m, const std::vector<int>& target,
                    int blank_index);

struct CtcLossResult {
  double loss = 0.0;               // -log P(target), +inf when unalignable
  std::vector<double> grad;        // T x V, d loss / d logits
  std::vector<double> posteriors;  // T x V alignment posteriors (gamma)
  bool alignable = true;
};

/// CTC loss and gradient with respect to unnormalized logits.
/// grad row t equals softmax(logits[t]) - gamma[t]; each grad row sums to 0.
/// An unalignable target yields loss = +inf, zero grad and a warning on
/// stderr.
CtcLossResult ctc_loss_grad(const std::vector<double>& logits, std::uint32_t frames,
                            std::uint32_t vocab_size, const std::vector<int>& target,
                            int blank_index);

}  // namespace casr

#endif  // CASR_CTC_CORE_HPP_
