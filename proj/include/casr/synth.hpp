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

#ifndef CASR_SYNTH_HPP_
#define CASR_SYNTH_HPP_

#include <cstdint>
#include <string>

#include "casr/corpus_io.hpp"

namespace casr {

/// Synthetic-emission generator settings. noise_sigma is the standard
/// deviation of Gaussian noise added to the logits before the softmax;
/// confusion_rate is the per-frame probability of swapping the peak logit
/// with a random other label.
struct SynthConfig {
  int frames_per_char = 2;      // in [1, 3]
  double noise_sigma = 0.0;     // >= 0
  double confusion_rate = 0.0;  // in [0, 1)
  std::uint64_t seed = 0;
};

/// Builds a peaked emission matrix for normalized text: each character is
/// emitted frames_per_char times with a single blank frame between repeated
/// characters (peak margin 5 nats), then noise and confusion swaps are
/// applied and rows are softmaxed. Deterministic per seed.
EmissionMatrix synth_emissions(const std::string& normalized_text,
                               const Vocabulary& vocab, const SynthConfig& cfg);

}  // namespace casr

#endif  // CASR_SYNTH_HPP_
