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

#include "casr/synth.hpp"

#include <cmath>
#include <vector>

#include "casr/util.hpp"

namespace casr {

EmissionMatrix synth_emissions(const std::string& normalized_text,
                               const Vocabulary& vocab, const SynthConfig& cfg) {
  if (cfg.frames_per_char < 1 || cfg.frames_per_char > 3) {
    throw Error("synth: frames_per_char must be in [1, 3]");
  }
  if (cfg.noise_sigma < 0) throw Error("synth: noise_sigma must be nonnegative");
  if (cfg.confusion_rate < 0 || cfg.confusion_rate >= 1) {
    throw Error("synth: confusion_rate must be in [0, 1)");
  }

  const std::vector<int> labels = vocab.to_labels(normalized_text);

  // canonical alignment: frames_per_char frames per character, one blank
  // between repeated characters so the collapse keeps both
  std::vector<int> alignment;
  alignment.reserve(labels.size() * cfg.frames_per_char + labels.size());
  int prev = -1;
  for (int l : labels) {
    if (l == prev) alignment.push_back(vocab.blank_index);
    for (int k = 0; k < cfg.frames_per_char; ++k) alignment.push_back(l);
    prev = l;
  }
  if (alignment.empty()) alignment.push_back(vocab.blank_index);

  const int V = vocab.size();
  const std::uint32_t T = static_cast<std::uint32_t>(alignment.size());
  constexpr double kPeak = 5.0;  // margin in nats at sigma = 0

  Rng rng(cfg.seed);
  EmissionMatrix m;
  m.frames = T;
  m.vocab_size = static_cast<std::uint32_t>(V);
  m.logprobs.resize(static_cast<size_t>(T) * V);

  std::vector<double> row(V);
  for (std::uint32_t t = 0; t < T; ++t) {
    int peak = alignment[t];
    for (int v = 0; v < V; ++v) row[v] = v == peak ? kPeak : 0.0;
    if (cfg.noise_sigma > 0) {
      for (int v = 0; v < V; ++v) row[v] += cfg.noise_sigma * rng.gaussian();
    }
    if (cfg.confusion_rate > 0 && rng.uniform01() < cfg.confusion_rate) {
      // swap the canonical peak with a random other label
      int other = static_cast<int>(rng.uniform_below(V - 1));
      if (other >= peak) ++other;
      std::swap(row[peak], row[other]);
    }
    // row log-softmax
    double mx = row[0];
    for (int v = 1; v < V; ++v) mx = std::max(mx, row[v]);
    double z = 0.0;
    for (int v = 0; v < V; ++v) z += std::exp(row[v] - mx);
    const double logz = mx + std::log(z);
    for (int v = 0; v < V; ++v) {
      m.at(t, v) = static_cast<float>(row[v] - logz);
    }
  }
  m.validate();
  return m;
}

}  // namespace casr
