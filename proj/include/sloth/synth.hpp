// SPDX-License-Identifier: Apache-2.0
//
// Synthetic score tables drawn from known ground-truth parameters, for
// recovery and harness tests. The emitted truth is canonicalized so its
// skills are exactly zero-mean with identity covariance and its loadings
// have simple structure (one nonzero per benchmark row).

#pragma once

#include <cstdint>

#include "sloth/dataset.hpp"
#include "sloth/model.hpp"

namespace sloth {

struct SynthSpec {
  int families = 10;
  int models_per_family = 5;
  int benchmarks = 12;
  int d = 3;
  double noise_std = 0.0;  // additive truncated-Gaussian on the score scale
  uint64_t seed = 1;

  void check() const;
};

struct SynthResult {
  ScoreTable table;
  SlothParams truth;
  AsymptoteConfig asymptotes;
  int truncation_events = 0;  // draws that initially left [0,1]
  int design_rank = 0;
};

SynthResult generate(const SynthSpec& spec);

}  // namespace sloth
