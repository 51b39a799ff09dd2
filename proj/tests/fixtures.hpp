#pragma once

#include <string>

#include "restfuse/synth.hpp"

namespace fixtures {

/// Small synthetic dataset that trains in seconds.
inline restfuse::SynthConfig tiny_synth(std::uint64_t seed = 7) {
  restfuse::SynthConfig c;
  c.n_subjects = 3;
  c.trials_per_run = 10;
  c.runs_acquisition = 1;
  c.runs_online = 1;
  c.sample_rate = 128;
  c.n_channels = 4;
  c.seed = seed;
  return c;
}

}  // namespace fixtures
