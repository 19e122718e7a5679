#pragma once

#include <cstdint>

namespace qkd::syncctl {

// Slow apparatus/channel drift, applied deterministically per slot.
// Rates are expressed per 1000 slots; onset_slot delays the effect.
struct DriftModel {
  double phase_drift_rate = 0.0;       // radians per 1000 slots
  double transmittance_drift = 1.0;    // multiplicative factor per 1000 slots
  std::int64_t onset_slot = 0;
};

}  // namespace qkd::syncctl
