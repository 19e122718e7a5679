#pragma once

#include "qkdsim/errors.hpp"

namespace qkd {

// Abort-probability exponent s and leakage exponent l: the protocol
// succeeds or aborts except with probability O(2^-s), and the final key
// leaks O(2^-l).  Both enter the privacy-amplification length.
struct SecurityParams {
  int s = 10;
  int l = 10;

  void validate() const {
    if (s < 1 || l < 1) throw ConfigError("security: s and l must be >= 1");
  }
};

}  // namespace qkd
