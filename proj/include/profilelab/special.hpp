#pragma once

#include <cmath>
#include <string>

#include "profilelab/errors.hpp"

namespace profilelab {

/// log Gamma(x) for x > 0. Backed by the C library's lgamma, which is
/// accurate to a few ulps on the positive axis.
inline double log_gamma(double x) {
  if (!(x > 0.0)) throw DomainError("log_gamma needs x > 0, got " + std::to_string(x));
  return std::lgamma(x);
}

}  // namespace profilelab
