#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "profilelab/errors.hpp"
#include "profilelab/special.hpp"
#include "profilelab/spectral.hpp"
#include "profilelab/weight_model.hpp"

namespace profilelab {

/// l_n(c) = floor(c log n / (b-1)), componentwise (floor also for negative c).
inline Level l_n(const std::vector<double>& c, std::int64_t n, int b) {
  if (n < 2) throw DomainError("l_n needs n >= 2");
  Level l;
  const double scale = std::log(static_cast<double>(n)) / (b - 1.0);
  for (double ci : c) l.push_back(static_cast<std::int64_t>(std::floor(ci * scale)));
  return l;
}

/// A normalization constant in log scale together with the tilt it used.
struct Normalization {
  double log_value = 0.0;
  std::vector<double> theta;
  Level level;
  bool near_boundary = false;  // theta within 1e-6 of the edge of the admissible region

  double value() const { return std::exp(log_value); }
};

namespace detail {

inline bool theta_near_boundary(const WeightModel& model, const std::vector<double>& theta, double eps = 1e-6) {
  if (model.d == 1) {
    const auto dom = range_d1(model);
    return theta[0] - dom.theta_low < eps || dom.theta_high - theta[0] < eps;
  }
  return lambda_tilde_margin(model, theta) < eps;
}

/// Requires c to lie in Lambda*; returns theta(c).
inline std::vector<double> admissible_theta(const WeightModel& model, const std::vector<double>& c) {
  if (model.d == 1) {
    const auto dom = range_d1(model);
    if (!dom.contains_c(c[0]))
      throw DomainError("c=" + std::to_string(c[0]) + " outside Lambda* = (" + std::to_string(dom.c_low) + ", " +
                        std::to_string(dom.c_high) + ")");
    return theta_of_c(model, c);
  }
  auto theta = theta_of_c(model, c);
  if (!in_lambda_tilde(model, theta)) throw DomainError("c is outside Lambda*: theta(c) is not admissible");
  return theta;
}

/// Shared body of A_c(n) and A-bar: everything but the choice of level. The
/// tilt is taken relative to the root level.
inline double log_normalization(const WeightModel& model, std::int64_t n, const std::vector<double>& theta,
                                const Level& level) {
  const auto sp = spectral_point(model, theta);
  const double a = model.b - 1.0;
  const double m = sp.A + 1.0;
  const double log_n = std::log(static_cast<double>(n));
  Level rel = level;
  const auto root = model.root_level();
  for (std::size_t i = 0; i < rel.size(); ++i) rel[i] -= root[i];
  return (m - 1.0) / a * log_n + dot(theta, rel) -
         0.5 * (model.d * std::log(2.0 * std::numbers::pi * log_n / a) + std::log(sp.det_hess)) +
         log_gamma(1.0 / a) - log_gamma(m / a);
}

}  // namespace detail

/// A_c(n) of the main convergence theorem, at the floored level l_n(c)
/// counted from the root level.
inline Normalization a_c(const WeightModel& model, std::int64_t n, const std::vector<double>& c) {
  if (n < 2) throw DomainError("a_c needs n >= 2");
  Normalization out;
  out.theta = detail::admissible_theta(model, c);
  out.level = l_n(c, n, model.b);
  const auto root = model.root_level();
  for (std::size_t i = 0; i < out.level.size(); ++i) out.level[i] += root[i];
  out.log_value = detail::log_normalization(model, n, out.theta, out.level);
  out.near_boundary = detail::theta_near_boundary(model, out.theta);
  return out;
}

/// A-bar at an integer level l: with k = l - root, theta solves
/// bEZe^{-theta.Z} = (b-1) k / log n and the exponential tilt uses k itself.
inline Normalization a_bar(const WeightModel& model, std::int64_t n, const Level& l) {
  if (n < 2) throw DomainError("a_bar needs n >= 2");
  if (static_cast<int>(l.size()) != model.d) throw DomainError("level dimension does not match the model");
  const auto root = model.root_level();
  std::vector<double> c;
  for (std::size_t i = 0; i < l.size(); ++i)
    c.push_back((model.b - 1.0) * static_cast<double>(l[i] - root[i]) / std::log(static_cast<double>(n)));
  Normalization out;
  out.theta = detail::admissible_theta(model, c);
  out.level = l;
  out.log_value = detail::log_normalization(model, n, out.theta, out.level);
  out.near_boundary = detail::theta_near_boundary(model, out.theta);
  return out;
}

/// d = 1 form written in z = e^{-theta}: with k = l - root, z solves
/// bEZz^Z = (b-1) k / log n and
///   A-hat = n^{(bEz^Z-1)/(b-1)} / (z^k sqrt(2 pi log n b/(b-1) E(Z^2 z^Z)))
///           * Gamma(1/(b-1)) / Gamma(bEz^Z/(b-1)).
/// Returns log A-hat.
inline double a_hat_d1(const WeightModel& model, std::int64_t n, std::int64_t l) {
  if (model.d != 1) throw DomainError("a_hat_d1 needs d = 1");
  if (n < 2) throw DomainError("a_hat_d1 needs n >= 2");
  const auto law = marginal(model);
  const double a = model.b - 1.0;
  const double log_n = std::log(static_cast<double>(n));
  l -= model.root_level()[0];
  const double target = a * static_cast<double>(l) / log_n;
  const auto dom = range_d1(model);
  if (!dom.contains_c(target)) throw DomainError("(b-1) l / log n = " + std::to_string(target) + " outside V*");

  struct Moments {
    double m0 = 0, m1 = 0, m2 = 0;  // E z^Z, E Z z^Z, E Z^2 z^Z
  };
  auto moments = [&law](double z) {
    Moments mo;
    for (const auto& at : law.atoms) {
      const double k = static_cast<double>(at.value[0]);
      const double w = at.p * std::pow(z, k);
      mo.m0 += w;
      mo.m1 += k * w;
      mo.m2 += k * k * w;
    }
    return mo;
  };
  // bEZz^Z is increasing in z > 0; bisect on (z0, z1).
  double lo = dom.z0, hi = dom.z1;
  for (int it = 0; it < 2000; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (model.b * moments(mid).m1 < target)
      lo = mid;
    else
      hi = mid;
  }
  const double z = 0.5 * (lo + hi);
  const auto mo = moments(z);
  const double m = model.b * mo.m0;
  return (m - 1.0) / a * log_n - static_cast<double>(l) * std::log(z) -
         0.5 * std::log(2.0 * std::numbers::pi * log_n * model.b / a * mo.m2) + log_gamma(1.0 / a) -
         log_gamma(m / a);
}

/// A_0..A_{l_max} with A_l = l! [x^l] exp(bt sum_j P(Z=j) x^j), the Poisson
/// mixture coefficients of the local profile shape at time t. Uses the
/// recurrence (k+1) g_{k+1} = sum_j (j+1) P_{j+1} g_{k-j} for g = exp(P).
inline std::vector<double> poisson_profile_coeffs(const WeightModel& model, double t, int l_max) {
  if (model.d != 1) throw DomainError("poisson_profile_coeffs needs d = 1");
  if (!(t > 0.0)) throw DomainError("poisson_profile_coeffs needs t > 0");
  if (l_max < 0) throw DomainError("l_max must be nonnegative");
  const auto law = marginal(model);
  std::vector<long double> poly;  // P_j = b t P(Z = j)
  for (const auto& at : law.atoms) {
    const auto k = at.value[0];
    if (k < 0) throw DomainError("poisson_profile_coeffs needs support in {0, 1, ...}");
    if (static_cast<std::size_t>(k) >= poly.size()) poly.resize(static_cast<std::size_t>(k) + 1, 0.0L);
    poly[static_cast<std::size_t>(k)] += static_cast<long double>(model.b) * t * at.p;
  }
  const auto L = static_cast<std::size_t>(l_max);
  std::vector<long double> g(L + 1, 0.0L);
  g[0] = std::exp(poly[0]);
  for (std::size_t k = 0; k < L; ++k) {
    long double s = 0.0L;
    for (std::size_t j = 0; j <= k && j + 1 < poly.size(); ++j)
      s += static_cast<long double>(j + 1) * poly[j + 1] * g[k - j];
    g[k + 1] = s / static_cast<long double>(k + 1);
  }
  std::vector<double> out(L + 1);
  long double fact = 1.0L;
  for (std::size_t l = 0; l <= L; ++l) {
    if (l > 0) fact *= static_cast<long double>(l);
    out[l] = static_cast<double>(g[l] * fact);
  }
  return out;
}

}  // namespace profilelab
