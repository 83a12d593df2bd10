#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "profilelab/errors.hpp"
#include "profilelab/special.hpp"
#include "profilelab/tree_sim.hpp"
#include "profilelab/weight_model.hpp"

namespace profilelab {

using cplx = std::complex<double>;

/// lambda = theta + i eta in C^d.
struct LambdaPoint {
  std::vector<double> theta;
  std::vector<double> eta;  // empty or all zero for real evaluations

  static LambdaPoint real(std::vector<double> theta) { return {std::move(theta), {}}; }
  /// d = 1 evaluation at z = e^{-lambda} > 0, i.e. theta = -log z.
  static LambdaPoint from_z(double z) { return {{-std::log(z)}, {}}; }

  double eta_at(std::size_t i) const { return eta.empty() ? 0.0 : eta[i]; }
  bool is_real() const {
    for (double e : eta)
      if (e != 0.0) return false;
    return true;
  }
  LambdaPoint conj() const {
    LambdaPoint c{theta, eta};
    for (auto& e : c.eta) e = -e;
    return c;
  }
};

/// value * exp(log_scale); after normalization |value| lies in [1/2, 2).
struct MartingaleValue {
  cplx value{1.0, 0.0};
  double log_scale = 0.0;

  cplx to_complex() const { return value * std::exp(log_scale); }
};

namespace detail {

inline void check_dim(const WeightModel& model, const LambdaPoint& lambda) {
  if (static_cast<int>(lambda.theta.size()) != model.d || (!lambda.eta.empty() && static_cast<int>(lambda.eta.size()) != model.d))
    throw DomainError("lambda has dimension " + std::to_string(lambda.theta.size()) + ", model has d=" + std::to_string(model.d));
}

/// -lambda . l as (log-magnitude, phase).
inline std::pair<double, double> neg_lambda_dot(const LambdaPoint& lambda, const Level& l) {
  double re = 0.0, im = 0.0;
  for (std::size_t i = 0; i < l.size(); ++i) {
    re -= lambda.theta[i] * static_cast<double>(l[i]);
    im -= lambda.eta_at(i) * static_cast<double>(l[i]);
  }
  return {re, im};
}

inline MartingaleValue normalized(long double log_mag, long double phase) {
  MartingaleValue v;
  v.log_scale = static_cast<double>(log_mag);
  v.value = std::polar(1.0, static_cast<double>(std::remainder(phase, 2.0L * 3.14159265358979323846264338327950288L)));
  return v;
}

}  // namespace detail

/// b E e^{-lambda . Z}, the exponent rate of m(lambda)^t = exp[t(bEe^{-lambda.Z} - 1)].
inline cplx m_exponent(const WeightModel& model, const LambdaPoint& lambda) {
  detail::check_dim(model, lambda);
  cplx s{0.0, 0.0};
  for (const auto& a : marginal(model).atoms) {
    auto [re, im] = detail::neg_lambda_dot(lambda, a.value);
    s += a.p * std::exp(cplx(re, im));
  }
  return static_cast<double>(model.b) * s;
}

/// C_n = prod_{j=0}^{n-1} ((b-1) j + m) / ((b-1) j + 1) for a given exponent m,
/// accumulated in log-magnitude and phase.
inline MartingaleValue c_n_from_exponent(int b, cplx m, std::int64_t n) {
  if (n < 0) throw DomainError("c_n needs n >= 0");
  long double log_mag = 0.0L, phase = 0.0L;
  const long double mr = m.real(), mi = m.imag();
  for (std::int64_t j = 0; j < n; ++j) {
    const long double base = static_cast<long double>(b - 1) * static_cast<long double>(j);
    const long double re = base + mr;
    const long double mag = std::hypot(re, mi);
    if (mag <= 1e-14L * std::max(1.0L, base + std::hypot(mr, mi)))
      throw DomainError("lambda lies in N_C: factor j=" + std::to_string(j) + " of C_n vanishes");
    log_mag += std::log(mag) - std::log(base + 1.0L);
    phase += std::atan2(mi, re);
  }
  return detail::normalized(log_mag, phase);
}

inline MartingaleValue c_n(const WeightModel& model, const LambdaPoint& lambda, std::int64_t n) {
  return c_n_from_exponent(model.b, m_exponent(model, lambda), n);
}

/// sum_l U_l e^{-lambda . (l - origin)}, in log scale.
inline MartingaleValue profile_polynomial(const Profile& profile, const LambdaPoint& lambda, const Level& origin = {}) {
  auto shifted = [&origin](Level l) {
    for (std::size_t i = 0; i < origin.size() && i < l.size(); ++i) l[i] -= origin[i];
    return l;
  };
  double top = -HUGE_VAL;
  for (const auto& [l, c] : profile.counts)
    top = std::max(top, std::log(static_cast<double>(c)) + detail::neg_lambda_dot(lambda, shifted(l)).first);
  cplx s{0.0, 0.0};
  for (const auto& [l, c] : profile.counts) {
    auto [re, im] = detail::neg_lambda_dot(lambda, shifted(l));
    s += std::polar(std::exp(std::log(static_cast<double>(c)) + re - top), im);
  }
  return {s, top};
}

/// W_n(lambda) = sum_l U_l(n) e^{-lambda . (l - root)} / C_n(lambda); W_0 = 1.
inline cplx w_n(const Profile& profile, const WeightModel& model, const LambdaPoint& lambda) {
  const auto num = profile_polynomial(profile, lambda, model.root_level());
  const auto den = c_n(model, lambda, profile.n);
  return num.value / den.value * std::exp(num.log_scale - den.log_scale);
}

/// W^{(t)}(lambda) = sum_u e^{-lambda . (D_u - root)} / m(lambda)^t.
inline cplx w_continuous(const Profile& profile, double t, const WeightModel& model, const LambdaPoint& lambda) {
  if (t < 0.0) throw DomainError("w_continuous needs t >= 0");
  const cplx m = m_exponent(model, lambda);
  const auto num = profile_polynomial(profile, lambda, model.root_level());
  return num.value * std::exp(num.log_scale - t * (m.real() - 1.0)) * std::polar(1.0, -t * m.imag());
}

/// H_n(lambda) = C_n(lambda) e^{tau_n (1 - bEe^{-lambda.Z})}.
inline cplx h_n(const WeightModel& model, const LambdaPoint& lambda, double tau_n, std::int64_t n) {
  const cplx m = m_exponent(model, lambda);
  const auto c = c_n_from_exponent(model.b, m, n);
  return c.value * std::exp(c.log_scale + tau_n * (1.0 - m.real())) * std::polar(1.0, -tau_n * m.imag());
}

/// Almost-sure limit of H_n(theta) given the Yule limit Y:
/// (Y/(b-1))^{(m-1)/(b-1)} Gamma(1/(b-1)) / Gamma(m/(b-1)).
inline double h_limit(const WeightModel& model, const std::vector<double>& theta, double y) {
  const double m = m_exponent(model, LambdaPoint::real(theta)).real();
  const double a = model.b - 1.0;
  return std::exp((m - 1.0) / a * std::log(y / a) + log_gamma(1.0 / a) - log_gamma(m / a));
}

/// n^{(m-1)/(b-1)} Gamma(1/(b-1)) / Gamma(m/(b-1)) with m = bEe^{-theta.Z}.
inline double c_n_asymptotic(const WeightModel& model, const std::vector<double>& theta, std::int64_t n) {
  const double m = m_exponent(model, LambdaPoint::real(theta)).real();
  const double a = model.b - 1.0;
  return std::exp((m - 1.0) / a * std::log(static_cast<double>(n)) + log_gamma(1.0 / a) - log_gamma(m / a));
}

struct TauTransform {
  double exact = 1.0;       // E e^{s tau_n}
  double asymptotic = 1.0;  // Gamma((1-s)/(b-1)) / Gamma(1/(b-1)) n^{s/(b-1)}
};

/// E e^{s tau_n} = prod_{j=1}^n a_{j-1} / (a_{j-1} - s) with a_k = (b-1)k + 1.
inline TauTransform expected_tau_transform(int b, double s, std::int64_t n) {
  if (s >= 1.0) throw DomainError("expected_tau_transform diverges for s >= 1");
  if (b < 2 || n < 0) throw DomainError("expected_tau_transform needs b >= 2, n >= 0");
  long double log_p = 0.0L;
  for (std::int64_t j = 1; j <= n; ++j) {
    const long double a = static_cast<long double>(b - 1) * static_cast<long double>(j - 1) + 1.0L;
    log_p += std::log(a) - std::log(a - s);
  }
  const double alpha = b - 1.0;
  TauTransform out;
  out.exact = static_cast<double>(std::exp(log_p));
  out.asymptotic = n == 0 ? 1.0
                          : std::exp(log_gamma((1.0 - s) / alpha) - log_gamma(1.0 / alpha) +
                                     s / alpha * std::log(static_cast<double>(n)));
  return out;
}

}  // namespace profilelab
