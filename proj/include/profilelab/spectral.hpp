#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "profilelab/errors.hpp"
#include "profilelab/weight_model.hpp"

namespace profilelab {

/// A(-theta) = bEe^{-theta.Z} - 1 with its gradient c = bEZe^{-theta.Z} and
/// Hessian bE ZZ^T e^{-theta.Z}.
struct SpectralPoint {
  std::vector<double> theta;
  double A = 0.0;
  std::vector<double> gradA;
  Eigen::MatrixXd hessA;
  double det_hess = 0.0;
};

inline SpectralPoint spectral_point(const WeightModel& model, const std::vector<double>& theta) {
  const auto law = marginal(model);
  const auto d = static_cast<Eigen::Index>(model.d);
  if (static_cast<Eigen::Index>(theta.size()) != d) throw DomainError("theta dimension does not match the model");
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(d, d);
  double m = 0.0;
  for (const auto& a : law.atoms) {
    const double w = model.b * a.p * std::exp(-dot(theta, a.value));
    Eigen::VectorXd z(d);
    for (Eigen::Index i = 0; i < d; ++i) z(i) = static_cast<double>(a.value[static_cast<std::size_t>(i)]);
    m += w;
    grad += w * z;
    hess += w * z * z.transpose();
  }
  SpectralPoint p;
  p.theta = theta;
  p.A = m - 1.0;
  p.gradA.assign(grad.data(), grad.data() + d);
  p.hessA = hess;
  p.det_hess = hess.determinant();
  return p;
}

/// True iff the support of Z spans R^d linearly, i.e. no v != 0 is orthogonal
/// to every support point. Equivalent to D^2A(-theta) positive definite.
inline bool is_nondegenerate(const WeightModel& model) {
  const auto law = marginal(model);
  Eigen::MatrixXd s(static_cast<Eigen::Index>(law.atoms.size()), model.d);
  for (std::size_t r = 0; r < law.atoms.size(); ++r)
    for (int c = 0; c < model.d; ++c) s(static_cast<Eigen::Index>(r), c) = static_cast<double>(law.atoms[r].value[static_cast<std::size_t>(c)]);
  return Eigen::FullPivLU<Eigen::MatrixXd>(s).rank() == model.d;
}

/// Slack of the defining inequality of the real admissible region:
/// b theta.EZe^{-theta.Z} - (1 - bEe^{-theta.Z}); positive inside.
inline double lambda_tilde_margin(const WeightModel& model, const std::vector<double>& theta) {
  const auto p = spectral_point(model, theta);
  double s = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) s += theta[i] * p.gradA[i];
  return s - (1.0 - (p.A + 1.0));
}

inline bool in_lambda_tilde(const WeightModel& model, const std::vector<double>& theta) {
  return lambda_tilde_margin(model, theta) > 0.0;
}

/// f(z) = 1 - bEz^Z + log(z) bEZz^Z for z > 0 (d = 1). The admissible
/// theta are those with f(e^{-theta}) < 0.
inline double range_function(const WeightModel& model, double z) {
  const auto law = marginal(model);
  double m = 0.0, g = 0.0;
  const double lz = std::log(z);
  for (const auto& a : law.atoms) {
    const double k = static_cast<double>(a.value[0]);
    const double w = model.b * a.p * std::exp(k * lz);
    m += w;
    g += k * w;
  }
  return 1.0 - m + lz * g;
}

/// d = 1 admissible region: z in (z0, z1), theta in (-log z1, -log z0), and
/// its gradient image Lambda* = (c_lo, c_hi).
struct ThetaDomain {
  int dim = 1;
  double z0 = 0.0;
  double z1 = 0.0;
  double theta_low = 0.0;
  double theta_high = std::numeric_limits<double>::infinity();  // +inf when z0 = 0
  double c_low = 0.0;
  double c_high = 0.0;

  bool contains_theta(double theta) const { return theta > theta_low && theta < theta_high; }
  bool contains_c(double c) const { return c > c_low && c < c_high; }
};

namespace detail {

template <typename F>
double bisect(F&& f, double lo, double hi) {
  // f(lo) and f(hi) have opposite signs
  const bool lo_negative = f(lo) < 0.0;
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if ((f(mid) < 0.0) == lo_negative)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

inline double grad_d1(const WeightModel& model, double theta) {
  double g = 0.0;
  for (const auto& a : marginal(model).atoms) {
    const double k = static_cast<double>(a.value[0]);
    if (k != 0.0) g += model.b * a.p * k * std::exp(-theta * k);
  }
  return g;
}

}  // namespace detail

/// Roots z0 < z1 of the range function around its single minimum at z = 1.
/// z0 = 0 when f stays negative all the way down to z = 2^-60.
inline ThetaDomain range_d1(const WeightModel& model) {
  if (model.d != 1) throw DomainError("range_d1 needs d = 1");
  if (!is_nondegenerate(model)) throw DomainError("range_d1 needs a nondegenerate model");
  auto f = [&model](double z) { return range_function(model, z); };

  ThetaDomain dom;
  double hi = 2.0;
  while (f(hi) <= 0.0) {
    hi *= 2.0;
    if (hi > 0x1.0p60) throw NumericError("range function has no sign change above z=1 within 2^60");
  }
  dom.z1 = detail::bisect(f, hi / 2.0, hi);

  dom.z0 = 0.0;
  for (int k = 1; k <= 60; ++k) {
    const double z = std::ldexp(1.0, -k);
    if (f(z) > 0.0) {
      dom.z0 = detail::bisect(f, z, 2.0 * z);
      break;
    }
  }
  dom.theta_low = -std::log(dom.z1);
  dom.theta_high = dom.z0 > 0.0 ? -std::log(dom.z0) : std::numeric_limits<double>::infinity();
  dom.c_low = dom.z0 > 0.0 ? detail::grad_d1(model, dom.theta_high) : 0.0;
  dom.c_high = detail::grad_d1(model, dom.theta_low);
  return dom;
}

/// Solves bEZe^{-theta.Z} = c. d = 1 uses bisection on the strictly
/// decreasing gradient followed by Newton polishing; d > 1 uses Newton with
/// step halving on the residual norm, started at theta = 0.
inline std::vector<double> theta_of_c(const WeightModel& model, const std::vector<double>& c) {
  if (static_cast<int>(c.size()) != model.d) throw DomainError("c dimension does not match the model");
  if (!is_nondegenerate(model)) throw DomainError("theta_of_c needs a nondegenerate model");
  double scale = 1.0;
  for (double v : c) scale = std::max(scale, std::abs(v));
  const double tol = 1e-10 * scale;

  if (model.d == 1) {
    auto g = [&](double t) { return detail::grad_d1(model, t) - c[0]; };
    double lo = -1.0, hi = 1.0;
    while (g(lo) < 0.0) {
      lo *= 2.0;
      if (lo < -0x1.0p20) throw DomainError("c=" + std::to_string(c[0]) + " is above the achievable gradient range");
    }
    while (g(hi) > 0.0) {
      hi *= 2.0;
      if (hi > 0x1.0p20) throw DomainError("c=" + std::to_string(c[0]) + " is below the achievable gradient range");
    }
    double t = detail::bisect(g, lo, hi);
    for (int it = 0; it < 4; ++it) {
      const auto sp = spectral_point(model, {t});
      const double r = sp.gradA[0] - c[0];
      if (r == 0.0 || sp.hessA(0, 0) <= 0.0) break;
      const double next = t + r / sp.hessA(0, 0);
      if (std::abs(detail::grad_d1(model, next) - c[0]) >= std::abs(r)) break;
      t = next;
    }
    if (!(std::abs(g(t)) < tol)) throw NumericError("theta_of_c did not reach the residual tolerance");
    return {t};
  }

  const auto d = static_cast<Eigen::Index>(model.d);
  Eigen::VectorXd target = Eigen::Map<const Eigen::VectorXd>(c.data(), d);
  std::vector<double> theta(static_cast<std::size_t>(d), 0.0);
  auto residual = [&](const std::vector<double>& t) {
    auto sp = spectral_point(model, t);
    Eigen::VectorXd r = Eigen::Map<Eigen::VectorXd>(sp.gradA.data(), d) - target;
    return std::pair<Eigen::VectorXd, Eigen::MatrixXd>{r, sp.hessA};
  };
  auto [r, h] = residual(theta);
  for (int it = 0; it < 200; ++it) {
    if (r.cwiseAbs().maxCoeff() < tol) return theta;
    Eigen::LLT<Eigen::MatrixXd> llt(h);
    if (llt.info() != Eigen::Success) throw DomainError("c is outside the achievable gradient range (theta diverged)");
    Eigen::VectorXd step = llt.solve(r);
    double t = 1.0;
    bool improved = false;
    for (int half = 0; half < 60; ++half, t *= 0.5) {
      std::vector<double> trial(theta);
      for (Eigen::Index i = 0; i < d; ++i) trial[static_cast<std::size_t>(i)] += t * step(i);
      auto [r2, h2] = residual(trial);
      if (r2.allFinite() && r2.norm() < r.norm()) {
        theta = std::move(trial);
        r = r2;
        h = h2;
        improved = true;
        break;
      }
    }
    if (!improved) throw DomainError("c is outside the achievable gradient range (damped Newton stalled)");
  }
  if (r.cwiseAbs().maxCoeff() < tol) return theta;
  throw NumericError("theta_of_c: Newton did not converge in 200 iterations");
}

}  // namespace profilelab
