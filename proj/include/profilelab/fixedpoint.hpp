#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "profilelab/errors.hpp"
#include "profilelab/parallel.hpp"
#include "profilelab/random.hpp"
#include "profilelab/spectral.hpp"
#include "profilelab/stats.hpp"
#include "profilelab/weight_model.hpp"

namespace profilelab {

/// Limiting subtree shares below the root: normalized i.i.d.
/// Gamma(1/(b-1)) variates, i.e. Dirichlet(1/(b-1), ..., 1/(b-1)).
inline std::vector<double> dirichlet_fractions(int b, Stream& rng) {
  if (b < 2) throw DomainError("dirichlet_fractions needs b >= 2");
  const double shape = 1.0 / (b - 1.0);
  std::vector<double> u(static_cast<std::size_t>(b));
  double total = 0.0;
  for (auto& v : u) total += (v = rng.gamma(shape));
  for (auto& v : u) v /= total;
  return u;
}

struct PoolDiagnostics {
  double mean = 0.0;
  double variance = 0.0;
  double ks = 0.0;  // two-sample KS distance to the previous pool
};

inline PoolDiagnostics pool_diagnostics(const std::vector<double>& current, const std::vector<double>& previous) {
  if (current.size() != previous.size()) throw DomainError("pool_diagnostics needs pools of equal size");
  return {sample_mean(current), sample_variance(current), ks_statistic(current, previous)};
}

struct SamplePool {
  std::vector<double> theta;
  std::vector<double> samples;
  std::vector<double> previous;  // pool one iteration earlier
  int iteration = 0;
  double mean = 1.0;
  double variance = 0.0;
  double ks_to_previous = 0.0;
  bool divergent = false;  // mean left [0.5, 2]
  double boundary_margin = 0.0;
};

/// The splitting map W = sum_j e^{-theta.Z_j} (U^{(j)})^kappa W_j with
/// kappa = (bEe^{-theta.Z} - 1)/(b-1), tabulated for one theta.
class SplittingMap {
 public:
  SplittingMap(const WeightModel& model, std::vector<double> theta) : model_(model), theta_(std::move(theta)) {
    const double m = spectral_point(model_, theta_).A + 1.0;
    kappa_ = (m - 1.0) / (model_.b - 1.0);
    for (const auto& atom : model_.atoms) {
      std::vector<double> f;
      for (const auto& z : atom.weights) f.push_back(std::exp(-dot(theta_, z)));
      tilt_.push_back(std::move(f));
    }
  }

  const std::vector<double>& theta() const { return theta_; }
  double kappa() const { return kappa_; }

  /// One population-dynamics sweep. Slots are processed in fixed blocks, and
  /// block k of iteration `iteration` draws from stream(seed, "pool", iteration, k).
  std::vector<double> step(const std::vector<double>& pool, std::uint64_t seed, int iteration) const {
    constexpr std::size_t kBlock = 1024;
    const std::size_t size = pool.size();
    std::vector<double> next(size);
    const std::size_t blocks = (size + kBlock - 1) / kBlock;
    const auto b = static_cast<std::size_t>(model_.b);
    parallel_for(blocks, [&](std::size_t blk) {
      Stream rng(seed, {stream_tag("pool"), static_cast<std::uint64_t>(iteration), blk});
      const std::size_t end = std::min(size, (blk + 1) * kBlock);
      for (std::size_t i = blk * kBlock; i < end; ++i) {
        const auto& f = tilt_[sample_atom(model_, rng)];
        const auto u = dirichlet_fractions(model_.b, rng);
        double w = 0.0;
        for (std::size_t j = 0; j < b; ++j) {
          const double parent = pool[rng.index(size)];
          w += f[j] * (kappa_ == 1.0 ? u[j] : std::pow(u[j], kappa_)) * parent;
        }
        next[i] = w;
      }
    });
    return next;
  }

 private:
  const WeightModel& model_;
  std::vector<double> theta_;
  double kappa_ = 1.0;
  std::vector<std::vector<double>> tilt_;  // per atom, per child
};

/// Population dynamics for W_infinity(theta): a pool of M copies of the
/// constant 1 is pushed K times through the splitting map.
inline SamplePool fixpoint_iterate(const WeightModel& model, const std::vector<double>& theta, std::size_t pool_size,
                                   int iterations, std::uint64_t seed) {
  if (!in_lambda_tilde(model, theta)) throw DomainError("theta is outside the admissible real region");
  if (pool_size < 1000) throw DomainError("pool size must be at least 1000");
  if (iterations < 1) throw DomainError("need at least one iteration");
  SplittingMap map(model, theta);
  SamplePool out;
  out.theta = theta;
  out.samples.assign(pool_size, 1.0);
  for (int k = 1; k <= iterations; ++k) {
    out.previous = std::move(out.samples);
    out.samples = map.step(out.previous, seed, k);
  }
  const auto diag = pool_diagnostics(out.samples, out.previous);
  out.iteration = iterations;
  out.mean = diag.mean;
  out.variance = diag.variance;
  out.ks_to_previous = diag.ks;
  out.divergent = !(out.mean >= 0.5 && out.mean <= 2.0);
  out.boundary_margin = lambda_tilde_margin(model, theta);
  return out;
}

}  // namespace profilelab
