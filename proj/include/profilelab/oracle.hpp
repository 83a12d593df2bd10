#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "profilelab/errors.hpp"
#include "profilelab/rational.hpp"
#include "profilelab/tree_sim.hpp"
#include "profilelab/weight_model.hpp"

namespace profilelab {

struct HistoryEntry {
  long double probability = 0.0L;
  std::optional<Rational> exact;  // present when every atom probability is rational
  Profile profile;
};

/// Exact law of the profile of T_{tau_n}, one entry per distinct profile,
/// ordered canonically by profile.
struct HistoryDistribution {
  std::int64_t n = 0;
  std::vector<HistoryEntry> entries;
};

inline constexpr long double kDefaultHistoryCap = 1e7L;

namespace detail {

using Counts = std::map<Level, std::uint64_t>;

struct Mass {
  long double p = 0.0L;
  std::optional<Rational> exact;
};

/// All profiles reachable from `counts` in one split, with their conditional
/// probabilities, calling sink(next_counts, prob_real, prob_exact).
template <typename Sink>
void for_each_successor(const WeightModel& model, const Counts& counts, bool exact, Sink&& sink) {
  std::uint64_t leaves = 0;
  for (const auto& [_, c] : counts) leaves += c;
  for (const auto& [level, c] : counts) {
    for (const auto& atom : model.atoms) {
      Counts next = counts;
      if (--next[level] == 0) next.erase(level);
      for (const auto& w : atom.weights) ++next[level + w];
      const long double p = static_cast<long double>(c) / static_cast<long double>(leaves) *
                            (atom.exact_p ? atom.exact_p->to_long_double() : static_cast<long double>(atom.p));
      std::optional<Rational> pe;
      if (exact) pe = Rational(static_cast<std::int64_t>(c), static_cast<std::int64_t>(leaves)) * *atom.exact_p;
      sink(next, p, pe);
    }
  }
}

inline std::map<Counts, Mass> history_step(const WeightModel& model, const std::map<Counts, Mass>& current) {
  const bool exact = model.exact();
  std::map<Counts, Mass> next;
  for (const auto& [counts, mass] : current) {
    for_each_successor(model, counts, exact, [&](const Counts& c, long double p, const std::optional<Rational>& pe) {
      auto& slot = next[c];
      slot.p += mass.p * p;
      if (exact) slot.exact = slot.exact.value_or(Rational(0)) + *mass.exact * *pe;
    });
  }
  return next;
}

inline std::map<Counts, Mass> initial_history(const WeightModel& model) {
  Mass m{1.0L, std::nullopt};
  if (model.exact()) m.exact = Rational(1);
  return {{Counts{{model.root_level(), 1}}, m}};
}

inline void check_history_cap(const WeightModel& model, std::int64_t n, long double cap) {
  long double count = 1.0L;
  for (std::int64_t k = 1; k <= n; ++k)
    count *= static_cast<long double>((model.b - 1) * (k - 1) + 1) * static_cast<long double>(model.atoms.size());
  if (count > cap)
    throw ResourceError("enumerating n=" + std::to_string(n) + " needs " + std::to_string(static_cast<double>(count)) +
                        " histories, above the cap of " + std::to_string(static_cast<double>(cap)));
}

}  // namespace detail

inline HistoryDistribution enumerate_histories(const WeightModel& model, std::int64_t n,
                                               long double cap = kDefaultHistoryCap) {
  if (n < 0) throw DomainError("n must be nonnegative");
  if (!validate(model).ok()) throw DomainError("invalid weight model");
  detail::check_history_cap(model, n, cap);
  auto state = detail::initial_history(model);
  for (std::int64_t k = 0; k < n; ++k) state = detail::history_step(model, state);
  HistoryDistribution out;
  out.n = n;
  for (auto& [counts, mass] : state) out.entries.push_back({mass.p, mass.exact, Profile{counts, n}});
  return out;
}

/// E U_l(n) for every reachable l, from the one-step mean recursion
///   E U_l(k+1) = E U_l(k) (1 - 1/a_k) + (b/a_k) sum_z P(Z=z) E U_{l-z}(k),
/// a_k = (b-1)k + 1. For d = 1 a dense window is kept and trimmed where the
/// means fall below 1e-280.
inline std::map<Level, double> exact_mean_profile(const WeightModel& model, std::int64_t n) {
  if (n < 0) throw DomainError("n must be nonnegative");
  const auto law = marginal(model);
  const long double b = model.b;
  std::map<Level, double> out;
  if (model.d == 1) {
    std::int64_t zmin = law.atoms.front().value[0], zmax = law.atoms.back().value[0];
    std::int64_t lo = model.root_level()[0];
    std::vector<long double> cur{1.0L}, next;
    constexpr long double kTiny = 1e-280L;
    for (std::int64_t k = 0; k < n; ++k) {
      const long double a = static_cast<long double>(model.b - 1) * static_cast<long double>(k) + 1.0L;
      const std::int64_t nlo = lo + std::min<std::int64_t>(zmin, 0);
      const std::int64_t nhi = lo + static_cast<std::int64_t>(cur.size()) - 1 + std::max<std::int64_t>(zmax, 0);
      next.assign(static_cast<std::size_t>(nhi - nlo + 1), 0.0L);
      for (std::size_t i = 0; i < cur.size(); ++i) {
        const long double v = cur[i];
        if (v == 0.0L) continue;
        const std::int64_t l = lo + static_cast<std::int64_t>(i);
        next[static_cast<std::size_t>(l - nlo)] += v * (1.0L - 1.0L / a);
        for (const auto& at : law.atoms)
          next[static_cast<std::size_t>(l + at.value[0] - nlo)] += b / a * static_cast<long double>(at.p) * v;
      }
      std::size_t first = 0, last = next.size();
      while (first + 1 < last && next[first] < kTiny) ++first;
      while (last - 1 > first && next[last - 1] < kTiny) --last;
      cur.assign(next.begin() + static_cast<std::ptrdiff_t>(first), next.begin() + static_cast<std::ptrdiff_t>(last));
      lo = nlo + static_cast<std::int64_t>(first);
    }
    for (std::size_t i = 0; i < cur.size(); ++i) out[Level{lo + static_cast<std::int64_t>(i)}] = static_cast<double>(cur[i]);
    return out;
  }
  std::map<Level, long double> cur{{model.root_level(), 1.0L}};
  for (std::int64_t k = 0; k < n; ++k) {
    const long double a = static_cast<long double>(model.b - 1) * static_cast<long double>(k) + 1.0L;
    std::map<Level, long double> next;
    for (const auto& [l, v] : cur) {
      next[l] += v * (1.0L - 1.0L / a);
      for (const auto& at : law.atoms) next[l + at.value] += b / a * static_cast<long double>(at.p) * v;
    }
    cur = std::move(next);
  }
  for (const auto& [l, v] : cur) out[l] = static_cast<double>(v);
  return out;
}

using cplxl = std::complex<long double>;

/// {-log 2, 0, log 2}^d.
inline std::vector<std::vector<double>> lambda_grid_3(int d) {
  const std::vector<double> axis{-std::log(2.0), 0.0, std::log(2.0)};
  std::vector<std::vector<double>> grid{{}};
  for (int k = 0; k < d; ++k) {
    std::vector<std::vector<double>> g;
    for (const auto& p : grid)
      for (double v : axis) {
        auto q = p;
        q.push_back(v);
        g.push_back(std::move(q));
      }
    grid = std::move(g);
  }
  return grid;
}

/// Largest |E[W_{m+1}(lambda) | T_m] - W_m(lambda)| over every profile
/// reachable at m = 0..n and every real lambda of the grid, using
/// extended-precision arithmetic and an independently accumulated C_m.
inline double conditional_martingale_check(const WeightModel& model, std::int64_t n,
                                           const std::vector<std::vector<double>>& lambdas,
                                           long double cap = kDefaultHistoryCap) {
  if (n < 0) throw DomainError("n must be nonnegative");
  detail::check_history_cap(model, n, cap);
  const auto law = marginal(model);

  auto poly = [](const detail::Counts& counts, const std::vector<double>& lambda) {
    cplxl s = 0.0L;
    for (const auto& [l, c] : counts) {
      long double e = 0.0L;
      for (std::size_t i = 0; i < l.size(); ++i) e -= static_cast<long double>(lambda[i]) * static_cast<long double>(l[i]);
      s += static_cast<long double>(c) * std::exp(e);
    }
    return s;
  };

  struct Grid {
    std::vector<double> lambda;
    long double m = 0.0L;        // bEe^{-lambda.Z}
    long double c_norm = 1.0L;   // C_k(lambda)
  };
  std::vector<Grid> grid;
  for (const auto& lambda : lambdas) {
    if (static_cast<int>(lambda.size()) != model.d) throw DomainError("lambda dimension does not match the model");
    Grid g{lambda};
    for (const auto& at : law.atoms) {
      long double e = 0.0L;
      for (std::size_t i = 0; i < lambda.size(); ++i) e -= static_cast<long double>(lambda[i]) * static_cast<long double>(at.value[i]);
      g.m += static_cast<long double>(model.b) * static_cast<long double>(at.p) * std::exp(e);
    }
    grid.push_back(g);
  }

  long double worst = 0.0L;
  const bool exact = model.exact();
  auto state = detail::initial_history(model);
  for (std::int64_t k = 0; k <= n; ++k) {
    const long double a = static_cast<long double>(model.b - 1) * static_cast<long double>(k) + 1.0L;
    for (const auto& [counts, _] : state) {
      for (auto& g : grid) {
        const long double c_next = g.c_norm * ((static_cast<long double>(model.b - 1) * static_cast<long double>(k) + g.m) / a);
        const cplxl w_now = poly(counts, g.lambda) / g.c_norm;
        cplxl expected = 0.0L;
        detail::for_each_successor(model, counts, exact, [&](const detail::Counts& next, long double p, const std::optional<Rational>&) {
          expected += p * poly(next, g.lambda);
        });
        expected /= c_next;
        worst = std::max(worst, std::abs(expected - w_now));
      }
    }
    for (auto& g : grid)
      g.c_norm *= (static_cast<long double>(model.b - 1) * static_cast<long double>(k) + g.m) / a;
    if (k < n) state = detail::history_step(model, state);
  }
  return static_cast<double>(worst);
}

/// (2 pi)^{-d} int_{[-pi,pi]^d} exp(-b t E e^{-theta.Z}(1 - e^{i eta.Z})) e^{-i eta.l} d eta,
/// by the periodic trapezoid rule, doubling the grid until successive values
/// agree to 1e-12. Supports d = 1 and d = 2.
inline double numeric_fourier_profile(const WeightModel& model, double t, const std::vector<double>& theta,
                                      const Level& l) {
  if (model.d > 2) throw DomainError("numeric_fourier_profile supports d <= 2");
  if (!(t > 0.0)) throw DomainError("numeric_fourier_profile needs t > 0");
  const auto law = marginal(model);
  std::vector<long double> weight;  // b t P(Z=z) e^{-theta.z}
  for (const auto& at : law.atoms)
    weight.push_back(static_cast<long double>(model.b) * t * at.p * std::exp(-static_cast<long double>(dot(theta, at.value))));

  auto integrand = [&](const std::vector<long double>& eta) {
    cplxl e = 0.0L;
    for (std::size_t k = 0; k < law.atoms.size(); ++k) {
      long double ph = 0.0L;
      for (std::size_t i = 0; i < eta.size(); ++i) ph += eta[i] * static_cast<long double>(law.atoms[k].value[i]);
      e -= weight[k] * (1.0L - std::polar(1.0L, ph));
    }
    long double lp = 0.0L;
    for (std::size_t i = 0; i < eta.size(); ++i) lp -= eta[i] * static_cast<long double>(l[i]);
    return std::exp(e) * std::polar(1.0L, lp);
  };
  auto trapezoid = [&](int points) {
    const long double h = 2.0L * std::numbers::pi_v<long double> / points;
    cplxl s = 0.0L;
    if (model.d == 1) {
      for (int i = 0; i < points; ++i) s += integrand({-std::numbers::pi_v<long double> + i * h});
      return s / static_cast<long double>(points);
    }
    for (int i = 0; i < points; ++i)
      for (int j = 0; j < points; ++j)
        s += integrand({-std::numbers::pi_v<long double> + i * h, -std::numbers::pi_v<long double> + j * h});
    return s / static_cast<long double>(points) / static_cast<long double>(points);
  };

  // Start well above the aliasing distance 2|l| so two rules never share an alias.
  std::int64_t reach = 16;
  for (auto v : l) reach = std::max<std::int64_t>(reach, 4 * (std::abs(v) + 16));
  const int max_points = model.d == 1 ? (1 << 16) : (1 << 10);
  int first = 16;
  while (first < reach && first < max_points / 2) first *= 2;
  cplxl prev = trapezoid(first);
  for (int points = 2 * first; points <= max_points; points *= 2) {
    const cplxl cur = trapezoid(points);
    if (std::abs(cur - prev) < 1e-12L) {
      if (std::abs(cur.imag()) > 1e-10L) throw NumericError("Fourier profile integral has a non-negligible imaginary part");
      return static_cast<double>(cur.real());
    }
    prev = cur;
  }
  throw NumericError("Fourier profile quadrature did not converge");
}

}  // namespace profilelab
