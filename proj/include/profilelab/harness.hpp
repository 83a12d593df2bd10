#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "profilelab/errors.hpp"
#include "profilelab/fixedpoint.hpp"
#include "profilelab/martingale.hpp"
#include "profilelab/normalize.hpp"
#include "profilelab/oracle.hpp"
#include "profilelab/parallel.hpp"
#include "profilelab/random.hpp"
#include "profilelab/spectral.hpp"
#include "profilelab/stats.hpp"
#include "profilelab/tree_sim.hpp"
#include "profilelab/weight_model.hpp"

namespace profilelab {

/// Every pass/fail threshold used by the harness. Raw statistics are always
/// reported next to the verdict.
struct Thresholds {
  double ratio_mean = 0.10;       // |mean(U/A) - 1|, hard
  double ratio_per_rep = 0.25;    // |U/A - 1| per replication when W = 1, diagnostic
  double ratio_ks = 0.15;         // KS(ratios, pool), soft
  double interior_margin = 1e-3;  // grid points must sit this far inside Lambda*
  double identity = 1e-10;        // pathwise identities
  double product = 1e-12;         // C_n times E e^{(1-m) tau_n}
  double martingale = 1e-12;      // exact conditional expectation
  double mean_martingale = 1e-10; // E W_n = 1 from the mean profile
  double c_n_asymptotic = 1e-3;
  double ks_alpha = 0.01;         // significance level of every KS gate
  double mc_sigmas = 4.0;         // Monte Carlo means vs exact values
  double pool_mean = 0.01;
  double pool_ks = 0.01;
  double pool_unit = 1e-12;       // theta = 0 pool deviation from 1
};

/// Problem sizes of the identity suite.
struct IdentitySizes {
  std::int64_t grow_n = 200;
  int grow_reps = 20;
  std::int64_t product_n = 10000;
  std::int64_t asymptotic_n = 1000000;
  std::int64_t gamma_n = 2000;
  int gamma_reps = 2000;
  std::int64_t dirichlet_n = 2000;
  int dirichlet_reps = 400;
  std::int64_t tau_n = 1000;
  int tau_reps = 4000;
  std::int64_t oracle_n = 5;
  std::int64_t mean_n = 1000;
  std::size_t pool_size = 10000;
  int pool_iters = 10;
};

struct ExperimentConfig {
  std::string preset = "bst";
  ParamMap params;
  std::string model_path;  // custom JSON model; overrides preset when set
  std::vector<std::int64_t> n{100000};
  int reps = 20;
  std::vector<std::vector<double>> c_grid;  // empty with empty l_grid: the theta = 0 point
  std::vector<Level> l_grid;
  std::uint64_t seed = 1;
  std::size_t pool_size = 100000;
  int pool_iters = 30;
  std::string format = "json";
  std::string output;
  Thresholds thresholds;
  IdentitySizes sizes;
};

inline WeightModel config_model(const ExperimentConfig& cfg) {
  return cfg.model_path.empty() ? preset(cfg.preset, cfg.params) : load_model(cfg.model_path);
}

namespace detail {

/// Shortest text that round-trips the double.
inline std::string num(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline Thresholds thresholds_from_json(const nlohmann::json& j) {
  Thresholds t;
  detail::read_opt(j, "ratio_mean", t.ratio_mean);
  detail::read_opt(j, "ratio_per_rep", t.ratio_per_rep);
  detail::read_opt(j, "ratio_ks", t.ratio_ks);
  detail::read_opt(j, "interior_margin", t.interior_margin);
  detail::read_opt(j, "identity", t.identity);
  detail::read_opt(j, "product", t.product);
  detail::read_opt(j, "martingale", t.martingale);
  detail::read_opt(j, "mean_martingale", t.mean_martingale);
  detail::read_opt(j, "c_n_asymptotic", t.c_n_asymptotic);
  detail::read_opt(j, "ks_alpha", t.ks_alpha);
  detail::read_opt(j, "mc_sigmas", t.mc_sigmas);
  detail::read_opt(j, "pool_mean", t.pool_mean);
  detail::read_opt(j, "pool_ks", t.pool_ks);
  detail::read_opt(j, "pool_unit", t.pool_unit);
  return t;
}

inline nlohmann::json thresholds_to_json(const Thresholds& t) {
  return {{"ratio_mean", t.ratio_mean},           {"ratio_per_rep", t.ratio_per_rep},
          {"ratio_ks", t.ratio_ks},               {"interior_margin", t.interior_margin},
          {"identity", t.identity},               {"product", t.product},
          {"martingale", t.martingale},           {"mean_martingale", t.mean_martingale},
          {"c_n_asymptotic", t.c_n_asymptotic},   {"ks_alpha", t.ks_alpha},
          {"mc_sigmas", t.mc_sigmas},             {"pool_mean", t.pool_mean},
          {"pool_ks", t.pool_ks},                 {"pool_unit", t.pool_unit}};
}

inline IdentitySizes sizes_from_json(const nlohmann::json& j) {
  IdentitySizes s;
  detail::read_opt(j, "grow_n", s.grow_n);
  detail::read_opt(j, "grow_reps", s.grow_reps);
  detail::read_opt(j, "product_n", s.product_n);
  detail::read_opt(j, "asymptotic_n", s.asymptotic_n);
  detail::read_opt(j, "gamma_n", s.gamma_n);
  detail::read_opt(j, "gamma_reps", s.gamma_reps);
  detail::read_opt(j, "dirichlet_n", s.dirichlet_n);
  detail::read_opt(j, "dirichlet_reps", s.dirichlet_reps);
  detail::read_opt(j, "tau_n", s.tau_n);
  detail::read_opt(j, "tau_reps", s.tau_reps);
  detail::read_opt(j, "oracle_n", s.oracle_n);
  detail::read_opt(j, "mean_n", s.mean_n);
  detail::read_opt(j, "pool_size", s.pool_size);
  detail::read_opt(j, "pool_iters", s.pool_iters);
  return s;
}

/// Keys mirror the ExperimentConfig fields; "n" may be a number or a list.
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  detail::read_opt(j, "preset", c.preset);
  if (j.contains("params"))
    for (const auto& [k, v] : j.at("params").items()) c.params[k] = v.is_string() ? v.get<std::string>() : v.dump();
  detail::read_opt(j, "model_path", c.model_path);
  if (j.contains("n")) {
    const auto& n = j.at("n");
    c.n = n.is_array() ? n.get<std::vector<std::int64_t>>() : std::vector<std::int64_t>{n.get<std::int64_t>()};
  }
  detail::read_opt(j, "reps", c.reps);
  if (j.contains("c_grid"))
    for (const auto& v : j.at("c_grid"))
      c.c_grid.push_back(v.is_array() ? v.get<std::vector<double>>() : std::vector<double>{v.get<double>()});
  if (j.contains("l_grid"))
    for (const auto& v : j.at("l_grid"))
      c.l_grid.push_back(v.is_array() ? v.get<Level>() : Level{v.get<std::int64_t>()});
  detail::read_opt(j, "seed", c.seed);
  if (j.contains("pool")) {
    detail::read_opt(j.at("pool"), "M", c.pool_size);
    detail::read_opt(j.at("pool"), "K", c.pool_iters);
  }
  detail::read_opt(j, "format", c.format);
  detail::read_opt(j, "output", c.output);
  if (j.contains("thresholds")) c.thresholds = thresholds_from_json(j.at("thresholds"));
  if (j.contains("sizes")) c.sizes = sizes_from_json(j.at("sizes"));
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  try {
    return config_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw DomainError("malformed config " + path + ": " + e.what());
  }
}

/// Checks reps and that every grid point lies inside Lambda* with the
/// configured margin.
inline void validate_config(const WeightModel& model, const ExperimentConfig& cfg) {
  if (cfg.reps < 1) throw DomainError("reps must be >= 1");
  if (cfg.n.empty()) throw DomainError("config needs at least one n");
  for (auto n : cfg.n)
    if (n < 2) throw DomainError("n must be >= 2");
  if (!cfg.c_grid.empty() && !cfg.l_grid.empty()) throw DomainError("give either c_grid or l_grid, not both");
  if (cfg.format != "csv" && cfg.format != "json") throw DomainError("format must be csv or json");
  const double eps = cfg.thresholds.interior_margin;
  auto check_c = [&](const std::vector<double>& c) {
    if (static_cast<int>(c.size()) != model.d) throw DomainError("grid point dimension does not match the model");
    if (model.d == 1) {
      const auto dom = range_d1(model);
      if (!(c[0] > dom.c_low + eps && c[0] < dom.c_high - eps))
        throw DomainError("c=" + detail::num(c[0]) + " is not inside Lambda* = (" + detail::num(dom.c_low) + ", " +
                          detail::num(dom.c_high) + ") with margin " + detail::num(eps));
      return;
    }
    const auto theta = theta_of_c(model, c);
    if (!(lambda_tilde_margin(model, theta) > eps)) throw DomainError("grid point is not inside Lambda* with the required margin");
  };
  for (const auto& c : cfg.c_grid) check_c(c);
  for (const auto& l : cfg.l_grid) {
    if (static_cast<int>(l.size()) != model.d) throw DomainError("grid level dimension does not match the model");
    for (auto n : cfg.n) {
      std::vector<double> c;
      for (std::size_t i = 0; i < l.size(); ++i)
        c.push_back((model.b - 1.0) * static_cast<double>(l[i] - model.root_level()[i]) / std::log(static_cast<double>(n)));
      check_c(c);
    }
  }
}

struct GridPointResult {
  std::int64_t n = 0;
  std::vector<double> c;
  Level level;
  std::vector<double> theta;
  double log_a = 0.0;
  double mean = 0.0;
  double std = 0.0;
  double min = 0.0;
  double max = 0.0;
  double pool_mean = 1.0;
  double ks = 0.0;
  double boundary_margin = 0.0;
  bool mean_pass = false;
  bool ks_pass = false;

  friend bool operator==(const GridPointResult&, const GridPointResult&) = default;
};

struct TrendPoint {
  std::int64_t n = 0;
  double median_sup = 0.0;  // median over replications of max_c |ratio - pool mean|

  friend bool operator==(const TrendPoint&, const TrendPoint&) = default;
};

struct ConvergenceReport {
  std::string model;
  std::uint64_t seed = 0;
  int reps = 0;
  std::vector<GridPointResult> points;
  std::vector<TrendPoint> trend;
  bool trend_monotone = true;
  bool pass = true;

  friend bool operator==(const ConvergenceReport&, const ConvergenceReport&) = default;
};

namespace detail {

inline std::uint64_t pool_seed(std::uint64_t seed, std::size_t point) {
  return Stream(seed, {stream_tag("pool-seed"), point}).bits();
}

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto k = v.size() / 2;
  return v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

}  // namespace detail

/// Grows reps trees per n (replication r always uses stream(seed, r), so the
/// trees for increasing n are nested), divides U at each grid level by its
/// normalization and compares the ratios with a fixed-point pool.
inline ConvergenceReport run_convergence(const WeightModel& model, const ExperimentConfig& cfg) {
  validate_config(model, cfg);
  const auto& th = cfg.thresholds;
  ConvergenceReport report;
  report.model = model.name;
  report.seed = cfg.seed;
  report.reps = cfg.reps;

  std::vector<std::vector<double>> c_grid = cfg.c_grid;
  if (c_grid.empty() && cfg.l_grid.empty()) c_grid.push_back(spectral_point(model, std::vector<double>(model.d, 0.0)).gradA);
  const std::size_t points = cfg.l_grid.empty() ? c_grid.size() : cfg.l_grid.size();

  // One pool per grid point for c grids; l grids share theta only per n, so
  // their pools are drawn per (n, point).
  std::vector<SamplePool> c_pools;
  if (cfg.l_grid.empty())
    for (std::size_t g = 0; g < points; ++g)
      c_pools.push_back(fixpoint_iterate(model, theta_of_c(model, c_grid[g]), cfg.pool_size, cfg.pool_iters,
                                         detail::pool_seed(cfg.seed, g)));

  std::int64_t prev_n = 0;
  for (std::size_t ni = 0; ni < cfg.n.size(); ++ni) {
    const auto n = cfg.n[ni];
    std::vector<Normalization> norms;
    std::vector<const SamplePool*> pools;
    std::vector<SamplePool> l_pools;
    l_pools.reserve(points);
    for (std::size_t g = 0; g < points; ++g) {
      if (cfg.l_grid.empty()) {
        norms.push_back(a_c(model, n, c_grid[g]));
        pools.push_back(&c_pools[g]);
      } else {
        norms.push_back(a_bar(model, n, cfg.l_grid[g]));
        l_pools.push_back(fixpoint_iterate(model, norms.back().theta, cfg.pool_size, cfg.pool_iters,
                                           detail::pool_seed(cfg.seed, ni * points + g)));
        pools.push_back(&l_pools.back());
      }
    }

    std::vector<std::vector<double>> ratios(points, std::vector<double>(static_cast<std::size_t>(cfg.reps)));
    parallel_for(static_cast<std::size_t>(cfg.reps), [&](std::size_t r) {
      Stream rng(cfg.seed, {r});
      const auto prof = grow_profile(model, n, rng);
      for (std::size_t g = 0; g < points; ++g)
        ratios[g][r] = static_cast<double>(prof.at(norms[g].level)) * std::exp(-norms[g].log_value);
    });

    std::vector<double> sup(static_cast<std::size_t>(cfg.reps), 0.0);
    for (std::size_t g = 0; g < points; ++g) {
      GridPointResult pr;
      pr.n = n;
      if (cfg.l_grid.empty()) {
        pr.c = c_grid[g];
      } else {
        for (auto v : cfg.l_grid[g]) pr.c.push_back((model.b - 1.0) * static_cast<double>(v) / std::log(static_cast<double>(n)));
      }
      pr.level = norms[g].level;
      pr.theta = norms[g].theta;
      pr.log_a = norms[g].log_value;
      const auto& x = ratios[g];
      pr.mean = sample_mean(x);
      pr.std = std::sqrt(sample_variance(x));
      pr.min = *std::min_element(x.begin(), x.end());
      pr.max = *std::max_element(x.begin(), x.end());
      pr.pool_mean = pools[g]->mean;
      pr.ks = x.size() >= 2 ? ks_statistic(x, pools[g]->samples) : 1.0;
      pr.boundary_margin = pools[g]->boundary_margin;
      pr.mean_pass = std::abs(pr.mean - 1.0) < th.ratio_mean;
      pr.ks_pass = pr.ks < th.ratio_ks;
      report.pass = report.pass && pr.mean_pass;
      for (std::size_t r = 0; r < x.size(); ++r) sup[r] = std::max(sup[r], std::abs(x[r] - pr.pool_mean));
      report.points.push_back(std::move(pr));
    }
    if (n > prev_n) {
      report.trend.push_back({n, detail::median(sup)});
      if (report.trend.size() >= 2 && report.trend.back().median_sup > report.trend[report.trend.size() - 2].median_sup)
        report.trend_monotone = false;
    }
    prev_n = n;
  }
  return report;
}

inline ConvergenceReport run_convergence(const ExperimentConfig& cfg) { return run_convergence(config_model(cfg), cfg); }

struct Gate {
  std::string name;
  bool hard = true;
  bool pass = false;
  double statistic = 0.0;
  double threshold = 0.0;
  std::string detail;

  friend bool operator==(const Gate&, const Gate&) = default;
};

struct IdentityReport {
  std::string model;
  std::uint64_t seed = 0;
  std::vector<Gate> gates;
  bool pass = true;  // every hard gate passed

  friend bool operator==(const IdentityReport&, const IdentityReport&) = default;
};

/// Three admissible tilts per model, clustered near theta = 0 where the
/// limit W_infinity(theta) has small variance.
inline std::vector<std::vector<double>> interior_thetas(const WeightModel& model) {
  std::vector<std::vector<double>> out;
  if (model.d == 1) {
    const auto dom = range_d1(model);
    const double lo = std::max(dom.theta_low, -1.0), hi = std::min(dom.theta_high, 1.0);
    for (double t : {-0.15, 0.1, 0.2}) out.push_back({t < 0 ? -t * lo : t * hi});
    return out;
  }
  for (double t : {-0.1, 0.05, 0.1}) {
    std::vector<double> theta(static_cast<std::size_t>(model.d), t);
    while (!in_lambda_tilde(model, theta))
      for (auto& v : theta) v *= 0.5;
    out.push_back(std::move(theta));
  }
  return out;
}

namespace detail {

inline Gate make_gate(std::string name, bool hard, bool pass, double statistic, double threshold, std::string note = {}) {
  return {std::move(name), hard, pass, statistic, threshold, std::move(note)};
}

/// Largest n <= wanted for which history enumeration fits under the cap.
inline std::int64_t feasible_oracle_n(const WeightModel& model, std::int64_t wanted) {
  for (std::int64_t n = wanted; n > 0; --n) {
    try {
      check_history_cap(model, n, kDefaultHistoryCap);
      return n;
    } catch (const ResourceError&) {
    }
  }
  return 0;
}

inline std::vector<LambdaPoint> real_grid(const WeightModel& model) {
  std::vector<LambdaPoint> out;
  for (auto& t : lambda_grid_3(model.d)) out.push_back(LambdaPoint::real(t));
  return out;
}

}  // namespace detail

/// Runs each module's invariant checks at the configured sizes. A model that
/// fails validation yields a single failing validation gate.
inline IdentityReport run_identity_suite(const WeightModel& model, const ExperimentConfig& cfg) {
  const auto& th = cfg.thresholds;
  const auto& sz = cfg.sizes;
  IdentityReport rep;
  rep.model = model.name;
  rep.seed = cfg.seed;
  auto add = [&rep](Gate g) {
    if (g.hard && !g.pass) rep.pass = false;
    rep.gates.push_back(std::move(g));
  };

  const auto vr = validate(model);
  std::string issues;
  for (const auto& s : vr.issues) issues += (issues.empty() ? "" : "; ") + s;
  add(detail::make_gate("validation", true, vr.ok(), static_cast<double>(vr.issues.size()), 0.0, issues));
  if (!vr.ok()) return rep;

  const int b = model.b;
  const auto grid = detail::real_grid(model);
  const double a = b - 1.0;

  // Leaf count, W_n(0) = 1 and the bridge W^(tau_n) = H_n W_n, per replication.
  {
    std::uint64_t bad_mass = 0;
    double w0 = 0.0, bridge = 0.0;
    auto lambdas = grid;
    LambdaPoint cx = LambdaPoint::real(std::vector<double>(static_cast<std::size_t>(model.d), 0.2));
    cx.eta.assign(static_cast<std::size_t>(model.d), 0.7);
    lambdas.push_back(cx);
    for (int r = 0; r < sz.grow_reps; ++r) {
      Stream rng(cfg.seed, {stream_tag("grow"), static_cast<std::uint64_t>(r)});
      const auto prof = grow_profile(model, sz.grow_n, rng);
      if (prof.mass() != static_cast<std::uint64_t>(a * static_cast<double>(sz.grow_n) + 1.0)) ++bad_mass;
      w0 = std::max(w0, std::abs(w_n(prof, model, LambdaPoint::real(std::vector<double>(static_cast<std::size_t>(model.d), 0.0))) - 1.0));
      Stream trng(cfg.seed, {stream_tag("bridge-tau"), static_cast<std::uint64_t>(r)});
      const double tau = sample_tau(b, sz.grow_n, trng);
      for (const auto& l : lambdas) {
        const cplx lhs = w_continuous(prof, tau, model, l);
        const cplx rhs = h_n(model, l, tau, sz.grow_n) * w_n(prof, model, l);
        bridge = std::max(bridge, std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
      }
    }
    add(detail::make_gate("leaf_count", true, bad_mass == 0, static_cast<double>(bad_mass), 0.0));
    add(detail::make_gate("w_n_at_zero", true, w0 < th.identity, w0, th.identity));
    add(detail::make_gate("bridge", true, bridge < th.identity, bridge, th.identity, "relative, incl. one complex lambda"));
  }

  // C_n(lambda) E e^{(1-m) tau_n} = 1.
  {
    double worst = 0.0;
    for (const auto& l : grid) {
      const double m = m_exponent(model, l).real();
      const auto c = c_n(model, l, sz.product_n);
      const auto t = expected_tau_transform(b, 1.0 - m, sz.product_n);
      worst = std::max(worst, std::abs(c.value.real() * std::exp(c.log_scale) * t.exact - 1.0));
    }
    add(detail::make_gate("expected_h_n", true, worst < th.product, worst, th.product));
  }

  // C_n against its Gamma-function asymptotics at z in {1/2, 1, 2}.
  {
    double worst = 0.0;
    for (double z : {0.5, 1.0, 2.0}) {
      const std::vector<double> theta(static_cast<std::size_t>(model.d), -std::log(z));
      const auto c = c_n(model, LambdaPoint::real(theta), sz.asymptotic_n);
      const double ratio = std::exp(c.log_scale - std::log(c_n_asymptotic(model, theta, sz.asymptotic_n))) * c.value.real();
      worst = std::max(worst, std::abs(ratio - 1.0));
    }
    add(detail::make_gate("c_n_asymptotic", true, worst < th.c_n_asymptotic, worst, th.c_n_asymptotic));
  }

  // (b-1) n e^{-(b-1) tau_n} against its Gamma limit, and H_n against its limit.
  {
    Stream rng(cfg.seed, {stream_tag("gamma")});
    std::vector<double> taus;
    for (int r = 0; r < sz.gamma_reps; ++r) taus.push_back(sample_tau(b, sz.gamma_n, rng));
    std::vector<double> y;
    for (double t : taus) y.push_back(a * static_cast<double>(sz.gamma_n) * std::exp(-a * t));
    const double d = ks_statistic(y, [a](double x) { return gamma_cdf(x, 1.0 / a, 1.0 / a); });
    const double p = ks_pvalue(d, static_cast<double>(y.size()));
    add(detail::make_gate("gamma_limit_ks", true, p > th.ks_alpha, p, th.ks_alpha, "p-value, KS=" + detail::num(d)));

    Stream yrng(cfg.seed, {stream_tag("gamma-draws")});
    double worst_p = 1.0;
    for (const auto& l : grid) {
      if (l.theta == std::vector<double>(static_cast<std::size_t>(model.d), 0.0)) continue;
      std::vector<double> hs, limit;
      for (double t : taus) hs.push_back(h_n(model, l, t, sz.gamma_n).real());
      for (int r = 0; r < sz.gamma_reps; ++r) limit.push_back(h_limit(model, l.theta, yrng.gamma(1.0 / a) * a));
      const double dd = ks_statistic(hs, limit);
      const double ne = static_cast<double>(hs.size()) * static_cast<double>(limit.size()) / static_cast<double>(hs.size() + limit.size());
      worst_p = std::min(worst_p, ks_pvalue(dd, ne));
    }
    add(detail::make_gate("h_n_limit_ks", true, worst_p > th.ks_alpha, worst_p, th.ks_alpha, "smallest p-value over the grid"));
  }

  // First subtree share against Beta(1/(b-1), 1).
  {
    std::vector<double> u(static_cast<std::size_t>(sz.dirichlet_reps));
    parallel_for(u.size(), [&](std::size_t r) {
      Stream rng(cfg.seed, {stream_tag("dirichlet"), r});
      u[r] = subtree_fractions(grow(model, sz.dirichlet_n, rng).tree)[0];
    });
    const double d = ks_statistic(u, [a](double x) { return beta_cdf(x, 1.0 / a, 1.0); });
    const double p = ks_pvalue(d, static_cast<double>(u.size()));
    add(detail::make_gate("dirichlet_ks", true, p > th.ks_alpha, p, th.ks_alpha, "p-value, KS=" + detail::num(d)));
  }

  // Monte Carlo E e^{s tau_n} against the exact product, s = -1.
  {
    Stream rng(cfg.seed, {stream_tag("tau")});
    std::vector<double> v;
    for (int r = 0; r < sz.tau_reps; ++r) v.push_back(std::exp(-sample_tau(b, sz.tau_n, rng)));
    const auto t = expected_tau_transform(b, -1.0, sz.tau_n);
    const double se = std::sqrt(sample_variance(v) / static_cast<double>(v.size()));
    const double z = std::abs(sample_mean(v) - t.exact) / se;
    add(detail::make_gate("tau_transform", true, z < th.mc_sigmas, z, th.mc_sigmas,
                          "standard errors; asymptotic/exact=" + detail::num(t.asymptotic / t.exact)));
  }

  // Exact oracles.
  {
    const auto n = detail::feasible_oracle_n(model, sz.oracle_n);
    const double dev = conditional_martingale_check(model, n, lambda_grid_3(model.d));
    add(detail::make_gate("oracle_martingale", true, dev < th.martingale, dev, th.martingale, "n=" + std::to_string(n)));

    const auto hist = enumerate_histories(model, n);
    std::map<Level, long double> from_hist;
    for (const auto& e : hist.entries)
      for (const auto& [l, c] : e.profile.counts) from_hist[l] += e.probability * static_cast<long double>(c);
    const auto mean = exact_mean_profile(model, n);
    double worst = 0.0;
    for (const auto& [l, v] : from_hist) {
      auto it = mean.find(l);
      worst = std::max(worst, static_cast<double>(std::abs(v - (it == mean.end() ? 0.0L : it->second))));
    }
    add(detail::make_gate("enumeration_mean", true, worst < th.martingale, worst, th.martingale));
  }

  // E W_n(theta) = 1 via the exact mean profile.
  {
    double worst = 0.0;
    const auto mean = exact_mean_profile(model, sz.mean_n);
    for (const auto& l : grid) {
      long double s = 0.0L;
      const double base = dot(l.theta, model.root_level());
      for (const auto& [lv, v] : mean)
        s += static_cast<long double>(v) * std::exp(-static_cast<long double>(dot(l.theta, lv) - base));
      const auto c = c_n(model, l, sz.mean_n);
      worst = std::max(worst, static_cast<double>(std::abs(s / (std::exp(static_cast<long double>(c.log_scale)) * c.value.real()) - 1.0L)));
    }
    add(detail::make_gate("mean_martingale", true, worst < th.mean_martingale, worst, th.mean_martingale,
                          "n=" + std::to_string(sz.mean_n)));
  }

  // Admissible region.
  if (model.d == 1) {
    const auto dom = range_d1(model);
    const double res = std::max(std::abs(range_function(model, dom.z1)), dom.z0 > 0.0 ? std::abs(range_function(model, dom.z0)) : 0.0);
    const bool ok = dom.z0 < 1.0 && 1.0 < dom.z1 && dom.c_low < dom.c_high && res < 1e-9;
    add(detail::make_gate("range", true, ok, res, 1e-9, "z0=" + detail::num(dom.z0) + " z1=" + detail::num(dom.z1)));
  } else {
    const double margin = lambda_tilde_margin(model, std::vector<double>(static_cast<std::size_t>(model.d), 0.0));
    add(detail::make_gate("range", true, margin > 0.0 && is_nondegenerate(model), margin, 0.0, "margin at theta=0"));
  }

  // Fixed point: exact at theta = 0, mean one at interior tilts.
  {
    const auto zero = fixpoint_iterate(model, std::vector<double>(static_cast<std::size_t>(model.d), 0.0), sz.pool_size,
                                       sz.pool_iters, detail::pool_seed(cfg.seed, 0));
    double dev = 0.0;
    for (double w : zero.samples) dev = std::max(dev, std::abs(w - 1.0));
    add(detail::make_gate("fixpoint_unit", true, dev < th.pool_unit, dev, th.pool_unit));
    std::size_t k = 1;
    for (const auto& theta : interior_thetas(model)) {
      const auto pool = fixpoint_iterate(model, theta, sz.pool_size, sz.pool_iters, detail::pool_seed(cfg.seed, k++));
      const double se = std::sqrt(pool.variance / static_cast<double>(pool.samples.size()) * sz.pool_iters);
      add(detail::make_gate("fixpoint_mean", false, std::abs(pool.mean - 1.0) < std::max(th.pool_mean, th.mc_sigmas * se),
                            std::abs(pool.mean - 1.0), std::max(th.pool_mean, th.mc_sigmas * se),
                            "theta=" + detail::num(theta[0]) + " ks=" + detail::num(pool.ks_to_previous)));
    }
  }
  return rep;
}

inline IdentityReport run_identity_suite(const ExperimentConfig& cfg) { return run_identity_suite(config_model(cfg), cfg); }

// ---- serialization ---------------------------------------------------------

inline nlohmann::json to_json(const GridPointResult& p) {
  return {{"n", p.n},       {"c", p.c},         {"level", p.level},       {"theta", p.theta},
          {"log_A", p.log_a}, {"mean", p.mean},  {"std", p.std},           {"min", p.min},
          {"max", p.max},   {"pool_mean", p.pool_mean}, {"ks", p.ks},     {"boundary_margin", p.boundary_margin},
          {"mean_pass", p.mean_pass}, {"ks_pass", p.ks_pass}};
}

inline nlohmann::json to_json(const ConvergenceReport& r) {
  nlohmann::json pts = nlohmann::json::array(), trend = nlohmann::json::array();
  for (const auto& p : r.points) pts.push_back(to_json(p));
  for (const auto& t : r.trend) trend.push_back({{"n", t.n}, {"median_sup", t.median_sup}});
  return {{"model", r.model}, {"seed", r.seed},   {"reps", r.reps},           {"points", pts},
          {"trend", trend},   {"trend_monotone", r.trend_monotone}, {"pass", r.pass}};
}

inline ConvergenceReport convergence_from_json(const nlohmann::json& j) {
  ConvergenceReport r;
  r.model = j.at("model").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.reps = j.at("reps").get<int>();
  for (const auto& p : j.at("points")) {
    GridPointResult g;
    g.n = p.at("n").get<std::int64_t>();
    g.c = p.at("c").get<std::vector<double>>();
    g.level = p.at("level").get<Level>();
    g.theta = p.at("theta").get<std::vector<double>>();
    g.log_a = p.at("log_A").get<double>();
    g.mean = p.at("mean").get<double>();
    g.std = p.at("std").get<double>();
    g.min = p.at("min").get<double>();
    g.max = p.at("max").get<double>();
    g.pool_mean = p.at("pool_mean").get<double>();
    g.ks = p.at("ks").get<double>();
    g.boundary_margin = p.at("boundary_margin").get<double>();
    g.mean_pass = p.at("mean_pass").get<bool>();
    g.ks_pass = p.at("ks_pass").get<bool>();
    r.points.push_back(std::move(g));
  }
  for (const auto& t : j.at("trend")) r.trend.push_back({t.at("n").get<std::int64_t>(), t.at("median_sup").get<double>()});
  r.trend_monotone = j.at("trend_monotone").get<bool>();
  r.pass = j.at("pass").get<bool>();
  return r;
}

inline nlohmann::json to_json(const IdentityReport& r) {
  nlohmann::json gates = nlohmann::json::array();
  for (const auto& g : r.gates)
    gates.push_back({{"name", g.name},           {"hard", g.hard},           {"pass", g.pass},
                     {"statistic", g.statistic}, {"threshold", g.threshold}, {"detail", g.detail}});
  return {{"model", r.model}, {"seed", r.seed}, {"gates", gates}, {"pass", r.pass}};
}

inline IdentityReport identity_from_json(const nlohmann::json& j) {
  IdentityReport r;
  r.model = j.at("model").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& g : j.at("gates"))
    r.gates.push_back({g.at("name").get<std::string>(), g.at("hard").get<bool>(), g.at("pass").get<bool>(),
                       g.at("statistic").get<double>(), g.at("threshold").get<double>(), g.at("detail").get<std::string>()});
  r.pass = j.at("pass").get<bool>();
  return r;
}

namespace detail {

inline std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ";" : "") + detail::num(v[i]);
  return s;
}

inline std::string join(const Level& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ";" : "") + std::to_string(v[i]);
  return s;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return out + "\"";
}

}  // namespace detail

/// One row per (n, grid point); vector fields are ';'-separated.
inline std::string to_csv(const ConvergenceReport& r) {
  std::ostringstream os;
  os << "n,c,level,theta,log_A,mean,std,min,max,pool_mean,ks,boundary_margin,mean_pass,ks_pass\n";
  for (const auto& p : r.points)
    os << p.n << ',' << detail::join(p.c) << ',' << detail::join(p.level) << ',' << detail::join(p.theta) << ','
       << detail::num(p.log_a) << ',' << detail::num(p.mean) << ',' << detail::num(p.std) << ',' << detail::num(p.min) << ','
       << detail::num(p.max) << ',' << detail::num(p.pool_mean) << ',' << detail::num(p.ks) << ',' << detail::num(p.boundary_margin)
       << ',' << (p.mean_pass ? 1 : 0) << ',' << (p.ks_pass ? 1 : 0) << '\n';
  return os.str();
}

inline std::string to_csv(const IdentityReport& r) {
  std::ostringstream os;
  os << "gate,hard,pass,statistic,threshold,detail\n";
  for (const auto& g : r.gates)
    os << g.name << ',' << (g.hard ? 1 : 0) << ',' << (g.pass ? 1 : 0) << ',' << detail::num(g.statistic) << ','
       << detail::num(g.threshold) << ',' << detail::csv_field(g.detail) << '\n';
  return os.str();
}

namespace detail {

inline void write_text(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::fwrite(text.data(), 1, text.size(), stdout);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write report to " + path);
  out << text;
  if (!out) throw std::runtime_error("I/O error while writing " + path);
}

}  // namespace detail

/// Writes the report as "csv" or "json" to path ("" or "-" for stdout).
template <typename Report>
void emit_report(const Report& report, const std::string& format, const std::string& path) {
  if (format == "json")
    detail::write_text(to_json(report).dump(2) + "\n", path);
  else if (format == "csv")
    detail::write_text(to_csv(report), path);
  else
    throw DomainError("unknown report format " + format);
}

}  // namespace profilelab
