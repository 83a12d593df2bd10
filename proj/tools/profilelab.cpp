// profilelab command line front end.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "profilelab/profilelab.hpp"

namespace pl = profilelab;
using nlohmann::json;

namespace {

constexpr int kPass = 0;
constexpr int kGateFailed = 1;
constexpr int kUsage = 2;

struct ModelArgs {
  std::string preset;
  std::vector<std::string> params;
  std::string model_path;

  void attach(CLI::App* cmd) {
    auto* p = cmd->add_option("--preset", preset, "Preset name")->check(CLI::IsMember(pl::preset_names()));
    cmd->add_option("--param", params, "Preset parameter k=v (repeatable)");
    auto* m = cmd->add_option("--model", model_path, "Custom model JSON")->check(CLI::ExistingFile);
    p->excludes(m);
  }

  pl::ParamMap param_map() const {
    pl::ParamMap out;
    for (const auto& kv : params) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos || eq == 0) throw pl::DomainError("--param expects k=v, got '" + kv + "'");
      out[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    return out;
  }

  pl::WeightModel model() const {
    if (!model_path.empty()) return pl::load_model(model_path);
    if (preset.empty()) throw pl::DomainError("give --preset or --model");
    return pl::preset(preset, param_map());
  }
};

std::vector<double> parse_reals(const std::string& text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = std::min(text.find(',', start), text.size());
    const auto tok = text.substr(start, end - start);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (tok.empty() || used != tok.size()) throw pl::DomainError("not a number: '" + tok + "'");
    out.push_back(v);
    start = end + 1;
  }
  return out;
}

/// Groups a flat list into points of dimension d.
template <typename T>
std::vector<std::vector<T>> group(const std::vector<T>& flat, int d) {
  if (flat.size() % static_cast<std::size_t>(d) != 0)
    throw pl::DomainError("expected a multiple of d=" + std::to_string(d) + " values");
  std::vector<std::vector<T>> out;
  for (std::size_t i = 0; i < flat.size(); i += static_cast<std::size_t>(d))
    out.emplace_back(flat.begin() + static_cast<std::ptrdiff_t>(i), flat.begin() + static_cast<std::ptrdiff_t>(i) + d);
  return out;
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ";" : "") + pl::detail::num(v[i]);
  return s;
}

std::string join(const pl::Level& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ";" : "") + std::to_string(v[i]);
  return s;
}

void write_json(const json& j, const std::string& path) { pl::detail::write_text(j.dump(2) + "\n", path); }

json nullable(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation and verification of profiles of random weighted b-ary trees"};
  app.require_subcommand(1);

  ModelArgs grow_m;
  std::int64_t grow_n = 0;
  std::uint64_t grow_seed = 0;
  std::string grow_trace, grow_out, grow_format = "csv";
  auto* grow = app.add_subcommand("grow", "Grow one tree and print its profile");
  grow_m.attach(grow);
  grow->add_option("--nodes", grow_n, "Number of internal nodes n")->required()->check(CLI::NonNegativeNumber);
  grow->add_option("--seed", grow_seed, "Random seed")->required();
  grow->add_option("--trace", grow_trace, "Write the growth trace as JSON");
  grow->add_option("--out", grow_out, "Output path (default stdout)");
  grow->add_option("--format", grow_format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

  ModelArgs range_m;
  auto* range = app.add_subcommand("range", "Admissible range of a d = 1 model");
  range_m.attach(range);

  ModelArgs norm_m;
  std::int64_t norm_n = 0;
  std::string norm_c, norm_l;
  auto* normalize = app.add_subcommand("normalize", "Normalizing constants A_c(n) or A-bar(n, l)");
  norm_m.attach(normalize);
  normalize->add_option("--nodes", norm_n, "n")->required();
  auto* oc = normalize->add_option("--c", norm_c, "Comma-separated c values (d per point)");
  auto* ol = normalize->add_option("--l", norm_l, "Comma-separated levels (d per point)");
  oc->excludes(ol);

  ModelArgs fix_m;
  std::string fix_theta, fix_samples;
  std::size_t fix_pool = 100000;
  int fix_iters = 30;
  std::uint64_t fix_seed = 0;
  auto* fixpoint = app.add_subcommand("fixpoint", "Population dynamics for the limit W(theta)");
  fix_m.attach(fixpoint);
  fixpoint->add_option("--theta", fix_theta, "theta (comma-separated for d > 1)")->required();
  fixpoint->add_option("--pool", fix_pool, "Pool size M")->required();
  fixpoint->add_option("--iters", fix_iters, "Iterations K")->required();
  fixpoint->add_option("--seed", fix_seed, "Random seed")->required();
  fixpoint->add_option("--samples", fix_samples, "Write the final pool as CSV");

  ModelArgs or_m;
  std::int64_t or_n = 0;
  bool or_check = false;
  auto* oracle = app.add_subcommand("oracle", "Exact mean profile or exact martingale check");
  or_m.attach(oracle);
  oracle->add_option("--nodes", or_n, "n")->required()->check(CLI::NonNegativeNumber);
  oracle->add_flag("--martingale-check", or_check, "Report the largest conditional martingale deviation");

  ModelArgs ver_m;
  std::string ver_suite = "all", ver_config, ver_out, ver_format;
  std::uint64_t ver_seed = 0;
  auto* verify = app.add_subcommand("verify", "Run the identity and convergence suites");
  ver_m.attach(verify);
  verify->add_option("--suite", ver_suite, "identity, convergence or all")->check(CLI::IsMember({"identity", "convergence", "all"}));
  auto* vs = verify->add_option("--seed", ver_seed, "Random seed");
  verify->add_option("--config", ver_config, "ExperimentConfig JSON")->check(CLI::ExistingFile);
  verify->add_option("--out", ver_out, "Output path (default stdout)");
  verify->add_option("--format", ver_format, "json or csv")->check(CLI::IsMember({"csv", "json"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kPass : kUsage;
  }

  try {
    if (*grow) {
      const auto model = grow_m.model();
      pl::Stream rng(grow_seed);
      pl::GrowOptions opts;
      opts.record_trace = !grow_trace.empty();
      const auto res = pl::grow(model, grow_n, rng, opts);
      if (res.trace) write_json(pl::trace_to_json(*res.trace), grow_trace);
      const auto prof = pl::profile(res.tree);
      if (grow_format == "json")
        write_json(pl::profile_to_json(prof), grow_out);
      else
        pl::detail::write_text(pl::profile_to_csv(prof), grow_out);
      return kPass;
    }

    if (*range) {
      const auto model = range_m.model();
      const auto dom = pl::range_d1(model);
      json j{{"z0", dom.z0},
             {"z1", dom.z1},
             {"lambda_star", {dom.c_low, dom.c_high}},
             {"theta_interval", {dom.theta_low, nullable(dom.theta_high)}}};
      write_json(j, "");
      return kPass;
    }

    if (*normalize) {
      const auto model = norm_m.model();
      std::string out;
      if (!norm_c.empty()) {
        out = "c,theta,l_n,log_A_c\n";
        for (const auto& c : group(parse_reals(norm_c), model.d)) {
          const auto a = pl::a_c(model, norm_n, c);
          out += join(c) + "," + join(a.theta) + "," + join(a.level) + "," + pl::detail::num(a.log_value) + "\n";
        }
      } else if (!norm_l.empty()) {
        std::vector<std::int64_t> flat;
        for (double v : parse_reals(norm_l)) {
          if (v != std::floor(v)) throw pl::DomainError("levels must be integers");
          flat.push_back(static_cast<std::int64_t>(v));
        }
        out = "l,theta,log_A_bar\n";
        for (const auto& l : group(flat, model.d)) {
          const auto a = pl::a_bar(model, norm_n, l);
          out += join(l) + "," + join(a.theta) + "," + pl::detail::num(a.log_value) + "\n";
        }
      } else {
        throw pl::DomainError("normalize needs --c or --l");
      }
      pl::detail::write_text(out, "");
      return kPass;
    }

    if (*fixpoint) {
      const auto model = fix_m.model();
      const auto theta = parse_reals(fix_theta);
      if (static_cast<int>(theta.size()) != model.d) throw pl::DomainError("theta must have d components");
      const auto pool = pl::fixpoint_iterate(model, theta, fix_pool, fix_iters, fix_seed);
      if (!fix_samples.empty()) {
        std::string csv = "w\n";
        for (double w : pool.samples) csv += pl::detail::num(w) + "\n";
        pl::detail::write_text(csv, fix_samples);
      }
      json j{{"theta", theta},
             {"mean", pool.mean},
             {"var", pool.variance},
             {"ks", pool.ks_to_previous},
             {"divergent", pool.divergent},
             {"samples_path", fix_samples.empty() ? json(nullptr) : json(fix_samples)}};
      write_json(j, "");
      return kPass;
    }

    if (*oracle) {
      const auto model = or_m.model();
      if (or_check) {
        const double dev = pl::conditional_martingale_check(model, or_n, pl::lambda_grid_3(model.d));
        write_json({{"n", or_n}, {"max_deviation", dev}, {"pass", dev < 1e-12}}, "");
        return dev < 1e-12 ? kPass : kGateFailed;
      }
      std::string csv;
      for (int k = 1; k <= model.d; ++k) csv += "l_" + std::to_string(k) + ",";
      csv += "mean\n";
      for (const auto& [l, v] : pl::exact_mean_profile(model, or_n)) {
        for (auto x : l) csv += std::to_string(x) + ",";
        csv += pl::detail::num(v) + "\n";
      }
      pl::detail::write_text(csv, "");
      return kPass;
    }

    if (*verify) {
      pl::ExperimentConfig cfg = ver_config.empty() ? pl::ExperimentConfig{} : pl::load_config(ver_config);
      if (!ver_m.preset.empty()) {
        cfg.preset = ver_m.preset;
        cfg.params = ver_m.param_map();
        cfg.model_path.clear();
      }
      if (!ver_m.model_path.empty()) cfg.model_path = ver_m.model_path;
      if (vs->count() > 0) cfg.seed = ver_seed;
      if (!ver_format.empty()) cfg.format = ver_format;
      if (!ver_out.empty()) cfg.output = ver_out;
      const auto model = pl::config_model(cfg);

      bool pass = true;
      json j{{"seed", cfg.seed}, {"model", model.name}, {"thresholds", pl::thresholds_to_json(cfg.thresholds)}};
      std::string csv;
      if (ver_suite == "identity" || ver_suite == "all") {
        const auto rep = pl::run_identity_suite(model, cfg);
        pass = pass && rep.pass;
        j["identity"] = pl::to_json(rep);
        csv += pl::to_csv(rep);
      }
      if ((ver_suite == "convergence" || ver_suite == "all") && pass) {
        const auto rep = pl::run_convergence(model, cfg);
        pass = pass && rep.pass;
        j["convergence"] = pl::to_json(rep);
        csv += (csv.empty() ? "" : "\n") + pl::to_csv(rep);
      }
      j["pass"] = pass;
      if (cfg.format == "csv")
        pl::detail::write_text(csv, cfg.output);
      else
        write_json(j, cfg.output);
      return pass ? kPass : kGateFailed;
    }
  } catch (const std::exception& e) {
    std::cerr << "profilelab: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
