#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "profilelab/errors.hpp"
#include "profilelab/random.hpp"
#include "profilelab/rational.hpp"

namespace profilelab {

/// A point of the integer lattice Z^d (a weight or a weighted level).
using Level = std::vector<std::int64_t>;

inline Level operator+(Level a, const Level& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

inline double dot(const std::vector<double>& theta, const Level& l) {
  double s = 0.0;
  for (std::size_t i = 0; i < l.size(); ++i) s += theta[i] * static_cast<double>(l[i]);
  return s;
}

/// One outcome of the joint edge-weight law: the b-tuple (Z_1, ..., Z_b).
struct Atom {
  double p = 0.0;
  std::optional<Rational> exact_p;  // set when the probability is known exactly
  std::vector<Level> weights;       // size b, each of size d
};

/// Joint law of the b edge weights below a node. Treated as immutable once
/// built; every formula of the toolkit reads the model through marginal().
struct WeightModel {
  int b = 2;
  int d = 1;
  std::vector<Atom> atoms;
  std::string name = "custom";
  Level root_shift;  // empty means zero

  Level root_level() const { return root_shift.empty() ? Level(static_cast<std::size_t>(d), 0) : root_shift; }

  bool exact() const {
    return std::all_of(atoms.begin(), atoms.end(), [](const Atom& a) { return a.exact_p.has_value(); });
  }
};

struct MarginalAtom {
  Level value;
  double p = 0.0;
  std::optional<Rational> exact_p;
};

/// Law of a single edge weight Z. Atoms are sorted by value and distinct.
struct MarginalLaw {
  std::vector<MarginalAtom> atoms;

  double prob(const Level& v) const {
    for (const auto& a : atoms)
      if (a.value == v) return a.p;
    return 0.0;
  }
};

struct ValidationReport {
  std::vector<std::string> issues;
  bool ok() const { return issues.empty(); }
};

namespace detail {

inline MarginalLaw marginal_of_coordinate(const WeightModel& model, int j) {
  std::map<Level, MarginalAtom> acc;
  bool exact = model.exact();
  for (const auto& atom : model.atoms) {
    if (static_cast<int>(atom.weights.size()) <= j) continue;
    auto& slot = acc[atom.weights[static_cast<std::size_t>(j)]];
    slot.value = atom.weights[static_cast<std::size_t>(j)];
    slot.p += atom.p;
    if (exact) slot.exact_p = slot.exact_p.value_or(Rational(0)) + *atom.exact_p;
  }
  MarginalLaw law;
  for (auto& [_, a] : acc) {
    if (a.exact_p) a.p = a.exact_p->to_double();
    law.atoms.push_back(a);
  }
  return law;
}

inline bool same_law(const MarginalLaw& x, const MarginalLaw& y) {
  if (x.atoms.size() != y.atoms.size()) return false;
  for (std::size_t i = 0; i < x.atoms.size(); ++i) {
    if (x.atoms[i].value != y.atoms[i].value) return false;
    if (std::abs(x.atoms[i].p - y.atoms[i].p) > 1e-12) return false;
  }
  return true;
}

inline std::string fmt_real(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

}  // namespace detail

/// Lists every violated model assumption; an empty report means the model is
/// well-formed. Never throws.
inline ValidationReport validate(const WeightModel& model) {
  ValidationReport r;
  if (model.b < 2) r.issues.push_back("branch factor b=" + std::to_string(model.b) + " < 2");
  if (model.d < 1) r.issues.push_back("lattice dimension d=" + std::to_string(model.d) + " < 1");
  if (model.atoms.empty()) r.issues.push_back("no atoms");
  if (!model.root_shift.empty() && static_cast<int>(model.root_shift.size()) != model.d)
    r.issues.push_back("root_shift has dimension " + std::to_string(model.root_shift.size()));
  if (!r.ok()) return r;

  double mass = 0.0;
  bool shapes_ok = true;
  for (std::size_t i = 0; i < model.atoms.size(); ++i) {
    const auto& a = model.atoms[i];
    if (!(a.p > 0.0 && a.p <= 1.0))
      r.issues.push_back("atom " + std::to_string(i) + " probability " + detail::fmt_real(a.p) + " outside (0,1]");
    mass += a.p;
    if (static_cast<int>(a.weights.size()) != model.b) {
      r.issues.push_back("atom " + std::to_string(i) + " has " + std::to_string(a.weights.size()) +
                         " weights, expected b=" + std::to_string(model.b));
      shapes_ok = false;
      continue;
    }
    for (const auto& w : a.weights) {
      if (static_cast<int>(w.size()) != model.d) {
        r.issues.push_back("atom " + std::to_string(i) + " has a weight of dimension " + std::to_string(w.size()));
        shapes_ok = false;
        break;
      }
    }
  }
  bool exact_mass_ok = false;
  if (model.exact()) {
    Rational total(0);
    for (const auto& a : model.atoms) total += *a.exact_p;
    exact_mass_ok = total == Rational(1);
  }
  if (!exact_mass_ok && std::abs(mass - 1.0) > 1e-12)
    r.issues.push_back("probability mass " + detail::fmt_real(mass) + " ≠ 1");
  if (shapes_ok) {
    auto first = detail::marginal_of_coordinate(model, 0);
    for (int j = 1; j < model.b; ++j) {
      if (!detail::same_law(first, detail::marginal_of_coordinate(model, j))) {
        r.issues.push_back("marginals differ (Z_1 vs Z_" + std::to_string(j + 1) + ")");
        break;
      }
    }
  }
  return r;
}

/// The common law of every Z_j.
inline MarginalLaw marginal(const WeightModel& model) {
  auto report = validate(model);
  if (!report.ok()) throw DomainError("invalid weight model: " + report.issues.front());
  return detail::marginal_of_coordinate(model, 0);
}

/// Index of one atom drawn with its probability.
inline std::size_t sample_atom(const WeightModel& model, Stream& rng) {
  if (model.atoms.size() == 1) return 0;
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < model.atoms.size(); ++i) {
    acc += model.atoms[i].p;
    if (u < acc) return i;
  }
  return model.atoms.size() - 1;
}

inline const std::vector<Level>& sample_weights(const WeightModel& model, Stream& rng) {
  return model.atoms[sample_atom(model, rng)].weights;
}

using ParamMap = std::map<std::string, std::string>;

/// Bit-exact preset names accepted by preset().
inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"bst",   "rrt",     "port",     "lopsided", "lmr",
                                                 "colored", "webgraph", "dirchange", "combo2d"};
  return names;
}

namespace detail {

inline Atom make_atom(Rational p, std::vector<Level> w) {
  Atom a;
  a.exact_p = p;
  a.p = p.to_double();
  a.weights = std::move(w);
  return a;
}

inline std::vector<Level> scalar_weights(const std::vector<std::int64_t>& w) {
  std::vector<Level> out;
  for (auto v : w) out.push_back(Level{v});
  return out;
}

/// The b cyclic rotations of `base`, each with probability 1/b. Every
/// coordinate then has the uniform law over the entries of `base`.
inline std::vector<Atom> cyclic_atoms(const std::vector<std::int64_t>& base) {
  const auto b = static_cast<std::int64_t>(base.size());
  std::vector<Atom> atoms;
  for (std::int64_t s = 0; s < b; ++s) {
    std::vector<std::int64_t> w(base.size());
    for (std::int64_t j = 0; j < b; ++j) w[static_cast<std::size_t>(j)] = base[static_cast<std::size_t>((j + s) % b)];
    atoms.push_back(make_atom(Rational(1, b), scalar_weights(w)));
  }
  return atoms;
}

inline std::string param_or(const ParamMap& params, const std::string& key, const std::string& fallback) {
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

inline void reject_unknown(const ParamMap& params, const std::vector<std::string>& allowed, const std::string& name) {
  for (const auto& [k, _] : params)
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
      throw DomainError("preset '" + name + "' has no parameter '" + k + "'");
}

inline Rational parse_open_unit(const ParamMap& params, const std::string& key, const std::string& fallback,
                                const std::string& name) {
  Rational v;
  try {
    v = Rational::parse(param_or(params, key, fallback));
  } catch (const std::exception&) {
    throw DomainError("preset '" + name + "': parameter " + key + " is not a number");
  }
  if (!(Rational(0) < v && v < Rational(1)))
    throw DomainError("preset '" + name + "': parameter " + key + "=" + v.str() + " outside (0,1)");
  return v;
}

}  // namespace detail

/// Catalog of the example tree models. Parameters: port beta (integer >= 1,
/// default 1); lopsided c (comma list of nondecreasing positive integers,
/// default "1,2"); colored p in (0,1) (default 0.3); webgraph alpha in (0,1)
/// (default 0.5).
inline WeightModel preset(const std::string& name, const ParamMap& params = {}) {
  using detail::make_atom;
  using detail::scalar_weights;
  WeightModel m;
  m.name = name;
  m.d = 1;
  if (name == "bst") {
    detail::reject_unknown(params, {}, name);
    m.b = 2;
    m.atoms = {make_atom(Rational(1), scalar_weights({1, 1}))};
  } else if (name == "rrt" || name == "dirchange") {
    detail::reject_unknown(params, {}, name);
    m.b = 2;
    m.atoms = {make_atom(Rational(1, 2), scalar_weights({0, 1})), make_atom(Rational(1, 2), scalar_weights({1, 0}))};
  } else if (name == "port") {
    detail::reject_unknown(params, {"beta"}, name);
    std::int64_t beta = 0;
    try {
      beta = std::stoll(detail::param_or(params, "beta", "1"));
    } catch (const std::exception&) {
      throw DomainError("preset 'port': beta is not an integer");
    }
    if (beta < 1 || beta > 30) throw DomainError("preset 'port': beta=" + std::to_string(beta) + " outside [1,30]");
    m.b = static_cast<int>(beta + 2);
    std::vector<std::int64_t> base(static_cast<std::size_t>(m.b), 0);
    base.back() = 1;
    m.atoms = detail::cyclic_atoms(base);
    m.root_shift = {1};
  } else if (name == "lopsided") {
    detail::reject_unknown(params, {"c"}, name);
    std::vector<std::int64_t> c;
    std::stringstream ss(detail::param_or(params, "c", "1,2"));
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        c.push_back(std::stoll(item));
      } catch (const std::exception&) {
        throw DomainError("preset 'lopsided': c entry '" + item + "' is not an integer");
      }
    }
    if (c.size() < 2 || c.size() > 12) throw DomainError("preset 'lopsided': need between 2 and 12 edge lengths");
    for (std::size_t j = 0; j < c.size(); ++j) {
      if (c[j] < 1) throw DomainError("preset 'lopsided': edge lengths must be positive");
      if (j > 0 && c[j] < c[j - 1]) throw DomainError("preset 'lopsided': edge lengths must be nondecreasing");
    }
    m.b = static_cast<int>(c.size());
    m.atoms = detail::cyclic_atoms(c);
  } else if (name == "lmr") {
    detail::reject_unknown(params, {}, name);
    m.b = 2;
    m.atoms = {make_atom(Rational(1, 2), scalar_weights({1, -1})), make_atom(Rational(1, 2), scalar_weights({-1, 1}))};
  } else if (name == "colored") {
    detail::reject_unknown(params, {"p"}, name);
    Rational p = detail::parse_open_unit(params, "p", "0.3", name);
    Rational q = Rational(1) - p;
    m.b = 2;
    m.atoms = {make_atom(q * q, scalar_weights({0, 0})), make_atom(q * p, scalar_weights({0, 1})),
               make_atom(p * q, scalar_weights({1, 0})), make_atom(p * p, scalar_weights({1, 1}))};
  } else if (name == "webgraph") {
    detail::reject_unknown(params, {"alpha"}, name);
    Rational alpha = detail::parse_open_unit(params, "alpha", "0.5", name);
    Rational half = alpha / Rational(2);
    // Z_1 ~ Bern(alpha/2); Z_2 = 1{Z_1 = 0} Y with Y ~ Bern(alpha/(2-alpha)).
    m.b = 2;
    m.atoms = {make_atom(half, scalar_weights({1, 0})), make_atom(half, scalar_weights({0, 1})),
               make_atom(Rational(1) - alpha, scalar_weights({0, 0}))};
  } else if (name == "combo2d") {
    detail::reject_unknown(params, {}, name);
    m.b = 2;
    m.d = 2;
    for (std::int64_t x : {0, 1})
      for (std::int64_t y : {0, 1}) m.atoms.push_back(make_atom(Rational(1, 4), {Level{1, x}, Level{1, y}}));
  } else {
    throw DomainError("unknown preset '" + name + "'");
  }
  auto report = validate(m);
  if (!report.ok()) throw DomainError("preset '" + name + "' failed validation: " + report.issues.front());
  return m;
}

/// Loads {"b":..,"d":..,"root_shift":[..],"atoms":[{"p":..,"w":[[..],..]}]}.
/// The result is not validated; call validate().
inline WeightModel model_from_json(const nlohmann::json& j) {
  WeightModel m;
  try {
    m.b = j.at("b").get<int>();
    m.d = j.at("d").get<int>();
    if (j.contains("root_shift")) m.root_shift = j.at("root_shift").get<Level>();
    for (const auto& a : j.at("atoms")) {
      Atom atom;
      atom.p = a.at("p").get<double>();
      atom.weights = a.at("w").get<std::vector<Level>>();
      m.atoms.push_back(std::move(atom));
    }
    if (j.contains("name")) m.name = j.at("name").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("malformed weight model JSON: ") + e.what());
  }
  return m;
}

inline nlohmann::json model_to_json(const WeightModel& m) {
  nlohmann::json j;
  j["b"] = m.b;
  j["d"] = m.d;
  j["root_shift"] = m.root_level();
  j["name"] = m.name;
  j["atoms"] = nlohmann::json::array();
  for (const auto& a : m.atoms) j["atoms"].push_back({{"p", a.p}, {"w", a.weights}});
  return j;
}

inline WeightModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open model file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DomainError("cannot parse model file " + path + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace profilelab
