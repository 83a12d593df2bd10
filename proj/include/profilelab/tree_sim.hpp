#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "profilelab/errors.hpp"
#include "profilelab/random.hpp"
#include "profilelab/weight_model.hpp"

namespace profilelab {

/// External-node census by weighted level: counts[l] = U_l(n).
struct Profile {
  std::map<Level, std::uint64_t> counts;  // lexicographic order
  std::int64_t n = 0;                     // internal nodes

  std::uint64_t mass() const {
    std::uint64_t s = 0;
    for (const auto& [_, c] : counts) s += c;
    return s;
  }
  std::uint64_t at(const Level& l) const {
    auto it = counts.find(l);
    return it == counts.end() ? 0 : it->second;
  }
  friend bool operator==(const Profile& a, const Profile& b) { return a.n == b.n && a.counts == b.counts; }
};

/// One growth step: which slot of the leaf array was split and which atom
/// supplied the edge weights.
struct GrowthStep {
  std::uint64_t leaf_slot = 0;
  std::uint32_t atom = 0;
  friend bool operator==(const GrowthStep&, const GrowthStep&) = default;
};

struct GrowthTrace {
  std::vector<GrowthStep> steps;
};

inline constexpr std::uint64_t kDefaultNodeCap = std::uint64_t{1} << 31;

/// Arena of a b-ary tree. The b children of a node are allocated together,
/// so a node stores only the index of its first child. Node ids increase
/// along every root-to-leaf path.
class Tree {
 public:
  static constexpr std::int64_t kNone = -1;

  Tree(int b, int d, Level root_level) : b_(b), d_(d) {
    parent_.push_back(kNone);
    first_child_.push_back(kNone);
    depth_.insert(depth_.end(), root_level.begin(), root_level.end());
    leaves_.push_back(0);
  }

  int b() const { return b_; }
  int d() const { return d_; }
  std::int64_t internal_count() const { return internal_; }
  std::size_t node_count() const { return parent_.size(); }
  const std::vector<std::int64_t>& leaves() const { return leaves_; }

  std::int64_t parent(std::int64_t id) const { return parent_[static_cast<std::size_t>(id)]; }
  bool is_leaf(std::int64_t id) const { return first_child_[static_cast<std::size_t>(id)] == kNone; }
  std::int64_t child(std::int64_t id, int j) const {
    auto f = first_child_[static_cast<std::size_t>(id)];
    return f == kNone ? kNone : f + j;
  }
  Level level(std::int64_t id) const {
    auto first = depth_.begin() + static_cast<std::ptrdiff_t>(id) * d_;
    return Level(first, first + d_);
  }

  void reserve(std::size_t nodes) {
    parent_.reserve(nodes);
    first_child_.reserve(nodes);
    depth_.reserve(nodes * static_cast<std::size_t>(d_));
  }

  /// Turns the leaf at leaves()[slot] into an internal node with b children.
  /// The first child takes over the slot; the others are appended.
  void split(std::size_t slot, const std::vector<Level>& weights) {
    const std::int64_t u = leaves_[slot];
    const auto base = static_cast<std::int64_t>(parent_.size());
    first_child_[static_cast<std::size_t>(u)] = base;
    for (int j = 0; j < b_; ++j) {
      parent_.push_back(u);
      first_child_.push_back(kNone);
      for (int k = 0; k < d_; ++k)
        depth_.push_back(depth_[static_cast<std::size_t>(u * d_ + k)] + weights[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)]);
    }
    leaves_[slot] = base;
    for (int j = 1; j < b_; ++j) leaves_.push_back(base + j);
    ++internal_;
  }

 private:
  int b_;
  int d_;
  std::int64_t internal_ = 0;
  std::vector<std::int64_t> parent_;
  std::vector<std::int64_t> first_child_;
  std::vector<std::int64_t> depth_;  // flat, d entries per node
  std::vector<std::int64_t> leaves_;
};

struct GrowOptions {
  bool record_trace = false;
  std::uint64_t max_nodes = kDefaultNodeCap;
};

struct GrowResult {
  Tree tree;
  std::optional<GrowthTrace> trace;
};

namespace detail {

inline void check_node_cap(const WeightModel& model, std::int64_t n, std::uint64_t cap) {
  if (n < 0) throw DomainError("node count must be nonnegative");
  const long double nodes = 1.0L + static_cast<long double>(model.b) * static_cast<long double>(n);
  if (nodes > static_cast<long double>(cap))
    throw ResourceError("tree with n=" + std::to_string(n) + " needs " + std::to_string(static_cast<double>(nodes)) +
                        " nodes, above the cap of " + std::to_string(cap));
}

}  // namespace detail

/// Grows T_{tau_n}: n times, a uniformly chosen leaf is split and its b edges
/// receive one joint draw from the atom law.
inline GrowResult grow(const WeightModel& model, std::int64_t n, Stream& rng, const GrowOptions& opts = {}) {
  detail::check_node_cap(model, n, opts.max_nodes);
  GrowResult out{Tree(model.b, model.d, model.root_level()), std::nullopt};
  out.tree.reserve(1 + static_cast<std::size_t>(model.b) * static_cast<std::size_t>(n));
  if (opts.record_trace) {
    out.trace.emplace();
    out.trace->steps.reserve(static_cast<std::size_t>(n));
  }
  for (std::int64_t step = 0; step < n; ++step) {
    const auto slot = rng.index(out.tree.leaves().size());
    const auto atom = sample_atom(model, rng);
    out.tree.split(slot, model.atoms[atom].weights);
    if (out.trace) out.trace->steps.push_back({slot, static_cast<std::uint32_t>(atom)});
  }
  return out;
}

/// Rebuilds the tree recorded in `trace`.
inline Tree replay(const WeightModel& model, const GrowthTrace& trace) {
  Tree tree(model.b, model.d, model.root_level());
  for (const auto& s : trace.steps) {
    if (s.leaf_slot >= tree.leaves().size() || s.atom >= model.atoms.size())
      throw DomainError("trace step does not fit the tree being replayed");
    tree.split(s.leaf_slot, model.atoms[s.atom].weights);
  }
  return tree;
}

inline Profile profile(const Tree& tree) {
  Profile p;
  p.n = tree.internal_count();
  for (auto id : tree.leaves()) ++p.counts[tree.level(id)];
  return p;
}

/// Same law and same random consumption as profile(grow(...)), keeping only
/// the leaf levels. Used by Monte Carlo campaigns at large n.
inline Profile grow_profile(const WeightModel& model, std::int64_t n, Stream& rng,
                            std::uint64_t max_nodes = kDefaultNodeCap) {
  detail::check_node_cap(model, n, max_nodes);
  const auto d = static_cast<std::size_t>(model.d);
  const auto b = static_cast<std::size_t>(model.b);
  std::vector<std::int64_t> leaves = model.root_level();
  leaves.reserve(d * ((b - 1) * static_cast<std::size_t>(n) + 1));
  std::size_t count = 1;
  for (std::int64_t step = 0; step < n; ++step) {
    const auto slot = static_cast<std::size_t>(rng.index(count));
    const auto& w = model.atoms[sample_atom(model, rng)].weights;
    for (std::size_t j = 1; j < b; ++j)
      for (std::size_t k = 0; k < d; ++k) leaves.push_back(leaves[slot * d + k] + w[j][k]);
    for (std::size_t k = 0; k < d; ++k) leaves[slot * d + k] += w[0][k];
    count += b - 1;
  }
  Profile p;
  p.n = n;
  if (d == 1) {
    auto [lo, hi] = std::minmax_element(leaves.begin(), leaves.end());
    std::vector<std::uint64_t> dense(static_cast<std::size_t>(*hi - *lo + 1), 0);
    for (auto v : leaves) ++dense[static_cast<std::size_t>(v - *lo)];
    for (std::size_t i = 0; i < dense.size(); ++i)
      if (dense[i] != 0) p.counts.emplace_hint(p.counts.end(), Level{*lo + static_cast<std::int64_t>(i)}, dense[i]);
  } else {
    for (std::size_t i = 0; i < count; ++i)
      ++p.counts[Level(leaves.begin() + static_cast<std::ptrdiff_t>(i * d),
                       leaves.begin() + static_cast<std::ptrdiff_t>((i + 1) * d))];
  }
  return p;
}

/// tau_n = sum_{j=1}^n E_j / ((b-1)(j-1)+1), the time of the n-th split.
inline double sample_tau(int b, std::int64_t n, Stream& rng) {
  if (b < 2 || n < 1) throw DomainError("sample_tau needs b >= 2 and n >= 1");
  double tau = 0.0;
  for (std::int64_t j = 1; j <= n; ++j) tau += rng.exponential() / static_cast<double>((b - 1) * (j - 1) + 1);
  return tau;
}

/// Draws of (b-1) n exp(-(b-1) tau_n); the limit law is
/// Gamma(1/(b-1), rate 1/(b-1)).
inline std::vector<double> yule_limit_samples(int b, std::int64_t n, std::int64_t reps, Stream& rng) {
  if (reps < 1) throw DomainError("reps must be >= 1");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(reps));
  for (std::int64_t r = 0; r < reps; ++r) {
    const double tau = sample_tau(b, n, rng);
    out.push_back(static_cast<double>(b - 1) * static_cast<double>(n) * std::exp(-static_cast<double>(b - 1) * tau));
  }
  return out;
}

/// Share of the leaves in each of the root's b subtrees.
inline std::vector<double> subtree_fractions(const Tree& tree) {
  if (tree.internal_count() < 1) throw DomainError("subtree_fractions needs a tree whose root has split");
  const auto nodes = static_cast<std::int64_t>(tree.node_count());
  std::vector<int> branch(static_cast<std::size_t>(nodes), -1);
  const std::int64_t first = tree.child(0, 0);
  for (std::int64_t id = 1; id < nodes; ++id) {
    const auto p = tree.parent(id);
    branch[static_cast<std::size_t>(id)] =
        p == 0 ? static_cast<int>(id - first) : branch[static_cast<std::size_t>(p)];
  }
  std::vector<double> counts(static_cast<std::size_t>(tree.b()), 0.0);
  for (auto leaf : tree.leaves()) counts[static_cast<std::size_t>(branch[static_cast<std::size_t>(leaf)])] += 1.0;
  const auto total = static_cast<double>(tree.leaves().size());
  for (auto& c : counts) c /= total;
  return counts;
}

/// Rows "l_1,...,l_d,count" in lexicographic level order.
inline std::string profile_to_csv(const Profile& p) {
  std::ostringstream os;
  for (const auto& [l, c] : p.counts) {
    for (auto v : l) os << v << ',';
    os << c << '\n';
  }
  return os.str();
}

inline nlohmann::json profile_to_json(const Profile& p) {
  nlohmann::json j;
  j["n"] = p.n;
  j["profile"] = nlohmann::json::array();
  for (const auto& [l, c] : p.counts) j["profile"].push_back({{"l", l}, {"u", c}});
  return j;
}

inline Profile profile_from_json(const nlohmann::json& j) {
  Profile p;
  p.n = j.at("n").get<std::int64_t>();
  for (const auto& row : j.at("profile")) p.counts[row.at("l").get<Level>()] = row.at("u").get<std::uint64_t>();
  return p;
}

inline nlohmann::json trace_to_json(const GrowthTrace& t) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : t.steps) steps.push_back({s.leaf_slot, s.atom});
  return {{"steps", steps}};
}

inline GrowthTrace trace_from_json(const nlohmann::json& j) {
  GrowthTrace t;
  for (const auto& s : j.at("steps")) t.steps.push_back({s.at(0).get<std::uint64_t>(), s.at(1).get<std::uint32_t>()});
  return t;
}

}  // namespace profilelab
