#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "vrjp/errors.hpp"
#include "vrjp/random.hpp"

namespace vrjp {

/// Finite-support offspring distribution.
class OffspringLaw {
 public:
  explicit OffspringLaw(const std::map<int, double>& pmf) {
    double total = 0.0;
    for (const auto& [k, p] : pmf) {
      if (k < 0) throw ConfigError("offspring law: negative offspring count");
      if (!(p >= 0.0) || !std::isfinite(p)) throw ConfigError("offspring law: invalid probability");
      if (p == 0.0) continue;
      support_.emplace_back(k, p);
      total += p;
    }
    if (support_.empty() || std::abs(total - 1.0) > 1e-12)
      throw ConfigError("offspring law: probabilities must sum to 1");
    double acc = 0.0;
    for (const auto& [k, p] : support_) {
      acc += p;
      cumulative_.push_back(acc);
      mean_ += k * p;
    }
    cumulative_.back() = 1.0;
  }

  static OffspringLaw deterministic(int k) { return OffspringLaw({{k, 1.0}}); }

  /// {"pmf": {"2": 0.5, "3": 0.5}}
  static OffspringLaw from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("pmf") || !j.at("pmf").is_object())
      throw ConfigError("offspring law: expected {\"pmf\": {...}}");
    std::map<int, double> pmf;
    for (const auto& [key, value] : j.at("pmf").items()) {
      std::size_t used = 0;
      int k = 0;
      try {
        k = std::stoi(key, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != key.size() || !value.is_number())
        throw ConfigError("offspring law: bad pmf entry '" + key + "'");
      pmf[k] += value.get<double>();
    }
    return OffspringLaw(pmf);
  }

  nlohmann::json to_json() const {
    nlohmann::json pmf = nlohmann::json::object();
    for (const auto& [k, p] : support_) pmf[std::to_string(k)] = p;
    return {{"pmf", pmf}};
  }

  double mean() const { return mean_; }
  double probability(int k) const {
    for (const auto& [kk, p] : support_)
      if (kk == k) return p;
    return 0.0;
  }
  bool a1() const { return probability(0) == 0.0 && mean_ > 1.0; }
  bool a2() const { return probability(1) == 0.0; }
  bool a3() const { return true; }
  bool is_deterministic() const { return support_.size() == 1; }
  int max_offspring() const { return support_.back().first; }
  const std::vector<std::pair<int, double>>& support() const { return support_; }

  /// Inverse-CDF draw. A deterministic law consumes no randomness.
  int sample(RandomStream& rng) const {
    if (support_.size() == 1) return support_.front().first;
    const double u = rng.uniform();
    const auto it = std::lower_bound(cumulative_.begin(), cumulative_.end(), u);
    return support_[static_cast<std::size_t>(it - cumulative_.begin())].first;
  }

 private:
  std::vector<std::pair<int, double>> support_;
  std::vector<double> cumulative_;
  double mean_ = 0.0;
};

/// Rooted tree in breadth-first order: node 0 is the root, children of a node are
/// contiguous, generations are contiguous.
struct TreeArena {
  static constexpr std::int32_t kNoParent = -1;

  std::vector<std::int32_t> parent;
  std::vector<std::int32_t> child_begin;
  std::vector<std::int32_t> child_end;
  std::vector<std::int32_t> depth;
  std::vector<std::size_t> generation_offsets;  // generation g is [offsets[g], offsets[g+1])

  std::size_t size() const { return parent.size(); }
  int max_depth() const { return static_cast<int>(generation_offsets.size()) - 2; }
  std::size_t generation_begin(int g) const { return generation_offsets.at(static_cast<std::size_t>(g)); }
  std::size_t generation_end(int g) const { return generation_offsets.at(static_cast<std::size_t>(g) + 1); }
  std::size_t generation_size(int g) const { return generation_end(g) - generation_begin(g); }
  int num_children(std::size_t x) const { return child_end[x] - child_begin[x]; }
};

inline constexpr std::size_t kDefaultNodeCap = 5'000'000;

/// Builds a breadth-first tree from per-node child counts listed in breadth-first order.
inline TreeArena tree_from_child_counts(std::span<const int> counts,
                                        std::size_t node_cap = kDefaultNodeCap) {
  TreeArena t;
  t.parent.push_back(TreeArena::kNoParent);
  t.depth.push_back(0);
  for (std::size_t x = 0; x < t.parent.size(); ++x) {
    const int k = x < counts.size() ? counts[x] : 0;
    if (k < 0) throw DomainError("tree_from_child_counts: negative count");
    if (t.parent.size() + static_cast<std::size_t>(k) > node_cap)
      throw ResourceError("tree exceeds node cap of " + std::to_string(node_cap));
    t.child_begin.push_back(static_cast<std::int32_t>(t.parent.size()));
    for (int c = 0; c < k; ++c) {
      t.parent.push_back(static_cast<std::int32_t>(x));
      t.depth.push_back(t.depth[x] + 1);
    }
    t.child_end.push_back(static_cast<std::int32_t>(t.parent.size()));
  }
  if (counts.size() > t.parent.size()) throw DomainError("tree_from_child_counts: surplus counts");
  const int max_depth = t.depth.back();
  t.generation_offsets.assign(static_cast<std::size_t>(max_depth) + 2, 0);
  for (std::size_t x = 0; x < t.size(); ++x) t.generation_offsets[static_cast<std::size_t>(t.depth[x]) + 1] = x + 1;
  return t;
}

/// Galton-Watson tree truncated at `depth`: nodes of depth < `depth` reproduce.
inline TreeArena sample_tree(const OffspringLaw& law, int depth, RandomStream& rng,
                             std::size_t node_cap = kDefaultNodeCap) {
  if (!law.a1()) throw ConfigError("sample_tree: offspring law must satisfy p0 = 0 and m > 1");
  if (depth < 0) throw DomainError("sample_tree: negative depth");
  TreeArena t;
  t.parent.push_back(TreeArena::kNoParent);
  t.depth.push_back(0);
  t.generation_offsets = {0, 1};
  for (int g = 0; g < depth; ++g) {
    const std::size_t begin = t.generation_offsets[static_cast<std::size_t>(g)];
    const std::size_t end = t.generation_offsets[static_cast<std::size_t>(g) + 1];
    for (std::size_t x = begin; x < end; ++x) {
      const int k = law.sample(rng);
      if (t.parent.size() + static_cast<std::size_t>(k) > node_cap)
        throw ResourceError("tree exceeds node cap of " + std::to_string(node_cap));
      t.child_begin.push_back(static_cast<std::int32_t>(t.parent.size()));
      for (int c = 0; c < k; ++c) {
        t.parent.push_back(static_cast<std::int32_t>(x));
        t.depth.push_back(g + 1);
      }
      t.child_end.push_back(static_cast<std::int32_t>(t.parent.size()));
    }
    t.generation_offsets.push_back(t.parent.size());
  }
  const auto leaves = t.parent.size() - t.child_begin.size();
  for (std::size_t i = 0; i < leaves; ++i) {
    t.child_begin.push_back(static_cast<std::int32_t>(t.parent.size()));
    t.child_end.push_back(static_cast<std::int32_t>(t.parent.size()));
  }
  return t;
}

/// Branching random walk positions along the tree.
struct BrwField {
  std::vector<double> s;            // -sum of ln A over the ancestry
  std::vector<double> s_tilde;      // t* (s - tau |x|)
  std::vector<double> running_max;  // max of s_tilde over o < u <= x; 0 at the root
};

/// `a_nonroot[x - 1]` is the weight of node x >= 1.
inline BrwField brw_fields(const TreeArena& tree, std::span<const double> a_nonroot, double t_star,
                           double tau) {
  if (a_nonroot.size() + 1 != tree.size()) throw DomainError("brw_fields: weight count mismatch");
  BrwField f;
  const std::size_t n = tree.size();
  f.s.assign(n, 0.0);
  f.s_tilde.assign(n, 0.0);
  f.running_max.assign(n, 0.0);
  for (std::size_t x = 1; x < n; ++x) {
    const auto p = static_cast<std::size_t>(tree.parent[x]);
    f.s[x] = f.s[p] - std::log(a_nonroot[x - 1]);
    f.s_tilde[x] = t_star * (f.s[x] - tau * tree.depth[x]);
    f.running_max[x] = p == 0 ? f.s_tilde[x] : std::max(f.running_max[p], f.s_tilde[x]);
  }
  return f;
}

/// log of sum over generation n of exp(-beta s_tilde).
inline double log_additive_sum(const TreeArena& tree, const BrwField& field, int n, double beta) {
  if (n < 0 || n > tree.max_depth() || tree.generation_size(n) == 0)
    throw DomainError("additive_sum: generation does not exist");
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t x = tree.generation_begin(n); x < tree.generation_end(n); ++x)
    peak = std::max(peak, -beta * field.s_tilde[x]);
  double sum = 0.0;
  for (std::size_t x = tree.generation_begin(n); x < tree.generation_end(n); ++x)
    sum += std::exp(-beta * field.s_tilde[x] - peak);
  return peak + std::log(sum);
}

/// W_{n,beta}: sum over generation n of exp(-beta s_tilde).
inline double additive_sum(const TreeArena& tree, const BrwField& field, int n, double beta) {
  return std::exp(log_additive_sum(tree, field, n, beta));
}

inline double min_ancestral_max(const TreeArena& tree, const BrwField& field, int n) {
  if (n < 0 || n > tree.max_depth() || tree.generation_size(n) == 0)
    throw DomainError("min_ancestral_max: generation does not exist");
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t x = tree.generation_begin(n); x < tree.generation_end(n); ++x)
    best = std::min(best, field.running_max[x]);
  return best;
}

}  // namespace vrjp
