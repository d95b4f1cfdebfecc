#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "vrjp/errors.hpp"
#include "vrjp/gw_tree.hpp"
#include "vrjp/lattice.hpp"
#include "vrjp/network.hpp"
#include "vrjp/phase_diagram.hpp"
#include "vrjp/random.hpp"
#include "vrjp/stats.hpp"
#include "vrjp/tree_green.hpp"
#include "vrjp/tree_potential.hpp"

namespace vrjp {

using json = nlohmann::json;

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// Edge weight given either directly or as a multiple of the critical weight.
struct WeightSpec {
  bool relative = false;
  double value = 0.0;

  double resolve(double m) const { return relative ? value * critical_w(m) : value; }
};

struct BoxSpec {
  int d = 2;
  int radius = 0;
};

struct AssertionSpec {
  std::string kind;
  json params = json::object();
};

enum class ExperimentKind { Tree, Lattice };

struct ExperimentSpec {
  std::string name;
  ExperimentKind kind = ExperimentKind::Tree;
  std::optional<OffspringLaw> law;
  WeightSpec w;
  std::vector<int> depths;
  int replicas = 1;
  std::uint64_t seed = 0;
  json options = json::object();
  std::optional<BoxSpec> box;
  std::vector<AssertionSpec> assertions;

  int max_depth() const { return depths.back(); }

  double option(const std::string& key, double fallback) const {
    if (options.contains(key)) return options.at(key).get<double>();
    return fallback;
  }

  static ExperimentSpec from_json(const json& j) {
    try {
      return parse(j);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("experiment spec: ") + e.what());
    }
  }

  static ExperimentSpec parse_text(const std::string& text) {
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("experiment spec: parse error: ") + e.what());
    }
    return from_json(j);
  }

  json to_json() const {
    json j;
    j["name"] = name;
    j["kind"] = kind == ExperimentKind::Tree ? "tree" : "lattice";
    if (law) j["law"] = law->to_json();
    j["w"] = json{{w.relative ? "rel" : "abs", w.value}};
    j["depths"] = depths;
    j["replicas"] = replicas;
    j["seed"] = seed;
    j["options"] = options;
    if (box) j["box"] = json{{"d", box->d}, {"radius", box->radius}};
    j["assertions"] = json::array();
    for (const auto& a : assertions) {
      json aj = a.params;
      aj["kind"] = a.kind;
      j["assertions"].push_back(aj);
    }
    return j;
  }

 private:
  static ExperimentSpec parse(const json& j) {
    if (!j.is_object()) throw ConfigError("experiment spec: top level must be an object");
    static const std::vector<std::string> known = {"name", "kind", "law", "w", "depths", "replicas",
                                                   "seed", "options", "box", "assertions"};
    for (const auto& [key, _] : j.items())
      if (std::find(known.begin(), known.end(), key) == known.end())
        throw ConfigError("experiment spec: unknown field '" + key + "'");
    ExperimentSpec s;
    s.name = j.at("name").get<std::string>();
    const std::string kind = j.value("kind", std::string("tree"));
    if (kind == "tree") s.kind = ExperimentKind::Tree;
    else if (kind == "lattice") s.kind = ExperimentKind::Lattice;
    else throw ConfigError("experiment spec: kind must be 'tree' or 'lattice'");

    const auto& w = j.at("w");
    if (w.is_number()) {
      s.w = {false, w.get<double>()};
    } else if (w.is_object() && w.size() == 1 && (w.contains("rel") || w.contains("abs"))) {
      s.w.relative = w.contains("rel");
      s.w.value = w.begin()->get<double>();
    } else {
      throw ConfigError("experiment spec: w must be a number, {\"abs\": x} or {\"rel\": x}");
    }
    if (!(s.w.value > 0.0) || !std::isfinite(s.w.value)) throw ConfigError("experiment spec: w must be positive");

    s.depths = j.at("depths").get<std::vector<int>>();
    if (s.depths.empty()) throw ConfigError("experiment spec: depths must be nonempty");
    for (std::size_t i = 0; i < s.depths.size(); ++i) {
      if (s.depths[i] < 0) throw ConfigError("experiment spec: depths must be nonnegative");
      if (i > 0 && s.depths[i] <= s.depths[i - 1]) throw ConfigError("experiment spec: depths must be increasing");
    }
    s.replicas = j.at("replicas").get<int>();
    if (s.replicas < 1) throw ConfigError("experiment spec: replicas must be >= 1");
    s.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("options")) {
      if (!j.at("options").is_object()) throw ConfigError("experiment spec: options must be an object");
      s.options = j.at("options");
    }
    if (s.kind == ExperimentKind::Tree) {
      if (!j.contains("law")) throw ConfigError("experiment spec: tree experiments need a law");
      s.law = OffspringLaw::from_json(j.at("law"));
      if (!s.law->a1()) throw ConfigError("experiment spec: law must satisfy p0 = 0 and m > 1");
    } else {
      if (!j.contains("box")) throw ConfigError("experiment spec: lattice experiments need a box");
      if (s.w.relative) throw ConfigError("experiment spec: lattice weights must be absolute");
      const auto& b = j.at("box");
      s.box = BoxSpec{b.at("d").get<int>(), b.value("radius", s.depths.back())};
      if (b.contains("w") && std::abs(b.at("w").get<double>() - s.w.value) > 0.0)
        throw ConfigError("experiment spec: box.w disagrees with w");
      if (s.box->d < 1 || s.box->radius < s.depths.back())
        throw ConfigError("experiment spec: box radius must cover every depth");
    }
    if (j.contains("assertions")) {
      for (const auto& a : j.at("assertions")) {
        if (!a.is_object() || !a.contains("kind")) throw ConfigError("experiment spec: assertion needs a kind");
        AssertionSpec as;
        as.kind = a.at("kind").get<std::string>();
        as.params = a;
        as.params.erase("kind");
        s.assertions.push_back(std::move(as));
      }
    }
    return s;
  }
};

/// Per-depth scalars of one replica. Fields that do not apply are NaN.
struct DepthRecord {
  int depth = 0;
  double psi = kNaN;
  double g_hat = kNaN;
  double g_tilde = kNaN;
  double resistance = kNaN;
  double escape_p = kNaN;
  double lambda_n = kNaN;
  double w_n_beta = kNaN;
  double min_ancestral_max = kNaN;
  double nash_williams = kNaN;
  double cramer_residual = kNaN;
  double resistance_residual = kNaN;
};

struct ReplicaRecord {
  std::uint64_t replica = 0;
  double gamma = kNaN;
  std::vector<DepthRecord> depths;
  double wall_seconds = 0.0;
  std::string error;
};

struct AssertionResult {
  std::string name;
  double value;
  double stderr_;
  double threshold;
  bool pass;
};

inline json to_json(const AssertionResult& a) {
  return json{{"name", a.name}, {"value", a.value}, {"stderr", a.stderr_}, {"threshold", a.threshold}, {"pass", a.pass}};
}

/// Model parameters shared by every replica.
struct RunContext {
  double m = kNaN;
  double w = kNaN;
  double w_c = kNaN;
  double t_star = kNaN;
  double tau = kNaN;
};

inline RunContext make_context(const ExperimentSpec& spec) {
  RunContext c;
  if (spec.kind == ExperimentKind::Lattice) {
    c.w = spec.w.value;
    return c;
  }
  c.m = spec.law->mean();
  c.w_c = critical_w(c.m);
  c.w = spec.w.relative ? spec.w.value * c.w_c : spec.w.value;
  c.t_star = t_star(c.m, c.w);
  c.tau = -LaplaceTransformFn(c.m, c.w)(c.t_star).df;
  return c;
}

inline ReplicaRecord run_tree_replica(const ExperimentSpec& spec, const RunContext& ctx, std::uint64_t replica) {
  ReplicaRecord rec;
  rec.replica = replica;
  RandomStream rng(spec.seed, replica);
  const auto tree = sample_tree(*spec.law, spec.max_depth() + 1, rng,
                                static_cast<std::size_t>(spec.option("node_cap", kDefaultNodeCap)));
  const auto pot = attach_potential(tree, ctx.w, rng);
  rec.gamma = pot.gamma();
  const double beta = spec.option("beta", 1.0);
  const bool with_brw = spec.option("record_brw", 1.0) != 0.0;
  const auto field = with_brw ? brw_fields(tree, pot.a_nonroot(), ctx.t_star, ctx.tau) : BrwField{};
  for (int n : spec.depths) {
    DepthRecord d;
    d.depth = n;
    const auto g = eliminate(tree, pot, n);
    d.psi = g.psi_root;
    d.g_hat = g.g_hat_root;
    d.g_tilde = g.g_tilde_root;
    const auto net = make_wired_network(tree, pot, n);
    const double log_c = log_effective_conductance(net);
    d.resistance = std::exp(-log_c);
    d.escape_p = std::exp(log_c - log_root_conductance(net));
    if (n >= 1) {
      const double log_lambda = log_generation_conductance(tree, pot, n);
      d.lambda_n = std::exp(log_lambda);
      d.nash_williams = std::exp(-log_lambda);
    }
    if (with_brw) {
      d.w_n_beta = std::exp(log_additive_sum(tree, field, n, beta));
      d.min_ancestral_max = min_ancestral_max(tree, field, n);
    }
    d.cramer_residual = std::abs(d.g_hat - d.g_tilde / (1.0 + 2.0 * pot.gamma() * d.g_tilde)) / d.g_hat;
    d.resistance_residual = std::abs(d.resistance - d.g_tilde) / d.resistance;
    rec.depths.push_back(d);
  }
  return rec;
}

inline ReplicaRecord run_lattice_replica(const ExperimentSpec& spec, const std::vector<LatticeBox>& boxes,
                                         std::uint64_t replica) {
  ReplicaRecord rec;
  rec.replica = replica;
  RandomStream rng(spec.seed, replica);
  std::vector<double> beta = sample_beta_sequential(boxes.front(), rng);
  for (std::size_t k = 0; k < boxes.size(); ++k) {
    if (k > 0) beta = extend_potential(boxes[k - 1], beta, boxes[k], rng);
    const auto r = psi_on_box(boxes[k], beta);
    DepthRecord d;
    d.depth = boxes[k].n;
    d.psi = r.psi[0];
    d.g_hat = r.g_hat_oo;
    rec.depths.push_back(d);
  }
  return rec;
}

struct RunOutput {
  ExperimentSpec spec;
  RunContext context;
  std::vector<ReplicaRecord> records;  // in replica order
};

/// Runs every replica; replica r draws from the stream keyed by (seed, r), and records are
/// stored by replica index so the output does not depend on scheduling.
inline RunOutput run(const ExperimentSpec& spec, int threads = 1) {
  RunOutput out{spec, make_context(spec), {}};
  out.records.resize(static_cast<std::size_t>(spec.replicas));
  std::vector<LatticeBox> boxes;
  if (spec.kind == ExperimentKind::Lattice)
    for (int n : spec.depths) boxes.push_back(build_box(spec.box->d, n, out.context.w));

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    while (true) {
      const std::size_t r = next.fetch_add(1);
      if (r >= out.records.size()) return;
      const auto start = std::chrono::steady_clock::now();
      ReplicaRecord rec;
      try {
        rec = spec.kind == ExperimentKind::Tree ? run_tree_replica(spec, out.context, r)
                                                : run_lattice_replica(spec, boxes, r);
      } catch (const std::exception& e) {
        rec = ReplicaRecord{};
        rec.replica = r;
        rec.error = e.what();
      }
      rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      out.records[r] = std::move(rec);
    }
  };
  const int nthreads = std::max(1, std::min<int>(threads, spec.replicas));
  std::vector<std::thread> pool;
  for (int t = 1; t < nthreads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return out;
}

// ---------------------------------------------------------------------------
// Estimators. Depth arguments are positions in the spec's depth list.

inline std::vector<const ReplicaRecord*> valid_records(const std::vector<ReplicaRecord>& records) {
  std::vector<const ReplicaRecord*> out;
  for (const auto& r : records)
    if (r.error.empty()) out.push_back(&r);
  return out;
}

template <class F>
std::vector<double> column(const std::vector<ReplicaRecord>& records, std::size_t depth_index, F&& get) {
  std::vector<double> out;
  for (const auto* r : valid_records(records)) out.push_back(get(r->depths.at(depth_index), *r));
  return out;
}

struct SlopeEstimate {
  double slope;
  double stderr_;
};

/// Median over replicas of (ln psi_{n2} - ln psi_{n1}) / (n2 - n1).
inline SlopeEstimate decay_rate_estimate(const std::vector<ReplicaRecord>& records, std::size_t i1, std::size_t i2) {
  std::vector<double> slopes;
  for (const auto* r : valid_records(records)) {
    const auto& a = r->depths.at(i1);
    const auto& b = r->depths.at(i2);
    slopes.push_back((std::log(b.psi) - std::log(a.psi)) / (b.depth - a.depth));
  }
  return {stats::median(slopes), stats::median_stderr(slopes)};
}

struct MomentRow {
  double p;
  stats::MeanEstimate moment;          // E[psi^p]
  stats::MeanEstimate mirror;          // E[psi^(1-p)]
  stats::MeanEstimate paired_difference;
};

inline std::vector<MomentRow> moment_curve(const std::vector<ReplicaRecord>& records, std::size_t depth_index,
                                           const std::vector<double>& ps) {
  const auto psi = column(records, depth_index, [](const DepthRecord& d, const ReplicaRecord&) { return d.psi; });
  std::vector<MomentRow> rows;
  for (double p : ps) {
    std::vector<double> a, b, diff;
    for (double x : psi) {
      a.push_back(std::pow(x, p));
      b.push_back(std::pow(x, 1.0 - p));
      diff.push_back(a.back() - b.back());
    }
    rows.push_back({p, stats::mean_of(a), stats::mean_of(b), stats::mean_of(diff)});
  }
  return rows;
}

/// KS test of psi^2 2 gamma (1 + 2 gamma R) against twice a Gamma(1/2, 1) variable.
/// `corrupted` drops the (1 + 2 gamma R) factor.
inline stats::KsResult coupling_ks_test(const std::vector<ReplicaRecord>& records, std::size_t depth_index,
                                        bool corrupted = false) {
  const auto phi = column(records, depth_index, [corrupted](const DepthRecord& d, const ReplicaRecord& r) {
    const double base = d.psi * d.psi * 2.0 * r.gamma;
    return corrupted ? base : base * (1.0 + 2.0 * r.gamma * d.resistance);
  });
  return stats::ks_test(phi, [](double y) { return gamma_half_cdf(0.5 * y); });
}

/// Probability integral transform of psi under its conditional IG(1, psi / Ghat) law.
/// `corrupted` uses IG(1, 1) instead.
inline std::vector<double> pit_values(const std::vector<ReplicaRecord>& records, std::size_t depth_index,
                                      bool corrupted = false) {
  return column(records, depth_index, [corrupted](const DepthRecord& d, const ReplicaRecord&) {
    const double shape = corrupted ? 1.0 : d.psi / d.g_hat;
    return ig_cdf(d.psi, IgParams(1.0, shape));
  });
}

inline stats::KsResult pit_conditional_test(const std::vector<ReplicaRecord>& records, std::size_t depth_index,
                                            bool corrupted = false) {
  return stats::ks_test(pit_values(records, depth_index, corrupted),
                        [](double u) { return std::clamp(u, 0.0, 1.0); });
}

/// Least-squares slope of ln(mean escape probability) against depth.
inline stats::LinearFit escape_decay(const std::vector<ReplicaRecord>& records, const std::vector<std::size_t>& idx) {
  std::vector<double> xs, ys;
  for (auto i : idx) {
    const auto p = column(records, i, [](const DepthRecord& d, const ReplicaRecord&) { return d.escape_p; });
    xs.push_back(records.front().depths.at(i).depth);
    ys.push_back(std::log(stats::mean_of(p).mean));
  }
  return stats::least_squares(xs, ys);
}

/// Median of ln psi_n / n^(1/3) at each depth index.
inline std::vector<double> critical_scaling(const std::vector<ReplicaRecord>& records,
                                            const std::vector<std::size_t>& idx) {
  std::vector<double> out;
  for (auto i : idx) {
    const auto v = column(records, i, [](const DepthRecord& d, const ReplicaRecord&) {
      return std::log(d.psi) / std::cbrt(static_cast<double>(d.depth));
    });
    out.push_back(stats::median(v));
  }
  return out;
}

template <class Get>
stats::LinearFit log_log_moment_slope(const std::vector<ReplicaRecord>& records, const std::vector<std::size_t>& idx,
                                      double r, Get&& get) {
  std::vector<double> xs, ys;
  for (auto i : idx) {
    const auto v = column(records, i, [&](const DepthRecord& d, const ReplicaRecord&) { return std::pow(get(d), r); });
    xs.push_back(std::log(static_cast<double>(records.front().depths.at(i).depth)));
    ys.push_back(std::log(stats::mean_of(v).mean));
  }
  return stats::least_squares(xs, ys);
}

/// Slope of ln E[Lambda_n^r] against ln n; r must lie strictly between 2/9 and 1/4.
inline stats::LinearFit positive_recurrence_check(const std::vector<ReplicaRecord>& records,
                                                  const std::vector<std::size_t>& idx, double r) {
  if (!(r > 2.0 / 9.0 && r < 0.25)) throw ConfigError("positive_recurrence_check: r must lie in (2/9, 1/4)");
  return log_log_moment_slope(records, idx, r, [](const DepthRecord& d) { return d.lambda_n; });
}

/// Slope of ln E[W_{n,beta}^r] against ln n; requires r beta < 1.
inline stats::LinearFit additive_moment_check(const std::vector<ReplicaRecord>& records,
                                           const std::vector<std::size_t>& idx, double r, double beta) {
  if (!(r > 0.0 && r * beta < 1.0)) throw ConfigError("additive_moment_check: need 0 < r and r * beta < 1");
  return log_log_moment_slope(records, idx, r, [](const DepthRecord& d) { return d.w_n_beta; });
}

// ---------------------------------------------------------------------------
// Assertions.

namespace detail {

inline std::string at_depth(const std::string& name, int depth) { return name + "[n=" + std::to_string(depth) + "]"; }

inline std::vector<std::size_t> depth_indices(const ExperimentSpec& spec, const json& params) {
  std::vector<std::size_t> idx;
  if (params.contains("depths")) {
    for (int n : params.at("depths").get<std::vector<int>>()) {
      const auto it = std::find(spec.depths.begin(), spec.depths.end(), n);
      if (it == spec.depths.end()) throw ConfigError("assertion depth " + std::to_string(n) + " not in spec depths");
      idx.push_back(static_cast<std::size_t>(it - spec.depths.begin()));
    }
  } else {
    for (std::size_t i = 0; i < spec.depths.size(); ++i) idx.push_back(i);
  }
  return idx;
}

inline double param(const json& p, const char* key, double fallback) {
  return p.contains(key) ? p.at(key).get<double>() : fallback;
}

inline void require_tree(const ExperimentSpec& spec, const std::string& kind) {
  if (spec.kind != ExperimentKind::Tree) throw ConfigError("assertion '" + kind + "' needs a tree experiment");
}

}  // namespace detail

inline std::vector<AssertionResult> evaluate_assertion(const RunOutput& run_out, const AssertionSpec& a) {
  const auto& spec = run_out.spec;
  const auto& recs = run_out.records;
  const auto& ctx = run_out.context;
  const auto& p = a.params;
  const auto idx = detail::depth_indices(spec, p);
  std::vector<AssertionResult> out;
  const double nsigma = detail::param(p, "nsigma", 4.0);

  auto max_over = [&](auto get) {
    double worst = 0.0;
    for (auto i : idx)
      for (double v : column(recs, i, [&](const DepthRecord& d, const ReplicaRecord&) { return get(d); }))
        worst = std::isnan(v) ? INFINITY : std::max(worst, v);
    return worst;
  };

  if (a.kind == "cramer_identity" || a.kind == "resistance_identity") {
    detail::require_tree(spec, a.kind);
    const double tol = detail::param(p, "tol", 1e-10);
    const double worst = a.kind == "cramer_identity" ? max_over([](const DepthRecord& d) { return d.cramer_residual; })
                                                     : max_over([](const DepthRecord& d) { return d.resistance_residual; });
    out.push_back({a.kind, worst, 0.0, tol, worst <= tol});
  } else if (a.kind == "nash_williams") {
    detail::require_tree(spec, a.kind);
    const double worst = max_over([](const DepthRecord& d) { return d.depth >= 1 ? d.nash_williams / d.resistance : 0.0; });
    const double threshold = 1.0 + 1e-12;
    out.push_back({a.kind, worst, 0.0, threshold, worst <= threshold});
  } else if (a.kind == "psi_mean") {
    for (auto i : idx) {
      const auto e = stats::mean_of(column(recs, i, [](const DepthRecord& d, const ReplicaRecord&) { return d.psi; }));
      out.push_back({detail::at_depth(a.kind, spec.depths[i]), e.mean, e.stderr_, nsigma,
                     std::abs(e.mean - 1.0) <= nsigma * e.stderr_});
    }
  } else if (a.kind == "bracket_constant") {
    // Paired differences of psi^2 - Ghat against the first listed depth.
    const auto base = column(recs, idx.front(), [](const DepthRecord& d, const ReplicaRecord&) { return d.psi * d.psi - d.g_hat; });
    for (std::size_t k = 1; k < idx.size(); ++k) {
      const auto cur = column(recs, idx[k], [](const DepthRecord& d, const ReplicaRecord&) { return d.psi * d.psi - d.g_hat; });
      std::vector<double> diff(cur.size());
      for (std::size_t r = 0; r < cur.size(); ++r) diff[r] = cur[r] - base[r];
      const auto e = stats::mean_of(diff);
      out.push_back({detail::at_depth(a.kind, spec.depths[idx[k]]), e.mean, e.stderr_, nsigma,
                     std::abs(e.mean) <= nsigma * e.stderr_});
    }
  } else if (a.kind == "moment_symmetry") {
    const double pw = detail::param(p, "p", 2.0);
    for (auto i : idx) {
      const auto row = moment_curve(recs, i, {pw}).front();
      const auto& e = row.paired_difference;
      out.push_back({detail::at_depth(a.kind, spec.depths[i]), e.mean, e.stderr_, nsigma,
                     std::abs(e.mean) <= nsigma * e.stderr_});
    }
  } else if (a.kind == "moment_growth") {
    // ln E[psi^(1+p)] / n against tau in the recurrent phase.
    detail::require_tree(spec, a.kind);
    const double pw = detail::param(p, "p", 1.0);
    const double rel = detail::param(p, "rel_tol", 0.25);
    for (auto i : idx) {
      const auto row = moment_curve(recs, i, {1.0 + pw}).front();
      const double rate = std::log(row.moment.mean) / spec.depths[i];
      const double se = row.moment.stderr_ / row.moment.mean / spec.depths[i];
      out.push_back({detail::at_depth(a.kind, spec.depths[i]), rate, se, rel,
                     std::abs(rate - ctx.tau) <= rel * std::abs(ctx.tau)});
    }
  } else if (a.kind == "coupling_ks" || a.kind == "coupling_ks_control" || a.kind == "pit_ks" ||
             a.kind == "pit_ks_control") {
    const bool control = a.kind.ends_with("_control");
    const bool coupling = a.kind.starts_with("coupling");
    if (coupling) detail::require_tree(spec, a.kind);
    for (auto i : idx) {
      const auto ks = coupling ? coupling_ks_test(recs, i, control) : pit_conditional_test(recs, i, control);
      const double threshold = control ? detail::param(p, "max_p", 1e-6) : detail::param(p, "min_p", 1e-3);
      out.push_back({detail::at_depth(a.kind, spec.depths[i]), ks.p_value, kNaN, threshold,
                     control ? ks.p_value < threshold : ks.p_value > threshold});
    }
  } else if (a.kind == "decay_rate") {
    detail::require_tree(spec, a.kind);
    if (idx.size() < 2) throw ConfigError("decay_rate needs two depths");
    const double rel = detail::param(p, "rel_tol", 0.2);
    const auto e = decay_rate_estimate(recs, idx[idx.size() - 2], idx.back());
    out.push_back({a.kind, e.slope, e.stderr_, rel, std::abs(e.slope + ctx.tau) <= rel * std::abs(ctx.tau)});
  } else if (a.kind == "escape_band") {
    detail::require_tree(spec, a.kind);
    if (!spec.law->a2()) throw ConfigError("escape_band needs a law with p1 = 0");
    const double eps = detail::param(p, "eps_rel", 0.15) * ctx.tau;
    const auto fit = escape_decay(recs, idx);
    const double lo = -2.0 * ctx.tau - eps, hi = -ctx.tau * ctx.t_star + eps;
    out.push_back({a.kind + "_lower", fit.slope, fit.slope_stderr, lo, fit.slope >= lo});
    out.push_back({a.kind + "_upper", fit.slope, fit.slope_stderr, hi, fit.slope <= hi});
  } else if (a.kind == "critical_scaling") {
    detail::require_tree(spec, a.kind);
    const double factor = detail::param(p, "factor", 3.0);
    const double rho = critical_exponents(ctx.m).rho_c;
    const auto med = critical_scaling(recs, idx);
    double worst = -INFINITY;
    for (std::size_t k = 0; k < idx.size(); ++k)
      if (spec.depths[idx[k]] >= 4) worst = std::max(worst, med[k]);
    out.push_back({a.kind + "_negative", worst, 0.0, 0.0, worst < 0.0});
    const double last = -med.back();
    out.push_back({a.kind + "_factor", last / rho, 0.0, factor, last >= rho / factor && last <= rho * factor});
    // monotone decrease over consecutive steps among the last six depths
    const std::size_t first = med.size() > 6 ? med.size() - 6 : 0;
    int down = 0, steps = 0;
    for (std::size_t k = first + 1; k < med.size(); ++k, ++steps)
      if (med[k] < med[k - 1]) ++down;
    const double need = detail::param(p, "min_monotone_fraction", 0.8);
    out.push_back({a.kind + "_monotone", steps > 0 ? static_cast<double>(down) / steps : 0.0, 0.0, need,
                   steps > 0 && down >= need * steps - 1e-12});
  } else if (a.kind == "lambda_slope") {
    detail::require_tree(spec, a.kind);
    const double r = detail::param(p, "r", 0.24);
    const auto fit = positive_recurrence_check(recs, idx, r);
    const double lo = detail::param(p, "lo", -2.5), hi = detail::param(p, "hi", -0.4);
    out.push_back({a.kind + "_lower", fit.slope, fit.slope_stderr, lo, fit.slope >= lo});
    out.push_back({a.kind + "_upper", fit.slope, fit.slope_stderr, hi, fit.slope <= hi});
  } else if (a.kind == "additive_moment_slope") {
    detail::require_tree(spec, a.kind);
    const double r = detail::param(p, "r", 0.3);
    const double beta = spec.option("beta", 1.0);
    const double rel = detail::param(p, "rel_tol", 0.4);
    const auto fit = additive_moment_check(recs, idx, r, beta);
    const double target = -1.5 * r * beta;
    out.push_back({a.kind, fit.slope, fit.slope_stderr, target,
                   std::abs(fit.slope - target) <= rel * std::abs(target)});
  } else if (a.kind == "additive_mean") {
    detail::require_tree(spec, a.kind);
    if (spec.option("beta", 1.0) != 1.0) throw ConfigError("additive_mean needs options.beta = 1");
    for (auto i : idx) {
      const auto e = stats::mean_of(column(recs, i, [](const DepthRecord& d, const ReplicaRecord&) { return d.w_n_beta; }));
      out.push_back({detail::at_depth(a.kind, spec.depths[i]), e.mean, e.stderr_, nsigma,
                     std::abs(e.mean - 1.0) <= nsigma * e.stderr_});
    }
  } else {
    throw ConfigError("unknown assertion kind '" + a.kind + "'");
  }
  return out;
}

struct Summary {
  std::vector<AssertionResult> assertions;
  std::size_t failed_replicas = 0;

  bool pass() const {
    if (failed_replicas > 0) return false;
    return std::all_of(assertions.begin(), assertions.end(), [](const auto& a) { return a.pass; });
  }
};

inline Summary summarize(const RunOutput& run_out) {
  Summary s;
  for (const auto& r : run_out.records)
    if (!r.error.empty()) ++s.failed_replicas;
  for (const auto& a : run_out.spec.assertions) {
    auto res = evaluate_assertion(run_out, a);
    s.assertions.insert(s.assertions.end(), res.begin(), res.end());
  }
  return s;
}

inline json summary_json(const RunOutput& run_out, const Summary& s) {
  json j;
  j["experiment"] = run_out.spec.name;
  j["seed"] = run_out.spec.seed;
  j["replicas"] = run_out.spec.replicas;
  j["failed_replicas"] = s.failed_replicas;
  j["m"] = run_out.context.m;
  j["w"] = run_out.context.w;
  j["w_c"] = run_out.context.w_c;
  j["t_star"] = run_out.context.t_star;
  j["tau"] = run_out.context.tau;
  j["assertions"] = json::array();
  for (const auto& a : s.assertions) j["assertions"].push_back(to_json(a));
  j["pass"] = s.pass();
  return j;
}

namespace detail {

inline std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace detail

inline constexpr const char* kCsvHeader =
    "experiment,replica,depth,psi,g_hat,g_tilde,resistance,escape_p,lambda_n,w_n_beta,gamma,seed";

/// One row per (replica, depth), in replica order.
inline void write_csv(std::ostream& os, const RunOutput& run_out) {
  os << kCsvHeader << '\n';
  for (const auto& r : run_out.records) {
    for (const auto& d : r.depths) {
      os << run_out.spec.name << ',' << r.replica << ',' << d.depth << ',' << detail::format_number(d.psi) << ','
         << detail::format_number(d.g_hat) << ',' << detail::format_number(d.g_tilde) << ','
         << detail::format_number(d.resistance) << ',' << detail::format_number(d.escape_p) << ','
         << detail::format_number(d.lambda_n) << ',' << detail::format_number(d.w_n_beta) << ','
         << detail::format_number(r.gamma) << ',' << run_out.spec.seed << '\n';
    }
  }
}

}  // namespace vrjp
