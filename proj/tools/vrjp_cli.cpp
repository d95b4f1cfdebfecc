#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "vrjp/vrjp.hpp"

namespace {

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;

nlohmann::json optional_number(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

int cmd_phase(double m, std::optional<double> w, std::optional<double> w_rel) {
  try {
    if (!w && !w_rel) throw vrjp::ConfigError("phase: one of --w or --w-rel is required");
    const double weight = w ? *w : *w_rel * vrjp::critical_w(m);
    const auto q = vrjp::classify(m, weight);
    nlohmann::json j;
    j["m"] = q.m;
    j["w"] = q.w;
    j["w_c"] = q.w_c;
    j["w_rel"] = q.w / q.w_c;
    j["t_star"] = q.t_star;
    j["tau"] = q.tau;
    j["alpha"] = q.alpha;
    j["sigma2"] = optional_number(q.sigma2);
    j["rho_c"] = optional_number(q.rho_c);
    j["regime"] = std::string(vrjp::to_string(q.regime));
    std::cout << j.dump(2) << '\n';
    return kExitPass;
  } catch (const std::exception& e) {
    std::cerr << "phase: " << e.what() << '\n';
    return kExitUsage;
  }
}

int cmd_experiment(const std::string& spec_path, const std::string& out_dir, int threads) {
  vrjp::ExperimentSpec spec;
  try {
    std::ifstream in(spec_path);
    if (!in) throw vrjp::ConfigError("cannot open spec file " + spec_path);
    std::stringstream buf;
    buf << in.rdbuf();
    spec = vrjp::ExperimentSpec::parse_text(buf.str());
    if (const char* env = std::getenv("VRJP_SEED")) {
      std::size_t used = 0;
      const std::string text(env);
      unsigned long long seed = 0;
      try {
        seed = std::stoull(text, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != text.size()) throw vrjp::ConfigError("VRJP_SEED is not an unsigned integer");
      std::cerr << "VRJP_SEED overrides seed " << spec.seed << " with " << seed << '\n';
      spec.seed = seed;
    }
    std::filesystem::create_directories(out_dir);
  } catch (const std::exception& e) {
    std::cerr << "experiment: " << e.what() << '\n';
    return kExitUsage;
  }
  const auto start = std::chrono::steady_clock::now();
  vrjp::RunOutput out;
  vrjp::Summary summary;
  try {
    out = vrjp::run(spec, threads);
    summary = vrjp::summarize(out);
  } catch (const vrjp::ConfigError& e) {
    std::cerr << "experiment: " << e.what() << '\n';
    return kExitUsage;
  }
  const std::filesystem::path dir(out_dir);
  {
    std::ofstream csv(dir / (spec.name + ".csv"));
    vrjp::write_csv(csv, out);
  }
  const auto j = vrjp::summary_json(out, summary);
  {
    std::ofstream js(dir / (spec.name + ".summary.json"));
    js << j.dump(2) << '\n';
  }
  std::cout << j.dump(2) << '\n';
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cerr << spec.name << ": " << (summary.pass() ? "pass" : "FAIL") << " in " << secs << " s\n";
  return summary.pass() ? kExitPass : kExitFail;
}

int cmd_verify(const std::string& suite, int threads) {
  std::vector<std::function<vrjp::verify::CriterionResult(const vrjp::verify::Options&)>> battery;
  if (suite == "fast") battery = vrjp::verify::fast_battery();
  else if (suite == "full") battery = vrjp::verify::full_battery();
  else {
    std::cerr << "verify: unknown suite '" << suite << "' (expected fast or full)\n";
    return kExitUsage;
  }
  vrjp::verify::Options opt;
  opt.threads = threads;
  bool all = true;
  const auto start = std::chrono::steady_clock::now();
  for (const auto& f : battery) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = vrjp::verify::run_guarded(f, opt);
    vrjp::verify::print(std::cout, r);
    std::cout.flush();
    std::cerr << "criterion " << r.id << " took "
              << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() << " s\n";
    all = all && r.pass();
  }
  std::cout << "suite " << suite << ": " << (all ? "PASS" : "FAIL") << '\n';
  std::cerr << "total " << std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() << " s\n";
  return all ? kExitPass : kExitFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation and checks for the vertex reinforced jump process on trees"};
  app.require_subcommand(1);

  double m = 0.0;
  std::optional<double> w, w_rel;
  auto* phase = app.add_subcommand("phase", "Phase-diagram quantities as JSON");
  phase->add_option("--m", m, "Mean offspring number")->required();
  auto* w_opt = phase->add_option("--w", w, "Absolute edge weight");
  phase->add_option("--w-rel", w_rel, "Edge weight as a multiple of the critical weight")->excludes(w_opt);

  std::string spec_path, out_dir = ".";
  int threads = 1;
  auto* experiment = app.add_subcommand("experiment", "Run one experiment spec");
  experiment->add_option("--spec", spec_path, "Experiment spec (JSON)")->required();
  experiment->add_option("--out", out_dir, "Output directory");
  experiment->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);

  std::string suite = "fast";
  auto* verify = app.add_subcommand("verify", "Run the verification battery");
  verify->add_option("--suite", suite, "fast or full");
  verify->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, std::cerr, std::cerr);
    return code == 0 ? kExitPass : kExitUsage;
  }

  if (*phase) return cmd_phase(m, w, w_rel);
  if (*experiment) return cmd_experiment(spec_path, out_dir, threads);
  return cmd_verify(suite, threads);
}
