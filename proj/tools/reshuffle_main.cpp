// Command-line driver: sweep (rate experiments), couple (coupling lab),
// verify (assumption audit), plotdata (series extraction from a sweep csv).
// Exit code 0 means every hard check in the invoked command passed.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "reshuffle/reshuffle.hpp"

namespace fs = std::filesystem;
using namespace reshuffle;

namespace {

struct CoupleSetup {
  FiniteSumProblem problem;
  ConvexSet set;
  double alpha = 0.0;
  std::uint64_t seed = 0;
  int warmup_epochs = 2;
};

Eigen::VectorXd resolve_start(const std::string& name, const CoupleSetup& setup) {
  if (name == "origin") {
    return setup.set.project(Eigen::VectorXd::Zero(setup.problem.d));
  }
  if (name == "optimum") {
    if (!setup.problem.x_star) {
      throw std::runtime_error("start 'optimum' needs a problem with a certified optimum");
    }
    return *setup.problem.x_star;
  }
  if (name == "warmup") {
    const auto traj = run_sgdo(setup.problem, setup.set, setup.warmup_epochs, setup.alpha,
                               RandomStream(setup.seed, 0xAA));
    return traj.last_iterate();
  }
  throw std::runtime_error("unknown start '" + name + "' (origin | optimum | warmup)");
}

int run_sweep_command(const fs::path& config_path, const fs::path& out_dir, int jobs,
                      std::uint64_t seed_offset) {
  const auto config = experiment_config_from_json(load_json_file(config_path));
  const auto result = run_sweep(config, jobs, seed_offset);
  const auto paths = emit_outputs(result, out_dir);
  std::cout << "wrote " << paths.sweep_csv.string() << "\n";
  std::cout << "wrote " << paths.summary_json.string() << "\n";
  std::cout << "wrote " << paths.plotdata_csv.string() << "\n";

  bool ok = true;
  for (const auto& cell : result.cells) {
    if (cell.seeds == 0) {
      std::cout << "FAIL every seed diverged in cell " << cell.algorithm << " n=" << cell.n
                << " K=" << cell.K << "\n";
      ok = false;
    }
  }
  if (config.thm3_check) {
    const auto report = check_thm3_bound(result);
    std::cout << (report.passed() ? "PASS" : "FAIL") << " rate bound: " << report.checked
              << " cells, " << report.violations << " violations, max ratio "
              << format_double(report.max_ratio) << "\n";
    ok = ok && report.passed();
  }
  return ok ? 0 : 1;
}

int run_couple_command(const fs::path& config_path, const fs::path& out_dir,
                       std::uint64_t seed_offset) {
  const json cfg = load_json_file(config_path);
  const auto pspec = problem_spec_from_json(cfg.at("problem"));
  if (pspec.n < 1) throw std::runtime_error("couple: problem.n must be set");

  CoupleSetup setup{build_problem(pspec, pspec.n),
                    cfg.contains("set") ? build_set(set_spec_from_json(cfg.at("set")), pspec.d)
                                        : ConvexSet::origin_ball(pspec.d, pspec.radius),
                    0.0,
                    cfg.value("seed", std::uint64_t{1}) + seed_offset,
                    cfg.value("warmup_epochs", 2)};
  if (cfg.contains("alpha")) {
    setup.alpha = cfg.at("alpha").get<double>();
  } else {
    setup.alpha = cfg.value("alpha_scale", 1.0) * 2.0 / setup.problem.L;
  }

  json checks = json::array();
  bool ok = true;
  auto note = [&](const json& report) {
    const bool passed = report.at("passed").get<bool>();
    std::cout << (passed ? "PASS" : "FAIL") << " " << report.at("check").get<std::string>();
    if (report.contains("i")) std::cout << " i=" << report["i"];
    if (report.contains("r")) std::cout << " r=" << report["r"];
    std::cout << "\n";
    ok = ok && passed;
    checks.push_back(report);
  };

  if (cfg.contains("stability")) {
    const auto& block = cfg.at("stability");
    std::vector<Eigen::VectorXd> starts;
    for (const auto& name : block.value("starts", std::vector<std::string>{"origin"})) {
      starts.push_back(resolve_start(name, setup));
    }
    note(to_json(stability_report(setup.problem, setup.set, starts, setup.alpha,
                                  block.value("pairs", 1000L),
                                  RandomStream(setup.seed, 1))));
  }
  if (cfg.contains("wasserstein")) {
    const auto& block = cfg.at("wasserstein");
    const auto start = resolve_start(block.value("start", std::string("origin")), setup);
    std::uint64_t stream_id = 2;
    for (int i : block.value("i", std::vector<int>{0})) {
      for (int r : block.value("r", std::vector<int>{1})) {
        note(to_json(wasserstein_coupling_bound(setup.problem, setup.set, start, setup.alpha,
                                                i, r, block.value("samples", 1000L),
                                                RandomStream(setup.seed, stream_id++))));
      }
    }
  }
  if (cfg.contains("bias")) {
    const auto& block = cfg.at("bias");
    const auto start = resolve_start(block.value("start", std::string("origin")), setup);
    std::uint64_t stream_id = 100;
    for (int i : block.value("i", std::vector<int>{0})) {
      note(to_json(bias_estimate(setup.problem, setup.set, start, setup.alpha, i,
                                 block.value("samples", 1000L),
                                 RandomStream(setup.seed, stream_id++))));
    }
  }
  if (cfg.contains("temporal")) {
    const auto& block = cfg.at("temporal");
    std::uint64_t stream_id = 200;
    for (const auto& name : block.value("starts", std::vector<std::string>{"origin"})) {
      json report = to_json(temporal_regularity_report(
          setup.problem, setup.set, resolve_start(name, setup), setup.alpha,
          block.value("samples", 1000L), RandomStream(setup.seed, stream_id++)));
      report["start"] = name;
      note(report);
    }
  }

  json out;
  out["config"] = cfg;
  out["alpha"] = setup.alpha;
  out["seed_offset"] = seed_offset;
  out["descriptor"] = to_json(setup.problem.descriptor);
  out["checks"] = std::move(checks);
  out["passed"] = ok;

  fs::create_directories(out_dir);
  const fs::path path = out_dir / "couple.json";
  std::ofstream file(path);
  if (!file) throw std::runtime_error("cannot write " + path.string());
  file << out.dump(2) << "\n";
  std::cout << "wrote " << path.string() << "\n";
  return ok ? 0 : 1;
}

int run_verify_command(const fs::path& config_path, const fs::path& out_dir) {
  const json cfg = load_json_file(config_path);
  const auto pspec = problem_spec_from_json(cfg.at("problem"));
  if (pspec.n < 1) throw std::runtime_error("verify: problem.n must be set");
  const auto problem = build_problem(pspec, pspec.n);
  const auto set = cfg.contains("set")
                       ? build_set(set_spec_from_json(cfg.at("set")), pspec.d)
                       : ConvexSet::origin_ball(pspec.d, pspec.radius);
  const auto report = verify_assumptions(problem, set, cfg.value("samples", 10000L),
                                         cfg.value("seed", std::uint64_t{1}));

  json out;
  out["config"] = cfg;
  out["descriptor"] = to_json(problem.descriptor);
  out["report"] = to_json(report);
  out["passed"] = report.passed();

  fs::create_directories(out_dir);
  const fs::path path = out_dir / "verify.json";
  std::ofstream file(path);
  if (!file) throw std::runtime_error("cannot write " + path.string());
  file << out.dump(2) << "\n";
  std::cout << (report.passed() ? "PASS" : "FAIL") << " assumptions: " << report.samples
            << " samples, " << report.violations.size() << " violations\n";
  std::cout << "wrote " << path.string() << "\n";
  return report.passed() ? 0 : 1;
}

int run_plotdata_command(const fs::path& config_path, const fs::path& out_dir,
                         fs::path csv_path) {
  if (csv_path.empty() && !config_path.empty()) {
    csv_path = load_json_file(config_path).value("csv", std::string());
  }
  if (csv_path.empty()) csv_path = out_dir / "sweep.csv";
  std::ifstream in(csv_path);
  if (!in) throw std::runtime_error("cannot open " + csv_path.string());
  const auto cells = parse_sweep_csv(in);
  fs::create_directories(out_dir);
  const fs::path path = out_dir / "plotdata.csv";
  std::ofstream file(path);
  if (!file) throw std::runtime_error("cannot write " + path.string());
  write_plotdata_csv(cells, file);
  std::cout << "wrote " << path.string() << " (" << cells.size() << " rows)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"finite-sum optimization experiment driver"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", csv_path;
  int jobs = 1;
  std::uint64_t seed_offset = 0;

  auto* sweep = app.add_subcommand("sweep", "run a rate sweep over (n, K) grids");
  sweep->add_option("--config", config_path, "experiment config json")->required();
  sweep->add_option("--out", out_dir, "output directory");
  sweep->add_option("--jobs", jobs, "worker threads");
  sweep->add_option("--seed-offset", seed_offset, "shift applied to every seed");

  auto* couple = app.add_subcommand("couple", "run the coupling lab checks");
  couple->add_option("--config", config_path, "coupling config json")->required();
  couple->add_option("--out", out_dir, "output directory");
  couple->add_option("--seed-offset", seed_offset, "shift applied to the lab seed");

  auto* verify = app.add_subcommand("verify", "audit certified problem constants");
  verify->add_option("--config", config_path, "verify config json")->required();
  verify->add_option("--out", out_dir, "output directory");

  auto* plotdata = app.add_subcommand("plotdata", "re-emit plot series from a sweep csv");
  plotdata->add_option("--config", config_path, "optional json naming the input {\"csv\": PATH}");
  plotdata->add_option("--out", out_dir, "output directory");
  plotdata->add_option("--csv", csv_path, "sweep csv to read (default <out>/sweep.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sweep->parsed()) return run_sweep_command(config_path, out_dir, jobs, seed_offset);
    if (couple->parsed()) return run_couple_command(config_path, out_dir, seed_offset);
    if (verify->parsed()) return run_verify_command(config_path, out_dir);
    if (plotdata->parsed()) return run_plotdata_command(config_path, out_dir, csv_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
