#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "reshuffle/harness.hpp"
#include "reshuffle/io.hpp"

using namespace reshuffle;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig config;
  config.problem.kind = "least_squares";
  config.problem.d = 2;
  config.problem.kappa = 2.0;
  config.problem.radius = 6.0;
  config.problem.seed = 3;
  config.set.kind = "ball";
  config.set.radius = 6.0;
  config.algorithms = {Algorithm::sgdo, Algorithm::sgd};
  config.regime = StepRegime::thm2();
  config.grid.n_values = {8};
  config.grid.K_values = {2, 4};
  config.seeds = {1, 2, 3};
  config.averaging = AveragingScheme::tail_epoch_starts;
  return config;
}

std::string csv_string(const std::vector<SweepCell>& cells) {
  std::ostringstream out;
  write_sweep_csv(cells, out);
  return out.str();
}

}  // namespace

TEST_CASE("log-log fit recovers an exact power law", "[harness]") {
  std::vector<std::pair<double, double>> pts;
  for (double x : {1.0, 2.0, 4.0, 8.0, 16.0}) pts.emplace_back(x, 7.0 * std::pow(x, -1.5));
  const auto fit = fit_rate(pts);
  REQUIRE(fit.slope == Catch::Approx(-1.5).epsilon(1e-12));
  REQUIRE(fit.intercept == Catch::Approx(std::log(7.0)).epsilon(1e-12));
  REQUIRE(fit.r_squared == Catch::Approx(1.0).epsilon(1e-12));
  REQUIRE(fit.stderr_slope == Catch::Approx(0.0).margin(1e-10));
  REQUIRE(fit.points == 5);
}

TEST_CASE("log-log fit validation and noise behavior", "[harness]") {
  REQUIRE_THROWS_AS(fit_rate({{1.0, 1.0}}), std::invalid_argument);
  REQUIRE_THROWS_AS(fit_rate({{1.0, 1.0}, {2.0, -1.0}}), std::invalid_argument);
  REQUIRE_THROWS_AS(fit_rate({{2.0, 1.0}, {2.0, 3.0}}), std::invalid_argument);

  const auto two = fit_rate({{1.0, 4.0}, {2.0, 1.0}});
  REQUIRE(two.slope == Catch::Approx(-2.0).epsilon(1e-12));
  REQUIRE(two.stderr_slope == 0.0);

  std::vector<std::pair<double, double>> noisy = {
      {1.0, 1.1}, {2.0, 0.48}, {4.0, 0.27}, {8.0, 0.121}};
  const auto fit = fit_rate(noisy);
  REQUIRE(fit.stderr_slope > 0.0);
  REQUIRE(fit.r_squared < 1.0);
  REQUIRE(fit.r_squared > 0.95);
}

TEST_CASE("sweep produces one ordered row per cell", "[harness]") {
  const auto config = small_config();
  const auto result = run_sweep(config);
  REQUIRE(result.cells.size() == 4);
  REQUIRE(result.cells[0].algorithm == "sgdo");
  REQUIRE(result.cells[0].K == 2);
  REQUIRE(result.cells[1].K == 4);
  REQUIRE(result.cells[2].algorithm == "sgd");
  for (const auto& cell : result.cells) {
    REQUIRE(cell.n == 8);
    REQUIRE(cell.seeds == 3);
    REQUIRE(cell.regime == "thm2");
    REQUIRE(std::isfinite(cell.mean_subopt));
    REQUIRE(cell.mean_subopt > 0.0);
    REQUIRE(cell.se_subopt >= 0.0);
    REQUIRE(cell.alpha ==
            step_size(config.regime, cell.n, cell.K, result.constants.at(cell.n)));
  }
  REQUIRE(result.descriptors.at(8).gram_condition == Catch::Approx(2.0).epsilon(1e-8));
  REQUIRE(result.diverged_runs.empty());
}

TEST_CASE("sweep output is byte-identical across job counts", "[harness]") {
  const auto config = small_config();
  const auto serial = run_sweep(config, 1);
  const auto threaded = run_sweep(config, 4);
  REQUIRE(serial.cells == threaded.cells);
  REQUIRE(csv_string(serial.cells) == csv_string(threaded.cells));
}

TEST_CASE("seed offset produces disjoint replications", "[harness]") {
  const auto config = small_config();
  const auto base = run_sweep(config, 1, 0);
  const auto shifted = run_sweep(config, 1, 1000);
  REQUIRE(base.cells != shifted.cells);
  REQUIRE(base.seed_offset == 0);
  REQUIRE(shifted.seed_offset == 1000);
}

TEST_CASE("sweep csv round-trips exactly", "[harness]") {
  const auto result = run_sweep(small_config());
  const std::string text = csv_string(result.cells);
  std::istringstream in(text);
  const auto parsed = parse_sweep_csv(in);
  REQUIRE(parsed == result.cells);
}

TEST_CASE("csv parser rejects malformed input", "[harness]") {
  std::istringstream bad_header("foo,bar\n");
  REQUIRE_THROWS_AS(parse_sweep_csv(bad_header), std::runtime_error);
  std::istringstream bad_row(std::string(sweep_csv_header()) + "\nsgdo,8,2\n");
  REQUIRE_THROWS_AS(parse_sweep_csv(bad_row), std::runtime_error);
}

TEST_CASE("diameter-regime sweep satisfies the explicit rate bound", "[harness]") {
  ExperimentConfig config;
  config.problem.kind = "least_squares";
  config.problem.d = 2;
  config.problem.kappa = 2.0;
  config.problem.radius = 2.0;
  config.problem.seed = 8;
  config.set.kind = "ball";
  config.set.radius = 2.0;
  config.algorithms = {Algorithm::sgdo};
  config.regime = StepRegime::thm3();
  config.grid.n_values = {16};
  config.grid.K_values = {4, 8, 16};
  config.seeds = {1, 2, 3, 4};
  config.averaging = AveragingScheme::full_average;
  config.thm3_check = true;

  const auto result = run_sweep(config);
  const auto report = check_thm3_bound(result);
  REQUIRE(report.check == "thm3_bound");
  REQUIRE(report.checked == 3);
  REQUIRE(report.violations == 0);
  REQUIRE(report.max_ratio <= 1.0);
  for (const auto& cell : result.cells) REQUIRE(cell.in_regime);
}

TEST_CASE("rate bound check demands the matching regime", "[harness]") {
  const auto result = run_sweep(small_config());
  REQUIRE_THROWS_AS(check_thm3_bound(result), std::invalid_argument);
}

TEST_CASE("diverged runs are counted, not averaged", "[harness]") {
  ExperimentConfig config;
  config.problem.kind = "least_squares";
  config.problem.d = 1;
  config.problem.kappa = 1.0;
  config.problem.radius = 5.0;
  config.problem.seed = 2;
  config.set.kind = "full_space";
  config.algorithms = {Algorithm::sgdo};
  config.regime = StepRegime::explicit_alpha(5.0);  // far beyond 2/L
  config.grid.n_values = {4};
  config.grid.K_values = {50};
  config.seeds = {1, 2};
  const auto result = run_sweep(config);
  REQUIRE(result.cells.size() == 1);
  REQUIRE(result.cells[0].seeds == 0);
  REQUIRE(std::isinf(result.cells[0].mean_subopt));
  REQUIRE(result.diverged_runs.at("sgdo/4/50") == 2);
}

TEST_CASE("config parsing from json", "[harness]") {
  const json j = json::parse(R"({
    "problem": {"kind": "least_squares", "d": 2, "kappa": 3.0, "radius": 4.0, "seed": 9},
    "set": {"kind": "ball", "radius": 4.0},
    "algorithms": ["sgdo", "sgd"],
    "regime": {"kind": "thm1", "l": 2.0},
    "grid": {"n": [16, 32], "K": [8, 16]},
    "seeds": {"base": 5, "count": 3},
    "averaging": "last_iterate",
    "thm3_check": false
  })");
  const auto config = experiment_config_from_json(j);
  REQUIRE(config.problem.kappa == 3.0);
  REQUIRE(config.problem.seed == 9);
  REQUIRE(config.set.radius == 4.0);
  REQUIRE(config.algorithms.size() == 2);
  REQUIRE(config.regime.kind == StepRegime::Kind::thm1);
  REQUIRE(config.regime.l == 2.0);
  REQUIRE(config.grid.n_values == std::vector<int>{16, 32});
  REQUIRE(config.seeds == std::vector<std::uint64_t>{5, 6, 7});
  REQUIRE(config.averaging == AveragingScheme::last_iterate);

  const json minimal = json::parse(R"({
    "problem": {"kind": "least_squares", "d": 1, "kappa": 1.0, "radius": 2.0, "seed": 1},
    "grid": {"n": [4], "K": [2]},
    "seeds": [1, 2]
  })");
  const auto defaults = experiment_config_from_json(minimal);
  REQUIRE(defaults.set.kind == "ball");
  REQUIRE(defaults.set.radius == 2.0);  // falls back to the problem radius
  REQUIRE(defaults.averaging == AveragingScheme::tail_epoch_starts);
  REQUIRE_THROWS_AS(experiment_config_from_json(json::object()), json::exception);
}

TEST_CASE("summary carries constants, fits, and gate solutions", "[harness]") {
  const auto result = run_sweep(small_config());
  const json summary = summarize(result);
  REQUIRE(summary.contains("config"));
  REQUIRE(summary["constants"].contains("8"));
  REQUIRE(summary["constants"]["8"]["mu"].get<double>() > 0.0);
  REQUIRE(summary["constants"]["8"].contains("thm1_min_epochs"));
  REQUIRE(summary["rate_fits_over_K"].contains("sgdo"));
  // Two K points: the all-cells fit exists, the in-regime fit (needs 3) is null.
  REQUIRE_FALSE(summary["rate_fits_over_K"]["sgdo"]["8"]["all_cells"].is_null());
  REQUIRE(summary["rate_fits_over_K"]["sgdo"]["8"]["in_regime"].is_null());
  // One n point per K: the component-count fits are present but empty.
  REQUIRE(summary["rate_fits_over_n"]["sgd"].contains("4"));
  REQUIRE(summary["rate_fits_over_n"]["sgd"]["4"]["all_cells"].is_null());
}

TEST_CASE("component-count fit mirrors the epoch fit on synthetic cells", "[harness]") {
  ExperimentResult result;
  result.config.algorithms = {Algorithm::sgdo};
  result.config.grid = {{4, 8, 16, 32}, {6}};
  for (int n : result.config.grid.n_values) {
    SweepCell cell;
    cell.algorithm = "sgdo";
    cell.n = n;
    cell.K = 6;
    cell.in_regime = n >= 8;
    cell.mean_subopt = 3.0 * std::pow(static_cast<double>(n), -1.0);
    result.cells.push_back(cell);
  }
  const auto fit = fit_rate_over_components(result, "sgdo", 6);
  REQUIRE(fit);
  REQUIRE(fit->slope == Catch::Approx(-1.0).epsilon(1e-12));
  REQUIRE(fit->points == 4);

  const auto gated = fit_rate_over_components(result, "sgdo", 6, true, 3);
  REQUIRE(gated);
  REQUIRE(gated->points == 3);

  REQUIRE_FALSE(fit_rate_over_components(result, "sgdo", 7));
  REQUIRE_FALSE(fit_rate_over_components(result, "sgd", 6));
}

TEST_CASE("emit writes the three artifacts and the csv re-parses", "[harness]") {
  const auto result = run_sweep(small_config());
  const auto dir = std::filesystem::temp_directory_path() / "reshuffle_emit_test";
  std::filesystem::remove_all(dir);
  const auto paths = emit_outputs(result, dir);
  REQUIRE(std::filesystem::exists(paths.sweep_csv));
  REQUIRE(std::filesystem::exists(paths.summary_json));
  REQUIRE(std::filesystem::exists(paths.plotdata_csv));

  std::ifstream in(paths.sweep_csv);
  const auto parsed = parse_sweep_csv(in);
  REQUIRE(parsed == result.cells);

  const json summary = load_json_file(paths.summary_json);
  REQUIRE(summary["config"]["problem"]["kind"] == "least_squares");
  std::filesystem::remove_all(dir);
}

TEST_CASE("trajectory csv lists every step with its epoch", "[harness]") {
  const auto config = small_config();
  const auto problem = build_problem(config.problem, 4);
  const auto set = build_set(config.set, problem.d);
  RecordOptions opts;
  opts.dense_scalars = true;
  const auto traj = run_sgdo(problem, set, 3, 0.05, RandomStream(9, 0), opts);

  std::ostringstream out;
  write_trajectory_csv(traj, out);
  std::istringstream lines(out.str());
  std::string line;
  std::getline(lines, line);
  REQUIRE(line == "epoch,step,suboptimality,distance_sq");
  std::vector<std::string> rows;
  while (std::getline(lines, line)) rows.push_back(line);
  REQUIRE(rows.size() == 12);
  REQUIRE(rows.front().rfind("1,0,", 0) == 0);
  REQUIRE(rows.back().rfind("3,3,", 0) == 0);
  REQUIRE(rows.front() == "1,0," + format_double(traj.dense_log.front().value) + "," +
                              format_double(traj.dense_log.front().distance_sq));

  const json meta = trajectory_metadata(traj, "thm2");
  REQUIRE(meta["algorithm"] == "sgdo");
  REQUIRE(meta["n"] == 4);
  REQUIRE(meta["K"] == 3);
  REQUIRE(meta["alpha"] == 0.05);
  REQUIRE(meta["regime"] == "thm2");
  REQUIRE(meta["seed"] == 9);

  const auto bare = run_sgdo(problem, set, 3, 0.05, RandomStream(9, 0));
  std::ostringstream sink;
  REQUIRE_THROWS_AS(write_trajectory_csv(bare, sink), std::logic_error);
}

TEST_CASE("problem descriptor serializes with nested constants", "[harness]") {
  const auto problem = build_problem(small_config().problem, 6);
  const json j = to_json(problem.descriptor);
  REQUIRE(j["kind"] == "least_squares");
  REQUIRE(j["n"] == 6);
  REQUIRE(j["d"] == 2);
  REQUIRE(j["constants"]["G"].get<double>() > 0.0);
  REQUIRE(j["constants"]["L"].get<double>() > 0.0);
  REQUIRE(j["constants"]["mu"].get<double>() > 0.0);
  REQUIRE(j["constants"]["kappa"].get<double>() >= 1.0);
}

TEST_CASE("double formatting survives a round trip", "[harness]") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 3.141592653589793, 1e17, 0.0}) {
    REQUIRE(parse_double(format_double(v)) == v);
  }
}

TEST_CASE("builders reject unknown kinds", "[harness]") {
  ProblemSpec p;
  p.kind = "quantum";
  REQUIRE_THROWS_AS(build_problem(p, 4), std::invalid_argument);
  SetSpec s;
  s.kind = "torus";
  REQUIRE_THROWS_AS(build_set(s, 2), std::invalid_argument);
  SetSpec box;
  box.kind = "box";
  box.lower = -1.0;
  box.upper = 2.0;
  const auto set = build_set(box, 3);
  REQUIRE(set.kind() == ConvexSet::Kind::box);
  REQUIRE(set.diameter() == Catch::Approx(3.0 * std::sqrt(3.0)).epsilon(1e-12));
}
