#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "reshuffle/harness.hpp"

namespace reshuffle {

using json = nlohmann::json;

// Shortest representation that round-trips a double exactly.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& s) {
  std::size_t pos = 0;
  const double v = std::stod(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("parse_double: trailing characters in '" + s + "'");
  return v;
}

// ---- config parsing ----

inline ProblemSpec problem_spec_from_json(const json& j) {
  ProblemSpec spec;
  spec.kind = j.value("kind", spec.kind);
  spec.n = j.value("n", spec.n);
  spec.d = j.value("d", spec.d);
  spec.kappa = j.value("kappa", spec.kappa);
  spec.lambda = j.value("lambda", spec.lambda);
  spec.radius = j.value("radius", spec.radius);
  spec.seed = j.value("seed", spec.seed);
  return spec;
}

inline SetSpec set_spec_from_json(const json& j) {
  SetSpec spec;
  spec.kind = j.value("kind", spec.kind);
  spec.radius = j.value("radius", spec.radius);
  spec.lower = j.value("lower", spec.lower);
  spec.upper = j.value("upper", spec.upper);
  return spec;
}

inline StepRegime regime_from_json(const json& j) {
  const std::string kind = j.value("kind", std::string("thm2"));
  if (kind == "thm1") return StepRegime::thm1(j.value("l", 1.0));
  if (kind == "thm2") return StepRegime::thm2(j.value("l", 1.0));
  if (kind == "thm3") return StepRegime::thm3();
  if (kind == "explicit") return StepRegime::explicit_alpha(j.value("alpha", 0.0));
  throw std::invalid_argument("regime_from_json: unknown kind '" + kind + "'");
}

inline std::vector<std::uint64_t> seeds_from_json(const json& j) {
  std::vector<std::uint64_t> seeds;
  if (j.is_array()) {
    for (const auto& v : j) seeds.push_back(v.get<std::uint64_t>());
  } else if (j.is_object()) {
    const auto base = j.value("base", std::uint64_t{1});
    const auto count = j.value("count", std::uint64_t{1});
    for (std::uint64_t s = 0; s < count; ++s) seeds.push_back(base + s);
  } else {
    throw std::invalid_argument("seeds_from_json: expected array or {base, count}");
  }
  return seeds;
}

inline ExperimentConfig experiment_config_from_json(const json& j) {
  ExperimentConfig config;
  config.problem = problem_spec_from_json(j.at("problem"));
  if (j.contains("set")) {
    config.set = set_spec_from_json(j.at("set"));
  } else {
    config.set.kind = "ball";
    config.set.radius = config.problem.radius;
  }
  if (j.contains("algorithms")) {
    config.algorithms.clear();
    for (const auto& a : j.at("algorithms")) {
      config.algorithms.push_back(algorithm_from_string(a.get<std::string>()));
    }
  }
  if (j.contains("regime")) config.regime = regime_from_json(j.at("regime"));
  config.grid.n_values = j.at("grid").at("n").get<std::vector<int>>();
  config.grid.K_values = j.at("grid").at("K").get<std::vector<int>>();
  config.seeds = seeds_from_json(j.at("seeds"));
  if (j.contains("averaging")) {
    config.averaging = averaging_from_string(j.at("averaging").get<std::string>());
  }
  config.thm3_check = j.value("thm3_check", false);
  return config;
}

inline json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  json j;
  in >> j;
  return j;
}

// ---- config echo / report serialization ----

inline json to_json(const ProblemSpec& s) {
  return {{"kind", s.kind},     {"n", s.n},         {"d", s.d},
          {"kappa", s.kappa},   {"lambda", s.lambda}, {"radius", s.radius},
          {"seed", s.seed}};
}

inline json to_json(const SetSpec& s) {
  return {{"kind", s.kind}, {"radius", s.radius}, {"lower", s.lower}, {"upper", s.upper}};
}

inline json to_json(const StepRegime& r) {
  return {{"kind", to_string(r.kind)}, {"l", r.l}, {"alpha", r.alpha}};
}

inline json to_json(const ExperimentConfig& c) {
  json algorithms = json::array();
  for (Algorithm a : c.algorithms) algorithms.push_back(to_string(a));
  return {{"problem", to_json(c.problem)},
          {"set", to_json(c.set)},
          {"algorithms", algorithms},
          {"regime", to_json(c.regime)},
          {"grid", {{"n", c.grid.n_values}, {"K", c.grid.K_values}}},
          {"seeds", c.seeds},
          {"averaging", to_string(c.averaging)},
          {"thm3_check", c.thm3_check}};
}

inline json to_json(const ProblemDescriptor& d) {
  return {{"kind", d.kind},
          {"n", d.n},
          {"d", d.d},
          {"seed", d.seed},
          {"radius", d.radius},
          {"constants", {{"G", d.G}, {"L", d.L}, {"mu", d.mu}, {"kappa", d.kappa}}},
          {"gram_condition", d.gram_condition},
          {"lambda", d.lambda}};
}

inline json to_json(const RateFit& f) {
  return {{"slope", f.slope},
          {"intercept", f.intercept},
          {"r_squared", f.r_squared},
          {"stderr_slope", f.stderr_slope},
          {"points", f.points}};
}

inline json to_json(const BoundWitness& w) {
  return {{"tag", w.tag}, {"sample", w.sample}, {"i", w.i}, {"lhs", w.lhs}, {"rhs", w.rhs}};
}

inline json to_json(const BoundReport& r) {
  json witnesses = json::array();
  for (const auto& w : r.witnesses) witnesses.push_back(to_json(w));
  json out = {{"check", r.check},         {"checked", r.checked},
              {"violations", r.violations}, {"max_ratio", r.max_ratio},
              {"passed", r.passed()},     {"witnesses", witnesses}};
  if (r.m > 0) {
    out["n"] = r.n;
    out["d"] = r.d;
    out["alpha"] = r.alpha;
    out["m"] = r.m;
  }
  return out;
}

inline json to_json(const WassersteinReport& r) {
  return {{"check", "wasserstein_coupling"},
          {"n", r.n},
          {"d", r.d},
          {"alpha", r.alpha},
          {"i", r.i},
          {"r", r.r},
          {"m", r.m},
          {"violations", r.violations},
          {"max_ratio", r.max_ratio},
          {"estimate", r.estimate},
          {"bound", r.bound},
          {"passed", r.violations == 0}};
}

inline json to_json(const BiasReport& r) {
  return {{"check", "bias"},
          {"n", r.n},
          {"d", r.d},
          {"alpha", r.alpha},
          {"i", r.i},
          {"m", r.m},
          {"bias", r.bias},
          {"bound", r.bound},
          {"standard_error", r.standard_error},
          {"passed", r.within_bound}};
}

inline json to_json(const AssumptionReport& r) {
  json witnesses = json::array();
  for (const auto& w : r.violations) {
    witnesses.push_back({{"check", w.check}, {"component", w.component},
                         {"lhs", w.lhs},     {"rhs", w.rhs}});
  }
  return {{"samples", r.samples},
          {"max_gradient_ratio", r.max_gradient_ratio},
          {"max_smoothness_ratio", r.max_smoothness_ratio},
          {"max_cocoercivity_ratio", r.max_cocoercivity_ratio},
          {"max_convexity_deficit", r.max_convexity_deficit},
          {"violations", witnesses},
          {"passed", r.passed()}};
}

// ---- sweep CSV ----

inline const char* sweep_csv_header() {
  return "algorithm,n,K,alpha,regime,in_regime,mean_subopt,se_subopt,seeds";
}

inline void write_sweep_csv(const std::vector<SweepCell>& cells, std::ostream& out) {
  out << sweep_csv_header() << "\n";
  for (const auto& c : cells) {
    out << c.algorithm << ',' << c.n << ',' << c.K << ',' << format_double(c.alpha) << ','
        << c.regime << ',' << (c.in_regime ? 1 : 0) << ',' << format_double(c.mean_subopt)
        << ',' << format_double(c.se_subopt) << ',' << c.seeds << "\n";
  }
}

inline std::vector<SweepCell> parse_sweep_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("parse_sweep_csv: empty input");
  if (line != sweep_csv_header()) {
    throw std::runtime_error("parse_sweep_csv: unexpected header '" + line + "'");
  }
  std::vector<SweepCell> cells;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 9) {
      throw std::runtime_error("parse_sweep_csv: expected 9 fields, got line '" + line + "'");
    }
    SweepCell c;
    c.algorithm = fields[0];
    c.n = std::stoi(fields[1]);
    c.K = std::stoi(fields[2]);
    c.alpha = parse_double(fields[3]);
    c.regime = fields[4];
    c.in_regime = fields[5] == "1";
    c.mean_subopt = parse_double(fields[6]);
    c.se_subopt = parse_double(fields[7]);
    c.seeds = std::stoi(fields[8]);
    cells.push_back(std::move(c));
  }
  return cells;
}

// ---- plot data ----

inline void write_plotdata_csv(const std::vector<SweepCell>& cells, std::ostream& out) {
  out << "series,n,K,mean_subopt,se_subopt\n";
  for (const auto& c : cells) {
    out << c.algorithm << '/' << "n" << c.n << ',' << c.n << ',' << c.K << ','
        << format_double(c.mean_subopt) << ',' << format_double(c.se_subopt) << "\n";
  }
}

// ---- trajectory export ----

inline json trajectory_metadata(const Trajectory& traj,
                                const std::string& regime = "explicit") {
  return {{"algorithm", to_string(traj.algorithm)},
          {"n", traj.n},
          {"K", traj.K},
          {"alpha", traj.alpha},
          {"regime", regime},
          {"seed", traj.seed}};
}

// Per-step scalar trail; needs a trajectory recorded with dense_scalars.
// Row t is step i = t mod n of epoch k = t div n + 1.
inline void write_trajectory_csv(const Trajectory& traj, std::ostream& out) {
  const auto expected =
      static_cast<std::size_t>(traj.n) * static_cast<std::size_t>(traj.K);
  if (traj.dense_log.size() != expected || expected == 0) {
    throw std::logic_error("write_trajectory_csv: trajectory has no dense scalar log");
  }
  out << "epoch,step,suboptimality,distance_sq\n";
  const auto n = static_cast<std::size_t>(traj.n);
  for (std::size_t t = 0; t < traj.dense_log.size(); ++t) {
    const auto& rec = traj.dense_log[t];
    out << (t / n + 1) << ',' << (t % n) << ',' << format_double(rec.value) << ','
        << format_double(rec.distance_sq) << "\n";
  }
}

// ---- summary assembly ----

inline json summarize(const ExperimentResult& result) {
  json summary;
  summary["config"] = to_json(result.config);
  summary["seed_offset"] = result.seed_offset;

  json constants = json::object();
  for (const auto& [n, c] : result.constants) {
    json entry = {{"G", c.G}, {"L", c.L}, {"mu", c.mu}, {"D", c.D}};
    const auto& desc = result.descriptors.at(n);
    entry["kappa"] = desc.kappa;
    entry["gram_condition"] = desc.gram_condition;
    if (c.mu > 0.0 && (result.config.regime.kind == StepRegime::Kind::thm1 ||
                       result.config.regime.kind == StepRegime::Kind::thm2)) {
      entry["thm1_min_epochs"] = thm1_min_epochs(n, c.L / c.mu, result.config.regime.l);
    }
    constants[std::to_string(n)] = std::move(entry);
  }
  summary["constants"] = std::move(constants);

  json fits = json::object();
  for (Algorithm alg : result.config.algorithms) {
    const std::string name = to_string(alg);
    json per_n = json::object();
    for (int n : result.config.grid.n_values) {
      json entry;
      if (const auto fit = fit_rate_over_epochs(result, name, n)) {
        entry["all_cells"] = to_json(*fit);
      } else {
        entry["all_cells"] = nullptr;
      }
      if (const auto fit = fit_rate_over_epochs(result, name, n, true, 3)) {
        entry["in_regime"] = to_json(*fit);
      } else {
        entry["in_regime"] = nullptr;
      }
      per_n[std::to_string(n)] = std::move(entry);
    }
    fits[name] = std::move(per_n);
  }
  summary["rate_fits_over_K"] = std::move(fits);

  json n_fits = json::object();
  for (Algorithm alg : result.config.algorithms) {
    const std::string name = to_string(alg);
    json per_K = json::object();
    for (int K : result.config.grid.K_values) {
      json entry;
      if (const auto fit = fit_rate_over_components(result, name, K)) {
        entry["all_cells"] = to_json(*fit);
      } else {
        entry["all_cells"] = nullptr;
      }
      if (const auto fit = fit_rate_over_components(result, name, K, true, 3)) {
        entry["in_regime"] = to_json(*fit);
      } else {
        entry["in_regime"] = nullptr;
      }
      per_K[std::to_string(K)] = std::move(entry);
    }
    n_fits[name] = std::move(per_K);
  }
  summary["rate_fits_over_n"] = std::move(n_fits);

  json diverged = json::object();
  for (const auto& [key, count] : result.diverged_runs) diverged[key] = count;
  summary["diverged_runs"] = std::move(diverged);

  if (result.config.thm3_check) {
    summary["thm3_bound"] = to_json(check_thm3_bound(result));
  }
  return summary;
}

struct OutputPaths {
  std::filesystem::path sweep_csv;
  std::filesystem::path summary_json;
  std::filesystem::path plotdata_csv;
};

inline OutputPaths emit_outputs(const ExperimentResult& result,
                                const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  OutputPaths paths{out_dir / "sweep.csv", out_dir / "summary.json",
                    out_dir / "plotdata.csv"};
  {
    std::ofstream out(paths.sweep_csv);
    if (!out) throw std::runtime_error("cannot write " + paths.sweep_csv.string());
    write_sweep_csv(result.cells, out);
  }
  {
    std::ofstream out(paths.summary_json);
    if (!out) throw std::runtime_error("cannot write " + paths.summary_json.string());
    out << summarize(result).dump(2) << "\n";
  }
  {
    std::ofstream out(paths.plotdata_csv);
    if (!out) throw std::runtime_error("cannot write " + paths.plotdata_csv.string());
    write_plotdata_csv(result.cells, out);
  }
  return paths;
}

}  // namespace reshuffle
