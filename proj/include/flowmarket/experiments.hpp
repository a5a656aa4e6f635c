#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "flowmarket/equilibria.hpp"
#include "flowmarket/json_io.hpp"
#include "flowmarket/rng.hpp"
#include "flowmarket/shaping.hpp"

namespace flowmarket {

// Experiment settings with built-in defaults; a config file overrides
// defaults field by field.
struct ExperimentConfig {
  int experiment = 1;
  std::uint64_t seed = 0;
  int n = 20;
  int edges = 30;
  double cap_low = 0.0;
  double cap_high = 2.0;
  std::vector<double> gamma_list{0.01, 0.1, 0.5, 1.0, 10.0};
  double a_low = 0.0;
  double a_high = 5.0;
  double theta1_low = 0.5;
  double theta1_high = 0.6;
  double theta2_low = 18.0;
  double theta2_high = 20.0;
  double infinite_cap = 1e6;
  double tolerance = 1e-8;   // solver KKT tolerance
  double verify_tol = 1e-6;  // verification/report tolerance
  int star_n = 5;
  double star_cap = 15.0;
  double star_endowment = 25.0;
  ParamBox box{0.5, 0.6, 18.0, 20.0};
  int trials = 100;
  std::string out_dir;
};

inline json config_to_json(const ExperimentConfig& c) {
  return json{{"experiment", c.experiment},
              {"seed", c.seed},
              {"n", c.n},
              {"edges", c.edges},
              {"cap_low", c.cap_low},
              {"cap_high", c.cap_high},
              {"gamma_list", c.gamma_list},
              {"a_low", c.a_low},
              {"a_high", c.a_high},
              {"theta1_low", c.theta1_low},
              {"theta1_high", c.theta1_high},
              {"theta2_low", c.theta2_low},
              {"theta2_high", c.theta2_high},
              {"infinite_cap", c.infinite_cap},
              {"tolerance", c.tolerance},
              {"verify_tol", c.verify_tol},
              {"star_n", c.star_n},
              {"star_cap", c.star_cap},
              {"star_endowment", c.star_endowment},
              {"box", box_to_json(c.box)},
              {"trials", c.trials}};
}

inline ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  c.experiment = j.value("experiment", c.experiment);
  c.seed = j.value("seed", c.seed);
  c.n = j.value("n", c.n);
  c.edges = j.value("edges", c.edges);
  c.cap_low = j.value("cap_low", c.cap_low);
  c.cap_high = j.value("cap_high", c.cap_high);
  c.gamma_list = j.value("gamma_list", c.gamma_list);
  c.a_low = j.value("a_low", c.a_low);
  c.a_high = j.value("a_high", c.a_high);
  c.theta1_low = j.value("theta1_low", c.theta1_low);
  c.theta1_high = j.value("theta1_high", c.theta1_high);
  c.theta2_low = j.value("theta2_low", c.theta2_low);
  c.theta2_high = j.value("theta2_high", c.theta2_high);
  c.infinite_cap = j.value("infinite_cap", c.infinite_cap);
  c.tolerance = j.value("tolerance", c.tolerance);
  c.verify_tol = j.value("verify_tol", c.verify_tol);
  c.star_n = j.value("star_n", c.star_n);
  c.star_cap = j.value("star_cap", c.star_cap);
  c.star_endowment = j.value("star_endowment", c.star_endowment);
  if (j.contains("box")) c.box = box_from_json(j.at("box"));
  c.trials = j.value("trials", c.trials);
  if (c.experiment < 1 || c.experiment > 4)
    throw std::invalid_argument("config: experiment id must be 1..4");
  return c;
}

// Agent parameters are drawn from a stream independent of the topology
// stream, so the same seed yields the same agents at every capacity scale.
inline std::vector<AgentProfile> sample_agents(const ExperimentConfig& cfg) {
  Rng rng(derive_seed(cfg.seed, 0x61676e74ULL));
  std::vector<AgentProfile> agents;
  agents.reserve(static_cast<std::size_t>(cfg.n));
  for (int i = 0; i < cfg.n; ++i) {
    const double t1 = rng.uniform(cfg.theta1_low, cfg.theta1_high);
    const double t2 = rng.uniform(cfg.theta2_low, cfg.theta2_high);
    const double a = rng.uniform(cfg.a_low, cfg.a_high);
    agents.emplace_back(a, QuadraticUtility(t1, t2));
  }
  return agents;
}

inline MarketInstance sample_instance(const ExperimentConfig& cfg, double cap_low,
                                      double cap_high) {
  return MarketInstance(generate_er(cfg.n, cfg.edges, cap_low, cap_high, cfg.seed),
                        sample_agents(cfg));
}

struct RunRecord {
  ExperimentConfig config;
  MarketInstance instance;
  std::optional<EquilibriumSolution> solution;
  std::optional<StandardEquilibrium> standard;
  std::optional<CEVerificationReport> verification;
  std::optional<SStarDiagnostics> membership;
  std::optional<EqualPriceValidation> validation;
  std::optional<double> gamma;
  double price_spread = 0.0;
  double q_inf_norm = 0.0;
  double e_l1_norm = 0.0;
  double max_xi = 0.0;
  KktResiduals kkt;
  int iterations = 0;
  double solve_ms = 0.0;
};

namespace detail {

inline RunRecord solve_into_record(ExperimentConfig cfg, MarketInstance inst) {
  RunRecord rec;
  rec.config = std::move(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  auto [sol, report] = solve_swe_report(inst, rec.config.tolerance);
  const auto t1 = std::chrono::steady_clock::now();
  rec.solve_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  rec.price_spread = equal_price_check(sol.lambda, rec.config.verify_tol).max_spread;
  rec.q_inf_norm = sol.q.cwiseAbs().maxCoeff();
  rec.e_l1_norm = sol.e.cwiseAbs().sum();
  rec.max_xi = sol.xi.size() > 0 ? sol.xi.maxCoeff() : 0.0;
  rec.kkt = report.kkt;
  rec.iterations = report.iterations;
  rec.solution = std::move(sol);
  rec.instance = std::move(inst);
  return rec;
}

}  // namespace detail

inline RunRecord run_experiment1(const ExperimentConfig& cfg) {
  if (cfg.experiment != 1) throw std::invalid_argument("run_experiment1: wrong experiment id");
  RunRecord rec = detail::solve_into_record(cfg, sample_instance(cfg, cfg.cap_low, cfg.cap_high));
  rec.verification = verify_ce(rec.instance, *rec.solution, cfg.verify_tol);
  return rec;
}

inline RunRecord run_experiment2(const ExperimentConfig& cfg) {
  if (cfg.experiment != 2) throw std::invalid_argument("run_experiment2: wrong experiment id");
  const FlowNetwork drawn = generate_er(cfg.n, cfg.edges, cfg.cap_low, cfg.cap_high, cfg.seed);
  const FlowNetwork uncapped(cfg.n, drawn.arcs(),
                             Vector::Constant(drawn.arc_count(), cfg.infinite_cap));
  RunRecord rec =
      detail::solve_into_record(cfg, MarketInstance(uncapped, sample_agents(cfg)));
  rec.standard = solve_standard_swe(rec.instance, cfg.tolerance);
  return rec;
}

inline std::vector<RunRecord> run_experiment3(const ExperimentConfig& cfg) {
  if (cfg.experiment != 3) throw std::invalid_argument("run_experiment3: wrong experiment id");
  std::vector<std::future<RunRecord>> futures;
  futures.reserve(cfg.gamma_list.size());
  for (const double gamma : cfg.gamma_list) {
    futures.push_back(std::async(std::launch::async, [cfg, gamma] {
      RunRecord rec = detail::solve_into_record(cfg, sample_instance(cfg, 0.0, gamma));
      rec.gamma = gamma;
      return rec;
    }));
  }
  std::vector<RunRecord> records;
  records.reserve(futures.size());
  for (auto& f : futures) records.push_back(f.get());
  return records;
}

inline RunRecord run_experiment4(const ExperimentConfig& cfg) {
  if (cfg.experiment != 4) throw std::invalid_argument("run_experiment4: wrong experiment id");
  const double mid1 = 0.5 * (cfg.box.theta1_min + cfg.box.theta1_max);
  const double mid2 = 0.5 * (cfg.box.theta2_min + cfg.box.theta2_max);
  std::vector<AgentProfile> agents;
  for (int i = 0; i < cfg.star_n; ++i)
    agents.emplace_back(cfg.star_endowment, QuadraticUtility(mid1, mid2));
  const FlowNetwork star =
      star_graph(cfg.star_n, Vector::Constant(2 * (cfg.star_n - 1), cfg.star_cap));
  RunRecord rec;
  rec.config = cfg;
  rec.instance = MarketInstance(star, std::move(agents));
  const auto t0 = std::chrono::steady_clock::now();
  rec.membership = sstar_membership(cfg.box, rec.instance);
  rec.validation =
      validate_equal_prices(cfg.box, rec.instance, cfg.trials, cfg.seed, cfg.verify_tol);
  const auto t1 = std::chrono::steady_clock::now();
  rec.solve_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  return rec;
}

namespace detail {

// Fixed 17-significant-digit decimal so every double round-trips exactly.
inline std::string csv_cell(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : path_(path), out_(path) {
    if (!out_) throw std::runtime_error("emit: cannot open " + path);
  }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i > 0) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
    if (!out_) throw std::runtime_error("emit: write failed for " + path_);
  }

 private:
  std::string path_;
  std::ofstream out_;
};

inline void write_agent_csv(const std::string& path, const MarketInstance& inst,
                            const EquilibriumSolution& sol) {
  CsvWriter csv(path);
  csv.row({"agent_id", "a", "theta1", "theta2", "x_swe", "e_swe", "lambda", "q"});
  for (int i = 0; i < inst.agent_count(); ++i) {
    const AgentProfile& ag = inst.agents[static_cast<std::size_t>(i)];
    csv.row({std::to_string(i + 1), csv_cell(ag.a), csv_cell(ag.utility.theta1()),
             csv_cell(ag.utility.theta2()), csv_cell(sol.x(i)), csv_cell(sol.e(i)),
             csv_cell(sol.lambda(i)), csv_cell(sol.q(i))});
  }
}

inline void write_standard_csv(const std::string& path, const StandardEquilibrium& eq) {
  CsvWriter csv(path);
  csv.row({"agent_id", "x_standard", "e_standard", "lambda_standard"});
  for (int i = 0; i < eq.x.size(); ++i)
    csv.row({std::to_string(i + 1), csv_cell(eq.x(i)), csv_cell(eq.e(i)),
             csv_cell(eq.lambda0)});
}

inline void write_trials_csv(const std::string& path, const EqualPriceValidation& val, int n) {
  CsvWriter csv(path);
  std::vector<std::string> header{"trial", "solved", "pass", "spread", "min_price"};
  for (int i = 0; i < n; ++i) header.push_back("lambda_" + std::to_string(i + 1));
  csv.row(header);
  for (const EqualPriceTrial& t : val.trials) {
    std::vector<std::string> cells{std::to_string(t.trial), t.solved ? "1" : "0",
                                   t.pass ? "1" : "0", csv_cell(t.spread),
                                   csv_cell(t.min_price)};
    for (int i = 0; i < n; ++i)
      cells.push_back(t.lambda.size() == n ? csv_cell(t.lambda(i)) : "nan");
    csv.row(cells);
  }
}

inline json membership_to_json(const SStarDiagnostics& d, const ParamBox& box) {
  return json{{"box", box_to_json(box)},
              {"cond1_lhs", d.cond1_lhs},
              {"cond1_rhs", d.cond1_rhs},
              {"cond2_margins", vector_to_json(d.cond2_margins)},
              {"endowment_margins", vector_to_json(d.endowment_margins)},
              {"in_sstar", d.in_sstar},
              {"failing_condition", d.failing_condition}};
}

inline std::string gamma_dir_name(double gamma) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "gamma_%g", gamma);
  return buf;
}

}  // namespace detail

// Writes the artifact set for one run: config.json, instance.json, and the
// experiment-specific files described in the README.
inline void emit(const RunRecord& rec, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const fs::path base(dir);
  save_json((base / "config.json").string(), config_to_json(rec.config));
  save_json((base / "instance.json").string(), instance_to_json(rec.instance));
  if (rec.solution) {
    save_json((base / "solution.json").string(), solution_to_json(*rec.solution));
    detail::write_agent_csv((base / "metrics.csv").string(), rec.instance, *rec.solution);
  }
  if (rec.standard)
    detail::write_standard_csv((base / "standard.csv").string(), *rec.standard);
  if (rec.verification)
    save_json((base / "verification.json").string(), verification_to_json(*rec.verification));
  if (rec.membership)
    save_json((base / "membership.json").string(),
              detail::membership_to_json(*rec.membership, rec.config.box));
  if (rec.validation)
    detail::write_trials_csv((base / "trials.csv").string(), *rec.validation,
                             rec.instance.agent_count());
}

// Gamma-sweep emission: one subdirectory per record plus a summary table.
// solve_ms is wall-clock time and is the only column that varies between
// reruns of the same seed.
inline void emit(const std::vector<RunRecord>& records, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const fs::path base(dir);
  detail::CsvWriter summary((base / "summary.csv").string());
  summary.row({"gamma", "q_inf_norm", "e_l1_norm", "max_xi", "solve_ms"});
  for (const RunRecord& rec : records) {
    const double gamma = rec.gamma.value_or(0.0);
    summary.row({detail::csv_cell(gamma), detail::csv_cell(rec.q_inf_norm),
                 detail::csv_cell(rec.e_l1_norm), detail::csv_cell(rec.max_xi),
                 detail::csv_cell(rec.solve_ms)});
    emit(rec, (base / detail::gamma_dir_name(gamma)).string());
  }
}

// Convenience driver used by the command-line tool.
inline void run_and_emit(const ExperimentConfig& cfg, const std::string& dir) {
  switch (cfg.experiment) {
    case 1: emit(run_experiment1(cfg), dir); break;
    case 2: emit(run_experiment2(cfg), dir); break;
    case 3: emit(run_experiment3(cfg), dir); break;
    case 4: emit(run_experiment4(cfg), dir); break;
    default: throw std::invalid_argument("run_and_emit: experiment id must be 1..4");
  }
}

}  // namespace flowmarket
