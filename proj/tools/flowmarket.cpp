#include <cstdio>
#include <cstdlib>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "flowmarket/experiments.hpp"
#include "flowmarket/json_io.hpp"

namespace {

// Seed precedence: --seed flag, then config file, then FLOWMARKET_SEED, then 0.
std::uint64_t env_seed(bool* found) {
  *found = false;
  const char* raw = std::getenv("FLOWMARKET_SEED");
  if (raw == nullptr || *raw == '\0') return 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(raw, &end, 10);
  if (end == raw || *end != '\0') {
    std::fprintf(stderr, "warning: ignoring non-numeric FLOWMARKET_SEED=%s\n", raw);
    return 0;
  }
  *found = true;
  return v;
}

int run_exp(int id, const std::string& out_dir, const std::string& config_path,
            bool seed_given, std::uint64_t seed_flag) {
  flowmarket::ExperimentConfig cfg;
  bool config_has_seed = false;
  if (!config_path.empty()) {
    const flowmarket::json j = flowmarket::load_json(config_path);
    config_has_seed = j.contains("seed");
    cfg = flowmarket::config_from_json(j);
  }
  cfg.experiment = id;
  if (seed_given) {
    cfg.seed = seed_flag;
  } else if (!config_has_seed) {
    bool from_env = false;
    const std::uint64_t es = env_seed(&from_env);
    if (from_env) cfg.seed = es;
  }
  cfg.out_dir = out_dir;
  flowmarket::run_and_emit(cfg, out_dir);
  std::printf("experiment %d (seed %llu) -> %s\n", id,
              static_cast<unsigned long long>(cfg.seed), out_dir.c_str());
  return 0;
}

int run_verify(const std::string& instance_path, const std::string& solution_path, double tol) {
  const flowmarket::MarketInstance inst =
      flowmarket::instance_from_json(flowmarket::load_json(instance_path));
  const flowmarket::EquilibriumSolution sol =
      flowmarket::solution_from_json(flowmarket::load_json(solution_path));
  const flowmarket::CEVerificationReport rep = flowmarket::verify_ce(inst, sol, tol);
  std::printf("%s\n", flowmarket::verification_to_json(rep).dump(2).c_str());
  return rep.overall() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Capacitated resource-market experiment harness"};
  app.require_subcommand(1);

  int id = 1;
  std::uint64_t seed_flag = 0;
  std::string out_dir;
  std::string config_path;
  CLI::App* exp = app.add_subcommand("exp", "Run one experiment and write its artifacts");
  exp->add_option("id", id, "Experiment id")->required()->check(CLI::Range(1, 4));
  CLI::Option* seed_opt = exp->add_option("--seed", seed_flag, "RNG seed");
  exp->add_option("--out", out_dir, "Output directory")->required();
  exp->add_option("--config", config_path, "JSON config overriding built-in defaults")
      ->check(CLI::ExistingFile);

  std::string instance_path, solution_path;
  double tol = 1e-6;
  CLI::App* verify =
      app.add_subcommand("verify", "Check a stored solution against its instance");
  verify->add_option("--instance", instance_path, "instance.json path")->required();
  verify->add_option("--solution", solution_path, "solution.json path")->required();
  verify->add_option("--tol", tol, "Residual tolerance");

  CLI11_PARSE(app, argc, argv);

  try {
    if (exp->parsed())
      return run_exp(id, out_dir, config_path, seed_opt->count() > 0, seed_flag);
    return run_verify(instance_path, solution_path, tol);
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 1;
  }
}
