#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "msched/cli/commands.hpp"

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kInfeasible = 3, kIncompatible = 4 };

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<double> budget;
  std::string out;
  std::string oracle;
  std::string dataset;
  std::string checkpoint;
  std::string schedules;
};

void common_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "overrides the config seed");
  cmd->add_option("--budget-ms", f.budget, "single budget instead of the config list");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--oracle", f.oracle, "quality oracle")->check(CLI::IsMember({"lab", "synthetic"}));
}

msched::cli::RunConfig resolve(const Flags& f) {
  auto cfg = msched::cli::load_run_config(f.config);
  if (f.seed) cfg.seed = *f.seed;
  if (!f.out.empty()) cfg.out_dir = f.out;
  if (!f.oracle.empty()) cfg.oracle = msched::cli::parse_oracle_kind(f.oracle);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"model-schedule search for diffusion samplers"};
  app.require_subcommand(1);
  Flags f;

  auto* gen = app.add_subcommand("gen-data", "sample schedules and score them with the oracle");
  auto* trn = app.add_subcommand("train", "train the schedule predictor");
  auto* val = app.add_subcommand("validate", "report Kendall tau of a checkpoint");
  auto* sea = app.add_subcommand("search", "evolutionary search with the predictor as scorer");
  auto* base = app.add_subcommand("baseline", "single-model baselines per budget");
  auto* ev = app.add_subcommand("eval", "decode and score schedules from a file");
  auto* bf = app.add_subcommand("brute-force", "exhaustive search with the oracle");
  for (auto* c : {gen, trn, val, sea, base, ev, bf}) common_flags(c, f);
  for (auto* c : {trn, val}) c->add_option("--dataset", f.dataset, "dataset file (default <out>/dataset.txt)");
  for (auto* c : {val, sea}) c->add_option("--checkpoint", f.checkpoint, "checkpoint (default <out>/predictor.ckpt)");
  ev->add_option("schedules", f.schedules, "schedule file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    const auto cfg = resolve(f);
    auto& out = std::cout;
    if (*gen) msched::cli::cmd_gen_data(cfg, out);
    if (*trn) msched::cli::cmd_train(cfg, out, f.dataset);
    if (*val) msched::cli::cmd_validate(cfg, out, f.dataset, f.checkpoint);
    if (*sea) msched::cli::cmd_search(cfg, out, f.budget, f.checkpoint);
    if (*base) msched::cli::cmd_baseline(cfg, out, f.budget);
    if (*ev) msched::cli::cmd_eval(cfg, out, f.schedules);
    if (*bf) msched::cli::cmd_brute_force(cfg, out, f.budget);
  } catch (const msched::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const msched::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kConfig;
  } catch (const msched::InfeasibleBudget& e) {
    std::cerr << "infeasible budget: " << e.what() << '\n';
    return kInfeasible;
  } catch (const msched::IncompatibleCheckpoint& e) {
    std::cerr << "incompatible checkpoint: " << e.what() << '\n';
    return kIncompatible;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kOk;
}
