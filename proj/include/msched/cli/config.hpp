#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "msched/cli/formats.hpp"
#include "msched/dpmlab/oracle.hpp"
#include "msched/errors.hpp"
#include "msched/evosearch/evolve.hpp"
#include "msched/predictor/predictor.hpp"
#include "msched/predictor/train.hpp"
#include "msched/schedspace/noise.hpp"

namespace msched::cli {

enum class OracleKind { lab, synthetic };

inline OracleKind parse_oracle_kind(std::string_view s) {
  if (s == "lab") return OracleKind::lab;
  if (s == "synthetic") return OracleKind::synthetic;
  throw ConfigError("unknown oracle '" + std::string(s) + "' (expected lab or synthetic)");
}

inline std::string_view to_string(OracleKind k) { return k == OracleKind::lab ? "lab" : "synthetic"; }

struct MixtureConfig {
  std::size_t components = 8;
  double radius = 4.0;
  double scale = 0.3;
};

/// Everything a command needs. Sub-seeds are derived from `seed`: data generation and
/// training use it directly, search run k uses seed + k.
struct RunConfig {
  SamplerKind sampler = SamplerKind::ddim;
  std::size_t length = 8;
  std::string zoo_path;
  OracleKind oracle = OracleKind::lab;
  NoiseSchedule noise{};
  double t_end = kDefaultTimeEnd;

  lab::LabSettings lab{};
  MixtureConfig mixture{};
  double discretization = 1.0;
  double empty_penalty = 100.0;

  std::size_t data_count = 2000;
  std::vector<lab::SamplingFamily> families;  // empty: default_families()

  PredictorConfig predictor{};  // sampler, length, model_count and noise are filled from the run
  TrainConfig train{};  // seed comes from `seed`
  double train_fraction = 0.7;
  SearchConfig search{};
  std::size_t search_runs = 3;

  std::vector<double> budgets;
  std::uint64_t seed = 0;
  std::string out_dir = "out";

  std::filesystem::path out_path(const std::string& name) const { return std::filesystem::path(out_dir) / name; }

  void validate() const {
    if (length == 0) throw ConfigError("length must be positive");
    if (sampler == SamplerKind::dpm_solver && length % kSolverGroup != 0) {
      throw ConfigError("length must be divisible by 3 for dpm-solver");
    }
    if (zoo_path.empty()) throw ConfigError("config names no zoo file");
    if (!std::filesystem::exists(zoo_path)) throw ConfigError("zoo file '" + zoo_path + "' does not exist");
    for (double b : budgets) {
      if (!(b > 0.0) || !std::isfinite(b)) throw ConfigError("budgets must be positive");
    }
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction must be in (0, 1)");
    if (!search_runs) throw ConfigError("search runs must be positive");
    if (!(t_end > 0.0 && t_end < noise.horizon())) throw ConfigError("t_end must lie inside (0, horizon)");
    train.validate();
  }
};

/// Families used when the config lists none: uniform, sparse, dense, and one that
/// favours each model.
inline std::vector<lab::SamplingFamily> default_families(std::size_t n) {
  const double m = static_cast<double>(n);
  std::vector<lab::SamplingFamily> out;
  out.push_back({"uniform", std::vector<double>(n + 1, 1.0 / (m + 1.0))});
  auto skewed = [&](std::string name, double p0) {
    std::vector<double> p(n + 1, (1.0 - p0) / m);
    p[0] = p0;
    out.push_back({std::move(name), std::move(p)});
  };
  skewed("sparse", 0.6);
  skewed("dense", 0.1);
  if (n > 1) {
    for (std::size_t i = 1; i <= n; ++i) {
      std::vector<double> p(n + 1, 0.2 / (m - 1.0));
      p[0] = 0.3;
      p[i] = 0.5;
      out.push_back({"prefer" + std::to_string(i), std::move(p)});
    }
  }
  return out;
}

namespace detail {

template <class T>
void read_opt(const nlohmann::json& j, const char* key, T& dst) {
  if (!j.contains(key)) return;
  try {
    dst = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config field '") + key + "': " + e.what());
  }
}

inline void check_keys(const nlohmann::json& j, const std::string& where, std::initializer_list<const char*> known) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* n : known) ok = ok || k == n;
    if (!ok) throw ConfigError("unknown config field '" + where + "." + k + "'");
  }
}

}  // namespace detail

/// Parses a run configuration. Relative zoo paths resolve against `base_dir`.
inline RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  using detail::check_keys;
  using detail::read_opt;
  check_keys(j, "config",
             {"sampler", "length", "zoo", "oracle", "noise", "lab", "synthetic", "data", "predictor", "train", "search",
              "budgets", "seed", "out"});
  RunConfig c;
  std::string s;
  if (j.contains("sampler")) {
    read_opt(j, "sampler", s);
    c.sampler = parse_sampler_kind(s);
  }
  read_opt(j, "length", c.length);
  read_opt(j, "zoo", c.zoo_path);
  if (!c.zoo_path.empty() && std::filesystem::path(c.zoo_path).is_relative() && !base_dir.empty()) {
    c.zoo_path = (base_dir / c.zoo_path).string();
  }
  if (j.contains("oracle")) {
    read_opt(j, "oracle", s);
    c.oracle = parse_oracle_kind(s);
  }
  if (j.contains("noise")) {
    const auto& n = j.at("noise");
    check_keys(n, "noise", {"beta_min", "beta_max", "horizon", "t_end"});
    double bmin = c.noise.beta_min(), bmax = c.noise.beta_max(), horizon = c.noise.horizon();
    read_opt(n, "beta_min", bmin);
    read_opt(n, "beta_max", bmax);
    read_opt(n, "horizon", horizon);
    read_opt(n, "t_end", c.t_end);
    c.noise = NoiseSchedule(bmin, bmax, horizon);
  }
  if (j.contains("lab")) {
    const auto& l = j.at("lab");
    check_keys(l, "lab", {"n_samples", "n_reference", "noise_seed", "model_seed", "reference_seed", "mixture"});
    read_opt(l, "n_samples", c.lab.n_samples);
    read_opt(l, "n_reference", c.lab.n_reference);
    read_opt(l, "noise_seed", c.lab.noise_seed);
    read_opt(l, "model_seed", c.lab.model_seed);
    read_opt(l, "reference_seed", c.lab.reference_seed);
    if (l.contains("mixture")) {
      const auto& m = l.at("mixture");
      check_keys(m, "lab.mixture", {"components", "radius", "scale"});
      read_opt(m, "components", c.mixture.components);
      read_opt(m, "radius", c.mixture.radius);
      read_opt(m, "scale", c.mixture.scale);
    }
  }
  if (j.contains("synthetic")) {
    const auto& y = j.at("synthetic");
    check_keys(y, "synthetic", {"discretization", "empty_penalty"});
    read_opt(y, "discretization", c.discretization);
    read_opt(y, "empty_penalty", c.empty_penalty);
  }
  if (j.contains("data")) {
    const auto& d = j.at("data");
    check_keys(d, "data", {"count", "families"});
    read_opt(d, "count", c.data_count);
    if (d.contains("families")) {
      for (const auto& f : d.at("families")) {
        check_keys(f, "data.families[]", {"name", "probs"});
        lab::SamplingFamily fam;
        read_opt(f, "name", fam.name);
        read_opt(f, "probs", fam.probs);
        if (fam.name.empty() || fam.name.find_first_of(" \t") != std::string::npos) {
          throw ConfigError("family names must be non-empty and contain no whitespace");
        }
        c.families.push_back(std::move(fam));
      }
    }
  }
  if (j.contains("predictor")) {
    const auto& p = j.at("predictor");
    check_keys(p, "predictor",
               {"model_embed_dim", "timestep_embed_dim", "solver_embed_dim", "hidden_size", "recurrent_layers",
                "head_layers", "head_width", "time_scale"});
    read_opt(p, "model_embed_dim", c.predictor.model_embed_dim);
    read_opt(p, "timestep_embed_dim", c.predictor.timestep_embed_dim);
    read_opt(p, "solver_embed_dim", c.predictor.solver_embed_dim);
    read_opt(p, "hidden_size", c.predictor.hidden_size);
    read_opt(p, "recurrent_layers", c.predictor.recurrent_layers);
    read_opt(p, "head_layers", c.predictor.head_layers);
    read_opt(p, "head_width", c.predictor.head_width);
    read_opt(p, "time_scale", c.predictor.time_scale);
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    check_keys(t, "train",
               {"margin", "compare_ratio", "threshold", "batch_size", "learning_rate", "epochs", "train_fraction"});
    read_opt(t, "margin", c.train.margin);
    read_opt(t, "compare_ratio", c.train.compare_ratio);
    read_opt(t, "threshold", c.train.threshold);
    read_opt(t, "batch_size", c.train.batch_size);
    read_opt(t, "learning_rate", c.train.learning_rate);
    read_opt(t, "epochs", c.train.epochs);
    read_opt(t, "train_fraction", c.train_fraction);
  }
  if (j.contains("search")) {
    const auto& e = j.at("search");
    check_keys(e, "search",
               {"epochs", "candidate_parents", "iter", "next_generation_cap", "population_cap", "mutation_rate",
                "init_cost_floor_fraction", "patience", "runs"});
    read_opt(e, "epochs", c.search.epochs);
    read_opt(e, "candidate_parents", c.search.candidate_parents);
    read_opt(e, "iter", c.search.iter);
    read_opt(e, "next_generation_cap", c.search.next_generation_cap);
    read_opt(e, "population_cap", c.search.population_cap);
    read_opt(e, "mutation_rate", c.search.mutation_rate);
    read_opt(e, "init_cost_floor_fraction", c.search.init_cost_floor_fraction);
    read_opt(e, "patience", c.search.patience);
    read_opt(e, "runs", c.search_runs);
  }
  read_opt(j, "budgets", c.budgets);
  read_opt(j, "seed", c.seed);
  read_opt(j, "out", c.out_dir);
  c.lab.t_end = c.t_end;
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(f);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  return parse_run_config(j, std::filesystem::path(path).parent_path());
}

}  // namespace msched::cli
