#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "msched/cli/config.hpp"
#include "msched/cli/formats.hpp"
#include "msched/dpmlab/neural.hpp"
#include "msched/dpmlab/oracle.hpp"
#include "msched/errors.hpp"
#include "msched/evosearch/brute_force.hpp"
#include "msched/evosearch/evolve.hpp"
#include "msched/predictor/checkpoint.hpp"
#include "msched/predictor/ranking.hpp"
#include "msched/predictor/train.hpp"
#include "msched/schedspace/plan.hpp"

namespace msched::cli {

inline const char* const kDatasetFile = "dataset.txt";
inline const char* const kCheckpointFile = "predictor.ckpt";

/// Loaded zoo plus the quality oracle the run asks for.
struct Workspace {
  ZooFile zoo;
  lab::QualityOracle oracle;
  std::shared_ptr<const lab::LabOracle> lab;  // set for the lab oracle
  std::string oracle_tag;                     // printed next to every true quality
};

inline lab::DenoiserZoo build_denoisers(const RunConfig& cfg, const ZooFile& zf, const lab::GaussianMixture& gm) {
  lab::DenoiserZoo out;
  for (std::size_t i = 0; i < zf.meta.size(); ++i) {
    const auto& z = zf.zoo.models()[i];
    const auto& m = zf.meta[i];
    lab::Denoiser d;
    switch (m.kind) {
      case lab::DenoiserKind::exact: d = lab::Denoiser::exact_model(z.name, z.latency_ms); break;
      case lab::DenoiserKind::perturbed: d = lab::Denoiser::perturbed_model(z.name, z.latency_ms, m.bias, m.gain); break;
      case lab::DenoiserKind::neural: {
        lab::NeuralTrainConfig nc;
        nc.width = m.width;
        nc.t_min = cfg.t_end;
        nc.seed = cfg.lab.model_seed + static_cast<std::uint64_t>(z.id);
        d = lab::neural_model(z.name, z.latency_ms, lab::train_neural_eps(gm, cfg.noise, nc).first);
        break;
      }
    }
    d.direction = m.direction;
    out.push_back(std::move(d));
  }
  return out;
}

inline Workspace open_workspace(const RunConfig& cfg) {
  cfg.validate();
  Workspace ws{read_zoo(cfg.zoo_path), {}, nullptr, {}};
  std::ostringstream tag;
  if (cfg.oracle == OracleKind::lab) {
    if (cfg.sampler != SamplerKind::ddim) throw ConfigError("the lab oracle only runs ddim schedules");
    auto gm = lab::GaussianMixture::ring(cfg.mixture.components, cfg.mixture.radius, cfg.mixture.scale);
    auto dz = build_denoisers(cfg, ws.zoo, gm);
    ws.lab = std::make_shared<const lab::LabOracle>(std::move(gm), std::move(dz), cfg.noise, cfg.lab);
    ws.oracle = [lab = ws.lab](const ModelSchedule& q) { return lab->quality(q); };
    tag << "lab energy distance, n=" << cfg.lab.n_samples << " noise_seed=" << cfg.lab.noise_seed
        << " model_seed=" << cfg.lab.model_seed << " reference_seed=" << cfg.lab.reference_seed;
  } else {
    lab::SyntheticOracle o;
    o.noise = cfg.noise;
    o.t_end = cfg.t_end;
    o.discretization = cfg.discretization;
    o.empty_penalty = cfg.empty_penalty;
    for (std::size_t i = 0; i < ws.zoo.meta.size(); ++i) {
      if (!ws.zoo.meta[i].error) {
        throw ConfigError("synthetic oracle needs error=... for model " + std::to_string(i + 1) + " in the zoo file");
      }
      o.model_error.push_back(*ws.zoo.meta[i].error);
    }
    ws.oracle = o;
    tag << "synthetic, discretization=" << cfg.discretization;
  }
  ws.oracle_tag = tag.str();
  return ws;
}

inline PredictorConfig predictor_config(const RunConfig& cfg, std::size_t model_count) {
  PredictorConfig p = cfg.predictor;
  p.sampler = cfg.sampler;
  p.length = cfg.length;
  p.model_count = model_count;
  p.noise = cfg.noise;
  p.t_end = cfg.t_end;
  return p;
}

inline std::string fixed(double v, int digits = 6) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

inline void ensure_out_dir(const RunConfig& cfg) {
  std::error_code ec;
  std::filesystem::create_directories(cfg.out_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + cfg.out_dir + "': " + ec.message());
}

// ---- gen-data ---------------------------------------------------------------

inline std::vector<ScheduleRecord> cmd_gen_data(const RunConfig& cfg, std::ostream& out) {
  const auto ws = open_workspace(cfg);
  const auto families = cfg.families.empty() ? default_families(ws.zoo.zoo.size()) : cfg.families;
  const auto records = lab::generate_training_data(ws.zoo.zoo.size(), cfg.length, cfg.sampler, ws.oracle, families,
                                                   cfg.data_count, cfg.seed);
  ensure_out_dir(cfg);
  const auto path = cfg.out_path(kDatasetFile).string();
  write_dataset(path, records);

  out << "wrote " << records.size() << " records to " << path << '\n';
  out << "oracle: " << ws.oracle_tag << '\n';
  std::map<std::string, std::size_t> per_family;
  for (const auto& r : records) ++per_family[r.family];
  for (const auto& f : families) out << "  family " << f.name << ": " << per_family[f.name] << '\n';
  if (records.empty()) return records;

  double lo = records[0].quality, hi = lo;
  for (const auto& r : records) {
    lo = std::min(lo, r.quality);
    hi = std::max(hi, r.quality);
  }
  constexpr std::size_t bins = 10;
  std::vector<std::size_t> hist(bins, 0);
  const double w = hi > lo ? (hi - lo) / bins : 1.0;
  for (const auto& r : records) ++hist[std::min(bins - 1, static_cast<std::size_t>((r.quality - lo) / w))];
  out << "quality histogram (min " << fixed(lo) << ", max " << fixed(hi) << "):\n";
  const std::size_t peak = *std::max_element(hist.begin(), hist.end());
  for (std::size_t b = 0; b < bins; ++b) {
    out << "  [" << fixed(lo + w * b) << ", " << fixed(lo + w * (b + 1)) << ") " << std::setw(6) << hist[b] << ' '
        << std::string(peak ? hist[b] * 40 / peak : 0, '#') << '\n';
  }
  return records;
}

// ---- train / validate -------------------------------------------------------

struct Split {
  std::vector<ScheduleRecord> train;
  std::vector<ScheduleRecord> validation;
};

/// Deterministic shuffled split; the first round(fraction * n) records train.
inline Split split_dataset(const std::vector<ScheduleRecord>& data, double fraction, std::uint64_t seed) {
  if (data.size() < 4) throw ConfigError("dataset needs at least 4 records, got " + std::to_string(data.size()));
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed ^ 0x5851f42d4c957f2dull);
  std::shuffle(idx.begin(), idx.end(), rng);
  auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(data.size())));
  n_train = std::clamp<std::size_t>(n_train, 2, data.size() - 2);
  Split s;
  for (std::size_t k = 0; k < idx.size(); ++k) (k < n_train ? s.train : s.validation).push_back(data[idx[k]]);
  return s;
}

inline double tau_on(const SchedulePredictor& p, const std::vector<ScheduleRecord>& rs) {
  std::vector<ModelSchedule> qs;
  std::vector<double> truth;
  for (const auto& r : rs) {
    qs.push_back(r.schedule);
    truth.push_back(r.quality);
  }
  return kendall_tau(p.predict_batch(qs), truth);
}

struct TrainReport {
  double train_tau = 0.0;
  double validation_tau = 0.0;
  std::size_t train_size = 0;
  std::size_t validation_size = 0;
  std::vector<double> epoch_loss;
};

inline std::string dataset_path(const RunConfig& cfg, const std::string& override_path) {
  return override_path.empty() ? cfg.out_path(kDatasetFile).string() : override_path;
}

inline std::string checkpoint_path(const RunConfig& cfg, const std::string& override_path) {
  return override_path.empty() ? cfg.out_path(kCheckpointFile).string() : override_path;
}

inline TrainReport cmd_train(const RunConfig& cfg, std::ostream& out, const std::string& dataset = {}) {
  cfg.validate();
  const auto zf = read_zoo(cfg.zoo_path);
  const auto data = read_dataset(dataset_path(cfg, dataset));
  for (const auto& r : data) {
    if (r.schedule.sampler != cfg.sampler || r.schedule.length() != cfg.length) {
      throw ConfigError("dataset record does not match the configured sampler and length");
    }
    validate(r.schedule, zf.zoo.size());
  }
  const auto split = split_dataset(data, cfg.train_fraction, cfg.seed);
  SchedulePredictor p(predictor_config(cfg, zf.zoo.size()), cfg.seed);
  auto tc = cfg.train;
  tc.seed = cfg.seed;
  const auto res = train(p, split.train, tc);
  ensure_out_dir(cfg);
  const auto ck = cfg.out_path(kCheckpointFile).string();
  save_checkpoint(ck, p, zf.zoo.fingerprint());

  TrainReport rep{tau_on(p, split.train), tau_on(p, split.validation), split.train.size(), split.validation.size(),
                  res.epoch_loss};
  out << "trained on " << rep.train_size << " records, validated on " << rep.validation_size << '\n';
  for (std::size_t e = 0; e < res.epoch_loss.size(); ++e) {
    if (e % 10 == 0 || e + 1 == res.epoch_loss.size()) out << "  epoch " << e << " loss " << fixed(res.epoch_loss[e]) << '\n';
  }
  out << "train tau " << fixed(rep.train_tau, 4) << '\n';
  out << "validation tau " << fixed(rep.validation_tau, 4) << '\n';
  out << "checkpoint " << ck << '\n';
  return rep;
}

inline TrainReport cmd_validate(const RunConfig& cfg, std::ostream& out, const std::string& dataset = {},
                                const std::string& checkpoint = {}) {
  cfg.validate();
  const auto zf = read_zoo(cfg.zoo_path);
  const auto ck = load_checkpoint(checkpoint_path(cfg, checkpoint));
  ck.require_zoo(zf.zoo);
  const auto data = read_dataset(dataset_path(cfg, dataset));
  const auto split = split_dataset(data, cfg.train_fraction, cfg.seed);
  TrainReport rep{tau_on(*ck.predictor, split.train), tau_on(*ck.predictor, split.validation), split.train.size(),
                  split.validation.size(), {}};
  out << "train tau " << fixed(rep.train_tau, 4) << " (" << rep.train_size << " records)\n";
  out << "validation tau " << fixed(rep.validation_tau, 4) << " (" << rep.validation_size << " records)\n";
  std::map<std::string, std::vector<ScheduleRecord>> by_family;
  for (const auto& r : split.validation) by_family[r.family].push_back(r);
  for (const auto& [name, rs] : by_family) {
    if (rs.size() >= 2) out << "  family " << (name.empty() ? "-" : name) << " tau " << fixed(tau_on(*ck.predictor, rs), 4) << '\n';
  }
  return rep;
}

// ---- search -----------------------------------------------------------------

struct SearchRun {
  std::uint64_t seed;
  ModelSchedule best;
  double cost;
  double predicted;
  double quality;
};

struct SearchReport {
  double budget;
  std::vector<SearchRun> runs;
  double mean_quality;
  double std_quality;  // sample standard deviation over runs; 0 for one run
};

inline std::vector<double> budgets_for(const RunConfig& cfg, std::optional<double> budget) {
  if (budget) return {*budget};
  if (cfg.budgets.empty()) throw ConfigError("no budget given: pass --budget-ms or list budgets in the config");
  return cfg.budgets;
}

inline void print_plan(std::ostream& out, const StepPlan& plan, const ModelZoo& zoo) {
  // Printed from the noise side to the data side, the order steps execute in.
  if (plan.sampler == SamplerKind::ddim) {
    for (std::size_t k = plan.ddim.size(); k-- > 0;) {
      const auto& s = plan.ddim[k];
      out << "  step " << plan.ddim.size() - k << ": t=" << fixed(s.t) << " model " << s.model << " ("
          << zoo.model(s.model).name << ")\n";
    }
  } else {
    for (std::size_t k = plan.solver.size(); k-- > 0;) {
      const auto& s = plan.solver[k];
      out << "  step " << plan.solver.size() - k << ": order " << s.order << " t=" << fixed(s.t_noise) << "->"
          << fixed(s.t_data) << " models [";
      for (std::size_t j = 0; j < s.models.size(); ++j) out << (j ? "," : "") << s.models[j];
      out << "]\n";
    }
  }
  if (plan.empty()) out << "  (no steps)\n";
}

inline std::vector<SearchReport> cmd_search(const RunConfig& cfg, std::ostream& out, std::optional<double> budget = {},
                                            const std::string& checkpoint = {}) {
  const auto ws = open_workspace(cfg);
  const auto ck = load_checkpoint(checkpoint_path(cfg, checkpoint));
  ck.require_zoo(ws.zoo.zoo);
  const auto& pc = ck.predictor->config();
  if (pc.sampler != cfg.sampler || pc.length != cfg.length) {
    throw IncompatibleCheckpoint("checkpoint was trained for " + std::string(msched::to_string(pc.sampler)) + " L=" +
                                 std::to_string(pc.length));
  }
  const SchedulePredictor& predictor = *ck.predictor;
  const BatchScorer scorer = [&predictor](std::span<const ModelSchedule> qs) { return predictor.predict_batch(qs); };

  std::vector<SearchReport> reports;
  for (double c : budgets_for(cfg, budget)) {
    SearchReport rep{c, {}, 0.0, 0.0};
    out << "budget " << fixed(c, 3) << " ms\n";
    for (std::size_t k = 0; k < cfg.search_runs; ++k) {
      auto sc = cfg.search;
      sc.budget = Budget{c};
      sc.seed = cfg.seed + k;
      const auto res = evolve(scorer, ws.zoo.zoo, cfg.length, cfg.sampler, sc);
      const SearchRun run{sc.seed, res.best, res.cost, res.score, ws.oracle(res.best)};
      out << "  seed " << run.seed << ": " << msched::to_string(run.best.sampler) << ' ' << run.best.length() << ' '
          << format_entries(run.best) << " cost " << fixed(run.cost, 3) << " predicted " << fixed(run.predicted)
          << " quality " << fixed(run.quality) << '\n';
      rep.runs.push_back(run);
    }
    double mean = 0.0;
    for (const auto& r : rep.runs) mean += r.quality;
    mean /= static_cast<double>(rep.runs.size());
    double var = 0.0;
    for (const auto& r : rep.runs) var += (r.quality - mean) * (r.quality - mean);
    rep.mean_quality = mean;
    rep.std_quality = rep.runs.size() > 1 ? std::sqrt(var / static_cast<double>(rep.runs.size() - 1)) : 0.0;
    out << "  quality " << fixed(rep.mean_quality) << " +- " << fixed(rep.std_quality) << " over " << rep.runs.size()
        << " seeds (" << ws.oracle_tag << ")\n";
    reports.push_back(std::move(rep));
  }
  return reports;
}

// ---- baseline ---------------------------------------------------------------

struct BaselineRow {
  int model;
  std::string name;
  double latency;
  std::size_t steps;  // 0 marks an infeasible row
  double cost;
  double quality;
};

struct BaselineReport {
  double budget;
  std::vector<BaselineRow> rows;
  std::optional<std::size_t> best;  // index into rows
};

/// Largest S with S * latency <= budget.
inline std::size_t baseline_steps(double budget, double latency) {
  auto s = static_cast<std::size_t>(std::floor(budget / latency));
  while (static_cast<double>(s + 1) * latency <= budget) ++s;
  while (s > 0 && static_cast<double>(s) * latency > budget) --s;
  return s;
}

/// Single-model schedule with `steps` calls on its own grid. DPM-Solver calls fill
/// groups of three from the noise side.
inline ModelSchedule single_model_schedule(int model, std::size_t steps, SamplerKind sampler) {
  if (sampler == SamplerKind::ddim) return {std::vector<int>(steps, model), sampler};
  const std::size_t len = (steps + kSolverGroup - 1) / kSolverGroup * kSolverGroup;
  ModelSchedule q{std::vector<int>(len, 0), sampler};
  for (std::size_t k = 0; k < steps; ++k) q.entries[len - 1 - k] = model;
  return q;
}

inline std::vector<BaselineReport> cmd_baseline(const RunConfig& cfg, std::ostream& out,
                                                std::optional<double> budget = {}) {
  const auto ws = open_workspace(cfg);
  std::vector<BaselineReport> reports;
  for (double c : budgets_for(cfg, budget)) {
    BaselineReport rep{c, {}, std::nullopt};
    for (const auto& m : ws.zoo.zoo.models()) {
      BaselineRow row{m.id, m.name, m.latency_ms, baseline_steps(c, m.latency_ms), 0.0, 0.0};
      if (row.steps) {
        const auto q = single_model_schedule(m.id, row.steps, cfg.sampler);
        row.cost = static_cast<double>(row.steps) * m.latency_ms;
        row.quality = ws.oracle(q);
        if (!rep.best || row.quality < rep.rows[*rep.best].quality) rep.best = rep.rows.size();
      }
      rep.rows.push_back(row);
    }
    out << "budget " << fixed(c, 3) << " ms (steps = largest S with S * latency <= budget)\n";
    out << "  model name latency steps cost quality\n";
    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
      const auto& r = rep.rows[i];
      out << (rep.best == i ? "* " : "  ") << r.model << ' ' << r.name << ' ' << fixed(r.latency, 3) << ' ';
      if (!r.steps) {
        out << "0 - infeasible\n";
      } else {
        out << r.steps << ' ' << fixed(r.cost, 3) << ' ' << fixed(r.quality) << '\n';
      }
    }
    out << "  oracle: " << ws.oracle_tag << '\n';
    reports.push_back(std::move(rep));
  }
  return reports;
}

// ---- eval / brute-force -----------------------------------------------------

struct EvalResult {
  ModelSchedule schedule;
  double cost;
  double quality;
};

inline std::vector<EvalResult> cmd_eval(const RunConfig& cfg, std::ostream& out, const std::string& schedule_file) {
  const auto ws = open_workspace(cfg);
  const auto qs = read_schedules(schedule_file);
  std::vector<EvalResult> res;
  for (const auto& q : qs) {
    validate(q, ws.zoo.zoo.size());
    const auto plan = decode_schedule(q, cfg.noise, cfg.t_end);
    const EvalResult r{q, get_cost(q, ws.zoo.zoo), ws.oracle(q)};
    out << msched::to_string(q.sampler) << ' ' << q.length() << ' ' << format_entries(q) << '\n';
    print_plan(out, plan, ws.zoo.zoo);
    out << "  cost " << fixed(r.cost, 3) << " quality " << fixed(r.quality) << " (" << ws.oracle_tag << ")\n";
    res.push_back(r);
  }
  return res;
}

inline std::vector<BruteForceResult> cmd_brute_force(const RunConfig& cfg, std::ostream& out,
                                                     std::optional<double> budget = {}) {
  const auto ws = open_workspace(cfg);
  std::vector<BruteForceResult> res;
  for (double c : budgets_for(cfg, budget)) {
    auto r = brute_force(Scorer(ws.oracle), ws.zoo.zoo, cfg.length, cfg.sampler, Budget{c});
    out << "budget " << fixed(c, 3) << " ms: " << msched::to_string(r.best.sampler) << ' ' << r.best.length() << ' '
        << format_entries(r.best) << " cost " << fixed(r.cost, 3) << " quality " << fixed(r.score) << " ("
        << r.feasible << " of " << r.examined << " schedules feasible)\n";
    res.push_back(std::move(r));
  }
  return res;
}

}  // namespace msched::cli
