#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "msched/diffkernel/layers.hpp"
#include "msched/diffkernel/tape.hpp"
#include "msched/diffkernel/tensor.hpp"
#include "msched/errors.hpp"
#include "msched/predictor/embedding.hpp"
#include "msched/schedspace/noise.hpp"
#include "msched/schedspace/plan.hpp"
#include "msched/schedspace/schedule.hpp"

namespace msched {

struct PredictorConfig {
  SamplerKind sampler = SamplerKind::ddim;
  std::size_t model_count = 1;  // N; the embedding table has N + 1 rows
  std::size_t length = 1;       // L

  std::size_t model_embed_dim = 32;
  std::size_t timestep_embed_dim = 64;
  std::size_t solver_embed_dim = 64;
  std::size_t hidden_size = 128;
  std::size_t recurrent_layers = 1;
  std::size_t head_layers = 4;
  std::size_t head_width = 200;

  NoiseSchedule noise{};
  double t_end = kDefaultTimeEnd;
  double time_scale = 1000.0;  // t in [0, 1] is stretched to the usual 0..1000 step range

  void validate() const {
    if (model_count < 1) throw ConfigError("predictor needs at least one model");
    if (length < 1) throw ConfigError("predictor needs a positive schedule length");
    if (sampler == SamplerKind::dpm_solver && length % kSolverGroup != 0) {
      throw ConfigError("dpm-solver predictor length must be divisible by 3");
    }
    if (!model_embed_dim || !timestep_embed_dim || !solver_embed_dim || !hidden_size || !recurrent_layers ||
        !head_layers || !head_width) {
      throw ConfigError("predictor dimensions must be positive");
    }
    if (timestep_embed_dim % 2 != 0) throw ConfigError("timestep embedding dimension must be even");
    if (!(time_scale > 0.0) || !(t_end > 0.0)) throw ConfigError("time scale and t_end must be positive");
  }

  /// Sequence positions seen by the recurrent network.
  std::size_t positions() const { return sampler == SamplerKind::ddim ? length : length / kSolverGroup; }
};

/// Learned schedule scorer: model embedder + timestep embedder (+ solver-group embedder
/// for DPM-Solver) feeding an LSTM whose outputs are averaged and mapped to a scalar by
/// an MLP head. Lower scores mean better predicted quality.
///
/// Positions are fed from the noise side to the data side. Parameters are owned by the
/// object; moving it while a Tape recorded against it is alive is not allowed.
class SchedulePredictor {
 public:
  SchedulePredictor(PredictorConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    build();
    std::mt19937_64 rng(seed);
    embedding_.init_uniform(cfg_.model_embed_dim, rng);
    time_mlp_.init(rng);
    if (cfg_.sampler == SamplerKind::dpm_solver) solver_mlp_.init(rng);
    for (auto& c : cells_) c.init(rng);
    head_.init(rng);
  }

  SchedulePredictor(const SchedulePredictor&) = delete;
  SchedulePredictor& operator=(const SchedulePredictor&) = delete;

  const PredictorConfig& config() const noexcept { return cfg_; }

  /// All trainable tensors in a stable order (also the checkpoint order).
  dk::ParamList params() {
    dk::ParamList out{&embedding_};
    time_mlp_.collect(out);
    if (cfg_.sampler == SamplerKind::dpm_solver) solver_mlp_.collect(out);
    for (auto& c : cells_) c.collect(out);
    head_.collect(out);
    return out;
  }

  /// Timestep fed to the embedder at each sequence position (position 0 nearest data).
  /// DDIM: the linear lattice. DPM-Solver: an active group uses the noise-side end of its
  /// solver interval; an inactive group uses the same point of a lattice where every
  /// group is active.
  std::vector<double> position_timesteps(const ModelSchedule& q) const {
    if (cfg_.sampler == SamplerKind::ddim) return ddim_lattice(cfg_.length, cfg_.noise, cfg_.t_end);
    const std::size_t groups = cfg_.positions();
    const auto full = discretize_uniform_logsnr(cfg_.noise, groups, cfg_.noise.horizon(), cfg_.t_end);
    std::vector<double> ts(groups);
    for (std::size_t g = 0; g < groups; ++g) ts[g] = full[groups - 1 - g];
    for (const auto& step : decode_schedule(q, cfg_.noise, cfg_.t_end).solver) ts[step.group] = step.t_noise;
    return ts;
  }

  void check(const ModelSchedule& q) const {
    if (q.sampler != cfg_.sampler) {
      throw ShapeError("schedule sampler " + std::string(to_string(q.sampler)) + " does not match predictor sampler " +
                       std::string(to_string(cfg_.sampler)));
    }
    if (q.length() != cfg_.length) {
      throw ShapeError("schedule length " + std::to_string(q.length()) + " != predictor length " +
                       std::to_string(cfg_.length));
    }
    for (int e : q.entries) {
      if (e < 0 || static_cast<std::size_t>(e) > cfg_.model_count) {
        throw ShapeError("model id " + std::to_string(e) + " outside predictor zoo 0.." + std::to_string(cfg_.model_count));
      }
    }
  }

  /// Records the scores of a batch as a [batch x 1] node.
  dk::Var forward(dk::Tape& t, std::span<const ModelSchedule> batch) {
    if (batch.empty()) throw ShapeError("predictor forward needs a non-empty batch");
    for (const auto& q : batch) check(q);
    const std::size_t B = batch.size();
    const std::size_t P = cfg_.positions();

    // Distinct timesteps -> one pass through the timestep MLP, then row gathers.
    std::map<double, int> slot;
    std::vector<int> time_row(B * P);
    for (std::size_t b = 0; b < B; ++b) {
      const auto ts = (cfg_.sampler == SamplerKind::ddim && b > 0) ? std::vector<double>{} : position_timesteps(batch[b]);
      for (std::size_t p = 0; p < P; ++p) {
        if (cfg_.sampler == SamplerKind::ddim && b > 0) {
          time_row[b * P + p] = time_row[p];
          continue;
        }
        auto [it, fresh] = slot.emplace(ts[p], static_cast<int>(slot.size()));
        time_row[b * P + p] = it->second;
      }
    }
    dk::Matrix sinus(static_cast<Eigen::Index>(slot.size()), static_cast<Eigen::Index>(cfg_.timestep_embed_dim));
    for (const auto& [time, row] : slot) {
      const auto e = sinusoidal_embedding(time * cfg_.time_scale, cfg_.timestep_embed_dim);
      for (std::size_t k = 0; k < e.size(); ++k) sinus(row, static_cast<Eigen::Index>(k)) = e[k];
    }
    const dk::Var time_table = time_mlp_.forward(t, t.constant(std::move(sinus)));

    std::vector<dk::Var> state;
    for (const auto& c : cells_) state.push_back(c.zero_state(t, B));
    std::vector<dk::Var> outputs;
    outputs.reserve(P);
    std::vector<int> ids(B), rows(B);
    for (std::size_t k = 0; k < P; ++k) {
      const std::size_t p = P - 1 - k;
      dk::Var model_feat;
      if (cfg_.sampler == SamplerKind::ddim) {
        for (std::size_t b = 0; b < B; ++b) ids[b] = batch[b].entries[p];
        model_feat = dk::embedding(t, embedding_, ids);
      } else {
        dk::Var parts[kSolverGroup];
        for (std::size_t j = 0; j < kSolverGroup; ++j) {
          for (std::size_t b = 0; b < B; ++b) ids[b] = batch[b].entries[p * kSolverGroup + j];
          parts[j] = dk::embedding(t, embedding_, ids);
        }
        model_feat = solver_mlp_.forward(t, dk::concat_cols(t, parts));
      }
      for (std::size_t b = 0; b < B; ++b) rows[b] = time_row[b * P + p];
      const dk::Var feat[] = {model_feat, dk::take_rows(t, time_table, rows)};
      dk::Var x = dk::concat_cols(t, feat);
      for (std::size_t l = 0; l < cells_.size(); ++l) {
        state[l] = cells_[l].step(t, x, state[l]);
        x = cells_[l].hidden(t, state[l]);
      }
      outputs.push_back(x);
    }
    return head_.forward(t, dk::mean_of(t, outputs));
  }

  /// Scores a batch without keeping the recording. Safe to call concurrently on a frozen predictor.
  std::vector<double> predict_batch(std::span<const ModelSchedule> batch, std::size_t chunk = 256) const {
    std::vector<double> out;
    out.reserve(batch.size());
    auto& self = const_cast<SchedulePredictor&>(*this);  // forward only reads parameters
    for (std::size_t at = 0; at < batch.size(); at += chunk) {
      const auto n = std::min(chunk, batch.size() - at);
      dk::Tape t;
      const auto& s = t.value(self.forward(t, batch.subspan(at, n)));
      for (Eigen::Index i = 0; i < s.rows(); ++i) out.push_back(s(i, 0));
    }
    return out;
  }

  double predict(const ModelSchedule& q) const { return predict_batch(std::span<const ModelSchedule>(&q, 1))[0]; }

 private:
  void build() {
    const auto dm = cfg_.model_embed_dim, dt = cfg_.timestep_embed_dim;
    embedding_ = dk::ParamTensor("model_embedding", {cfg_.model_count + 1, dm});
    time_mlp_ = dk::Mlp("timestep_mlp", {dt, dt, dt}, dk::Activation::relu, dk::Activation::identity);
    std::size_t model_feat = dm;
    if (cfg_.sampler == SamplerKind::dpm_solver) {
      solver_mlp_ = dk::Mlp("solver_mlp", {kSolverGroup * dm, cfg_.solver_embed_dim, cfg_.solver_embed_dim},
                            dk::Activation::relu, dk::Activation::identity);
      model_feat = cfg_.solver_embed_dim;
    }
    std::size_t in = model_feat + dt;
    for (std::size_t l = 0; l < cfg_.recurrent_layers; ++l) {
      cells_.emplace_back("lstm." + std::to_string(l), in, cfg_.hidden_size);
      in = cfg_.hidden_size;
    }
    std::vector<std::size_t> widths{cfg_.hidden_size};
    for (std::size_t l = 0; l + 1 < cfg_.head_layers; ++l) widths.push_back(cfg_.head_width);
    widths.push_back(1);
    head_ = dk::Mlp("head", widths, dk::Activation::relu, dk::Activation::identity);
  }

  PredictorConfig cfg_;
  dk::ParamTensor embedding_;
  dk::Mlp time_mlp_;
  dk::Mlp solver_mlp_;
  std::vector<dk::RecurrentCell> cells_;
  dk::Mlp head_;
};

}  // namespace msched
