#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "msched/diffkernel/adam.hpp"
#include "msched/diffkernel/tape.hpp"
#include "msched/errors.hpp"
#include "msched/predictor/predictor.hpp"
#include "msched/predictor/ranking.hpp"

namespace msched {

struct TrainConfig {
  double margin = 1.0;
  double compare_ratio = 2.0;
  double threshold = 0.15;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  std::size_t epochs = 100;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(margin > 0.0)) throw ConfigError("margin must be positive");
    if (!(threshold >= 0.0)) throw ConfigError("threshold must be non-negative");
    if (!(compare_ratio >= 1.0)) throw ConfigError("compare_ratio must be at least 1");
    if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be positive");
  }
};

struct TrainResult {
  std::vector<double> epoch_loss;  // mean hinge loss per selected pair; 0 when an epoch selected none
  std::size_t pairs_seen = 0;
};

/// Records the hinge ranking loss of `batch` on the tape.
inline dk::Var ranking_loss(dk::Tape& t, SchedulePredictor& p, std::span<const ScheduleRecord> batch,
                            std::span<const RankPair> pairs, double margin) {
  std::vector<double> q(batch.size());
  std::vector<ModelSchedule> qs;
  qs.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    q[i] = batch[i].quality;
    qs.push_back(batch[i].schedule);
  }
  check_pairs(q, pairs);
  return pairwise_hinge(t, p.forward(t, qs), pairs, margin);
}

/// Shuffled mini-batches, pair sampling, hinge loss, Adam. Batches that yield no pair are skipped.
inline TrainResult train(SchedulePredictor& p, std::span<const ScheduleRecord> data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw ConfigError("training dataset is empty");
  for (const auto& r : data) {
    if (!std::isfinite(r.quality)) throw ConfigError("training record with non-finite quality");
    p.check(r.schedule);
  }

  std::mt19937_64 rng(cfg.seed);
  dk::AdamState adam(dk::AdamOptions{.learning_rate = cfg.learning_rate});
  const auto params = p.params();
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult out;
  std::vector<ScheduleRecord> batch;
  std::vector<double> q;
  dk::Tape tape;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    std::size_t pairs_in_epoch = 0;
    for (std::size_t at = 0; at < order.size(); at += cfg.batch_size) {
      const auto end = std::min(order.size(), at + cfg.batch_size);
      if (end - at < 2) continue;
      batch.clear();
      q.clear();
      for (auto k = at; k < end; ++k) {
        batch.push_back(data[order[k]]);
        q.push_back(data[order[k]].quality);
      }
      const auto pairs = sample_pairs(std::span<const double>(q), cfg.compare_ratio, cfg.threshold, rng);
      if (pairs.empty()) continue;

      tape.clear();
      dk::zero_grads(params);
      const auto loss = ranking_loss(tape, p, batch, pairs, cfg.margin);
      const double value = tape.value(loss)(0, 0);
      if (!std::isfinite(value)) throw TrainingDiverged(epoch, "ranking loss is not finite");
      tape.backward(loss);
      adam.step(params);
      total += value;
      pairs_in_epoch += pairs.size();
    }
    tape.clear();
    out.pairs_seen += pairs_in_epoch;
    out.epoch_loss.push_back(pairs_in_epoch ? total / static_cast<double>(pairs_in_epoch) : 0.0);
  }
  return out;
}

}  // namespace msched
