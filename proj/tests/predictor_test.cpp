#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <vector>

#include "gradcheck.hpp"
#include "msched/predictor/checkpoint.hpp"
#include "msched/predictor/embedding.hpp"
#include "msched/predictor/predictor.hpp"
#include "msched/predictor/ranking.hpp"
#include "msched/predictor/train.hpp"

using namespace msched;

namespace {

PredictorConfig tiny(SamplerKind kind, std::size_t n, std::size_t length) {
  PredictorConfig c;
  c.sampler = kind;
  c.model_count = n;
  c.length = length;
  c.model_embed_dim = 3;
  c.timestep_embed_dim = 4;
  c.solver_embed_dim = 4;
  c.hidden_size = 3;
  c.head_layers = 2;
  c.head_width = 5;
  return c;
}

PredictorConfig small(SamplerKind kind, std::size_t n, std::size_t length) {
  PredictorConfig c;
  c.sampler = kind;
  c.model_count = n;
  c.length = length;
  c.model_embed_dim = 8;
  c.timestep_embed_dim = 16;
  c.solver_embed_dim = 16;
  c.hidden_size = 32;
  c.head_layers = 3;
  c.head_width = 32;
  return c;
}

ModelSchedule random_schedule(std::mt19937_64& rng, SamplerKind kind, std::size_t n, std::size_t length) {
  std::uniform_int_distribution<int> pick(0, static_cast<int>(n));
  ModelSchedule q{std::vector<int>(length), kind};
  for (auto& e : q.entries) e = pick(rng);
  return q;
}

// Quality rises linearly with how often each model is called.
std::vector<ScheduleRecord> linear_records(std::size_t count, std::size_t n, std::size_t length, std::uint64_t seed,
                                           const std::vector<double>& weight) {
  std::mt19937_64 rng(seed);
  std::vector<ScheduleRecord> out;
  for (std::size_t k = 0; k < count; ++k) {
    auto q = random_schedule(rng, SamplerKind::ddim, n, length);
    double f = 0.0;
    for (int e : q.entries) f += weight[static_cast<std::size_t>(e)];
    out.push_back({q, f, "uniform"});
  }
  return out;
}

std::vector<double> flat_params(SchedulePredictor& p) {
  std::vector<double> out;
  for (auto* t : p.params()) out.insert(out.end(), t->values().data(), t->values().data() + t->values().size());
  return out;
}

std::vector<double> scores_of(const SchedulePredictor& p, const std::vector<ScheduleRecord>& recs) {
  std::vector<ModelSchedule> qs;
  for (const auto& r : recs) qs.push_back(r.schedule);
  return p.predict_batch(qs);
}

std::vector<double> qualities_of(const std::vector<ScheduleRecord>& recs) {
  std::vector<double> out;
  for (const auto& r : recs) out.push_back(r.quality);
  return out;
}

}  // namespace

TEST(SinusoidalEmbedding, ZeroTimestep) {
  const auto e = sinusoidal_embedding(0.0, 8);
  for (int k = 0; k < 4; ++k) EXPECT_EQ(e[k], 0.0);
  for (int k = 4; k < 8; ++k) EXPECT_EQ(e[k], 1.0);
}

TEST(SinusoidalEmbedding, BoundedAndDistinct) {
  const auto a = sinusoidal_embedding(137.0, 64);
  const auto b = sinusoidal_embedding(520.5, 64);
  double d2 = 0.0;
  for (std::size_t k = 0; k < 64; ++k) {
    EXPECT_LE(std::abs(a[k]), 1.0);
    d2 += (a[k] - b[k]) * (a[k] - b[k]);
  }
  EXPECT_GT(d2, 0.0);
}

TEST(SinusoidalEmbedding, Errors) {
  EXPECT_THROW(sinusoidal_embedding(1.0, 7), ConfigError);
  EXPECT_THROW(sinusoidal_embedding(1.0, 0), ConfigError);
  EXPECT_THROW(sinusoidal_embedding(-1.0, 8), DomainError);
}

TEST(KendallTau, Examples) {
  const std::vector<double> a{1, 2, 3, 4}, b{1, 3, 2, 4}, r{4, 3, 2, 1};
  EXPECT_DOUBLE_EQ(kendall_tau(a, a), 1.0);
  EXPECT_DOUBLE_EQ(kendall_tau(a, r), -1.0);
  EXPECT_NEAR(kendall_tau(a, b), 4.0 / 6.0, 1e-15);
  EXPECT_THROW(kendall_tau(std::vector<double>{1.0}, std::vector<double>{1.0}), DomainError);
  EXPECT_THROW(kendall_tau(a, std::vector<double>{1, 2}), ShapeError);
}

TEST(KendallTau, TiesCountAsNeither) {
  const std::vector<double> s{1, 1, 2}, t{1, 2, 3};
  EXPECT_NEAR(kendall_tau(s, t), 2.0 / 3.0, 1e-15);
}

TEST(PairSampling, EqualQualitiesGiveNoPairs) {
  std::mt19937_64 rng(1);
  EXPECT_TRUE(sample_pairs(std::vector<double>(10, 2.5), 2.0, 0.15, rng).empty());
}

TEST(PairSampling, TwoRecordsOrientedByQuality) {
  std::mt19937_64 rng(1);
  auto pairs = sample_pairs(std::vector<double>{3.0, 5.0}, 2.0, 0.15, rng);
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0], (RankPair{0, 1}));
  pairs = sample_pairs(std::vector<double>{5.0, 3.0}, 2.0, 0.15, rng);
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0], (RankPair{1, 0}));
}

TEST(PairSampling, CappedAndThresholded) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> q(32);
    for (auto& v : q) v = u(rng);
    const auto pairs = sample_pairs(q, 2.0, 0.15, rng);
    EXPECT_LE(pairs.size(), 64u);
    std::vector<std::pair<std::size_t, std::size_t>> seen;
    for (const auto& p : pairs) {
      EXPECT_GT(q[p.worse] - q[p.better], 0.15);
      seen.emplace_back(std::min(p.better, p.worse), std::max(p.better, p.worse));
    }
    std::sort(seen.begin(), seen.end());
    EXPECT_EQ(std::adjacent_find(seen.begin(), seen.end()), seen.end());
  }
}

TEST(PairSampling, ConstantOffsetLeavesPairsUnchanged) {
  std::mt19937_64 g(11);
  std::uniform_int_distribution<int> u(0, 12);
  std::vector<double> q(20), shifted(20);
  for (std::size_t i = 0; i < q.size(); ++i) {
    q[i] = 0.25 * u(g);
    shifted[i] = q[i] + 64.0;
  }
  std::mt19937_64 a(5), b(5);
  EXPECT_EQ(sample_pairs(q, 2.0, 0.15, a), sample_pairs(shifted, 2.0, 0.15, b));
}

TEST(RankingLoss, HingeHandValues) {
  const std::vector<RankPair> pairs{{0, 1}};
  auto loss_for = [&](double better, double worse) {
    dk::Tape t;
    dk::Matrix s(2, 1);
    s << better, worse;
    return t.value(pairwise_hinge(t, t.constant(s), pairs, 1.0))(0, 0);
  };
  EXPECT_NEAR(loss_for(0.0, 0.3), 0.7, 1e-15);
  EXPECT_EQ(loss_for(0.0, 1.0), 0.0);
  EXPECT_EQ(loss_for(-2.0, 3.0), 0.0);

  dk::Tape t;
  EXPECT_EQ(t.value(pairwise_hinge(t, t.constant(dk::Matrix::Zero(3, 1)), {}, 1.0))(0, 0), 0.0);
}

TEST(RankingLoss, RejectsMisorientedPair) {
  auto p = SchedulePredictor(tiny(SamplerKind::ddim, 2, 3), 1);
  const std::vector<ScheduleRecord> batch{{{{1, 0, 0}, SamplerKind::ddim}, 2.0, ""},
                                          {{{2, 2, 0}, SamplerKind::ddim}, 1.0, ""}};
  const std::vector<RankPair> bad{{0, 1}};
  dk::Tape t;
  EXPECT_THROW(ranking_loss(t, p, batch, bad, 1.0), PairSelectionError);
}

class PredictorGradient : public ::testing::TestWithParam<int> {};

TEST_P(PredictorGradient, RankingLossMatchesFiniteDifferences) {
  const int seed = GetParam();
  const auto kind = seed % 2 ? SamplerKind::dpm_solver : SamplerKind::ddim;
  const std::size_t n = 3, length = kind == SamplerKind::ddim ? 4 : 6;
  SchedulePredictor p(tiny(kind, n, length), static_cast<std::uint64_t>(seed));
  std::mt19937_64 rng(1000 + static_cast<std::uint64_t>(seed));
  std::vector<ScheduleRecord> batch;
  for (int i = 0; i < 4; ++i) batch.push_back({random_schedule(rng, kind, n, length), static_cast<double>(i), ""});
  const std::vector<RankPair> pairs{{0, 1}, {0, 3}, {1, 2}, {2, 3}};
  const auto res = test_support::check_gradients(
      [&](dk::Tape& t) { return ranking_loss(t, p, batch, pairs, 1.0); }, p.params());
  EXPECT_GT(res.checked, 50u);
  EXPECT_LT(res.max_rel_error, 1e-4);
}

INSTANTIATE_TEST_SUITE_P(Seeds, PredictorGradient, ::testing::Range(0, 100));

TEST(Predictor, ChangedEntryEmbeddingRowGetsGradient) {
  SchedulePredictor p(tiny(SamplerKind::ddim, 3, 4), 7);
  const std::vector<ScheduleRecord> batch{{{{1, 1, 0, 2}, SamplerKind::ddim}, 1.0, ""},
                                          {{{1, 3, 0, 2}, SamplerKind::ddim}, 2.0, ""}};
  const std::vector<RankPair> pairs{{0, 1}};
  EXPECT_NE(p.predict(batch[0].schedule), p.predict(batch[1].schedule));
  auto params = p.params();
  dk::zero_grads(params);
  dk::Tape t;
  t.backward(ranking_loss(t, p, batch, pairs, 1.0));
  const auto& g = params[0]->grad();
  EXPECT_GT(g.row(3).norm(), 0.0);
  EXPECT_TRUE(g.allFinite());
}

TEST(Predictor, DeterministicAndSeedDependent) {
  SchedulePredictor a(tiny(SamplerKind::ddim, 3, 5), 42), b(tiny(SamplerKind::ddim, 3, 5), 42);
  SchedulePredictor c(tiny(SamplerKind::ddim, 3, 5), 43);
  const ModelSchedule q{{1, 0, 3, 2, 2}, SamplerKind::ddim};
  EXPECT_EQ(a.predict(q), a.predict(q));
  EXPECT_EQ(a.predict(q), b.predict(q));
  EXPECT_NE(a.predict(q), c.predict(q));
}

TEST(Predictor, BatchMatchesSingle) {
  SchedulePredictor p(tiny(SamplerKind::dpm_solver, 3, 9), 4);
  std::mt19937_64 rng(9);
  std::vector<ModelSchedule> qs;
  for (int i = 0; i < 20; ++i) qs.push_back(random_schedule(rng, SamplerKind::dpm_solver, 3, 9));
  const auto batch = p.predict_batch(qs, 7);
  for (std::size_t i = 0; i < qs.size(); ++i) EXPECT_NEAR(batch[i], p.predict(qs[i]), 1e-12);
}

TEST(Predictor, DpmLengthTwelveHasFourPositions) {
  SchedulePredictor p(tiny(SamplerKind::dpm_solver, 3, 12), 1);
  EXPECT_EQ(p.config().positions(), 4u);
  const ModelSchedule q{{1, 2, 3, 3, 0, 0, 0, 0, 0, 1, 2, 0}, SamplerKind::dpm_solver};
  const auto ts = p.position_timesteps(q);
  ASSERT_EQ(ts.size(), 4u);
  // Group 3 is the highest active group and starts at the top of the time range.
  EXPECT_DOUBLE_EQ(ts[3], 1.0);
  EXPECT_TRUE(std::is_sorted(ts.begin(), ts.end()));
  EXPECT_TRUE(std::isfinite(p.predict(q)));
}

TEST(Predictor, InactiveGroupsUseFullLattice) {
  SchedulePredictor p(tiny(SamplerKind::dpm_solver, 2, 9), 1);
  const ModelSchedule full{{1, 1, 1, 2, 2, 2, 1, 2, 1}, SamplerKind::dpm_solver};
  const ModelSchedule none{{0, 0, 0, 0, 0, 0, 0, 0, 0}, SamplerKind::dpm_solver};
  EXPECT_EQ(p.position_timesteps(full), p.position_timesteps(none));
}

TEST(Predictor, PermutedGroupStaysFinite) {
  SchedulePredictor p(tiny(SamplerKind::dpm_solver, 3, 6), 2);
  const ModelSchedule a{{1, 2, 3, 0, 0, 1}, SamplerKind::dpm_solver};
  const ModelSchedule b{{3, 1, 2, 0, 1, 0}, SamplerKind::dpm_solver};
  EXPECT_TRUE(std::isfinite(p.predict(a)));
  EXPECT_TRUE(std::isfinite(p.predict(b)));
}

TEST(Predictor, ShapeErrors) {
  SchedulePredictor p(tiny(SamplerKind::ddim, 2, 4), 1);
  EXPECT_THROW(p.predict({{1, 0, 0}, SamplerKind::ddim}), ShapeError);
  EXPECT_THROW(p.predict({{1, 0, 0, 3}, SamplerKind::ddim}), ShapeError);
  EXPECT_THROW(p.predict({{1, 0, 0, 0}, SamplerKind::dpm_solver}), ShapeError);
  auto bad = tiny(SamplerKind::dpm_solver, 2, 4);
  EXPECT_THROW(SchedulePredictor(bad, 1), ConfigError);
  bad = tiny(SamplerKind::ddim, 2, 4);
  bad.timestep_embed_dim = 5;
  EXPECT_THROW(SchedulePredictor(bad, 1), ConfigError);
}

TEST(Predictor, InferenceIgnoresPairRng) {
  SchedulePredictor p(tiny(SamplerKind::ddim, 3, 4), 5);
  const ModelSchedule q{{3, 0, 1, 1}, SamplerKind::ddim};
  const double before = p.predict(q);
  std::mt19937_64 rng(99);
  (void)sample_pairs(std::vector<double>{1, 2, 3, 4}, 2.0, 0.15, rng);
  EXPECT_EQ(p.predict(q), before);
}

TEST(Train, ZeroEpochsLeavesParameters) {
  SchedulePredictor p(tiny(SamplerKind::ddim, 3, 4), 5);
  const auto before = flat_params(p);
  TrainConfig cfg;
  cfg.epochs = 0;
  const auto res = train(p, linear_records(50, 3, 4, 1, {0, 1, 2, 3}), cfg);
  EXPECT_TRUE(res.epoch_loss.empty());
  EXPECT_EQ(flat_params(p), before);
}

TEST(Train, SameSeedSameParameters) {
  const auto data = linear_records(64, 3, 4, 2, {0, 1, 2, 3});
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.seed = 17;
  SchedulePredictor a(tiny(SamplerKind::ddim, 3, 4), 5), b(tiny(SamplerKind::ddim, 3, 4), 5);
  const auto ra = train(a, data, cfg);
  const auto rb = train(b, data, cfg);
  EXPECT_EQ(flat_params(a), flat_params(b));
  EXPECT_EQ(ra.epoch_loss, rb.epoch_loss);
}

TEST(Train, QualityOffsetDoesNotChangeTraining) {
  auto data = linear_records(64, 3, 4, 2, {0, 0.25, 0.5, 0.75});
  auto shifted = data;
  for (auto& r : shifted) r.quality += 8.0;  // dyadic quarters plus 8 stay exact
  TrainConfig cfg;
  cfg.epochs = 3;
  SchedulePredictor a(tiny(SamplerKind::ddim, 3, 4), 5), b(tiny(SamplerKind::ddim, 3, 4), 5);
  const auto ra = train(a, data, cfg);
  const auto rb = train(b, shifted, cfg);
  EXPECT_EQ(ra.epoch_loss, rb.epoch_loss);
  EXPECT_EQ(flat_params(a), flat_params(b));
}

TEST(Train, NanParametersRaiseDivergence) {
  SchedulePredictor p(tiny(SamplerKind::ddim, 3, 4), 5);
  p.params().back()->values()(0, 0) = std::numeric_limits<double>::quiet_NaN();
  TrainConfig cfg;
  cfg.epochs = 2;
  try {
    train(p, linear_records(40, 3, 4, 1, {0, 1, 2, 3}), cfg);
    FAIL() << "expected TrainingDiverged";
  } catch (const TrainingDiverged& e) {
    EXPECT_EQ(e.epoch(), 0u);
  }
}

TEST(Train, RejectsBadConfigAndData) {
  SchedulePredictor p(tiny(SamplerKind::ddim, 3, 4), 5);
  TrainConfig cfg;
  EXPECT_THROW(train(p, std::vector<ScheduleRecord>{}, cfg), ConfigError);
  cfg.margin = 0.0;
  EXPECT_THROW(train(p, linear_records(4, 3, 4, 1, {0, 1, 2, 3}), cfg), ConfigError);
  cfg = TrainConfig{};
  cfg.compare_ratio = 0.5;
  EXPECT_THROW(train(p, linear_records(4, 3, 4, 1, {0, 1, 2, 3}), cfg), ConfigError);
}

TEST(Train, LinearOracleReachesHighTau) {
  const std::vector<double> weight{0.0, 0.3, 1.0, 2.2};
  const auto train_set = linear_records(600, 3, 8, 21, weight);
  const auto held_out = linear_records(200, 3, 8, 22, weight);
  SchedulePredictor p(small(SamplerKind::ddim, 3, 8), 3);
  TrainConfig cfg;
  cfg.epochs = 60;
  cfg.seed = 4;
  train(p, train_set, cfg);
  EXPECT_GT(kendall_tau(scores_of(p, held_out), qualities_of(held_out)), 0.9);
}

TEST(Train, MonotoneInModelOneCount) {
  // Quality strictly increases with the number of model-1 calls; other ids are neutral.
  // Held-out schedules carry every count 0..L exactly once so the truths have no ties.
  const std::size_t length = 10;
  const auto train_set = linear_records(500, 2, length, 31, {0.0, 1.0, 0.0});
  std::mt19937_64 rng(32);
  std::vector<ScheduleRecord> held_out;
  for (std::size_t count = 0; count <= length; ++count) {
    ModelSchedule q{std::vector<int>(length, 0), SamplerKind::ddim};
    for (std::size_t i = 0; i < length; ++i) q.entries[i] = i < count ? 1 : static_cast<int>(rng() % 2) * 2;
    std::shuffle(q.entries.begin(), q.entries.end(), rng);
    held_out.push_back({q, static_cast<double>(count), ""});
  }
  SchedulePredictor p(small(SamplerKind::ddim, 2, length), 8);
  TrainConfig cfg;
  cfg.epochs = 40;
  train(p, train_set, cfg);
  EXPECT_GE(kendall_tau(scores_of(p, held_out), qualities_of(held_out)), 0.9);
}

TEST(Checkpoint, RoundTripGivesIdenticalScores) {
  const auto zoo = ModelZoo::from_latencies({2.0, 3.5, 7.25});
  for (auto kind : {SamplerKind::ddim, SamplerKind::dpm_solver}) {
    SchedulePredictor p(small(kind, 3, 6), 13);
    std::stringstream ss;
    save_checkpoint(ss, p, zoo.fingerprint());
    const auto ck = load_checkpoint(ss);
    ck.require_zoo(zoo);
    std::mt19937_64 rng(2);
    std::vector<ModelSchedule> qs;
    for (int i = 0; i < 100; ++i) qs.push_back(random_schedule(rng, kind, 3, 6));
    EXPECT_EQ(p.predict_batch(qs), ck.predictor->predict_batch(qs));

    std::stringstream again;
    save_checkpoint(again, *ck.predictor, ck.zoo_fingerprint);
    std::stringstream first;
    save_checkpoint(first, p, zoo.fingerprint());
    EXPECT_EQ(first.str(), again.str());
  }
}

TEST(Checkpoint, RejectsOtherZoo) {
  SchedulePredictor p(tiny(SamplerKind::ddim, 3, 4), 1);
  std::stringstream ss;
  save_checkpoint(ss, p, ModelZoo::from_latencies({2.0, 3.5, 7.25}).fingerprint());
  const auto ck = load_checkpoint(ss);
  EXPECT_THROW(ck.require_zoo(ModelZoo::from_latencies({2.0, 3.5, 7.5})), IncompatibleCheckpoint);
  EXPECT_THROW(ck.require_zoo(ModelZoo::from_latencies({2.0, 3.5})), IncompatibleCheckpoint);
}

TEST(Checkpoint, MalformedInputReportsLine) {
  SchedulePredictor p(tiny(SamplerKind::ddim, 3, 4), 1);
  std::stringstream ss;
  save_checkpoint(ss, p, 1);
  auto text = ss.str();
  const auto at = text.find("length 4");
  text.replace(at, 8, "length x");
  std::stringstream bad(text);
  try {
    load_checkpoint(bad);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_EQ(e.column(), 8u);
  }
  std::stringstream truncated(ss.str().substr(0, ss.str().size() / 2));
  EXPECT_THROW(load_checkpoint(truncated), ParseError);
  std::stringstream version("msched-checkpoint 9\n");
  EXPECT_THROW(load_checkpoint(version), IncompatibleCheckpoint);
}
