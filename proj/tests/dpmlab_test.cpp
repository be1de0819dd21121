#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>
#include <vector>

#include "msched/dpmlab/denoiser.hpp"
#include "msched/dpmlab/metric.hpp"
#include "msched/dpmlab/mixture.hpp"
#include "msched/dpmlab/neural.hpp"
#include "msched/dpmlab/oracle.hpp"
#include "msched/dpmlab/presets.hpp"
#include "msched/dpmlab/sampler.hpp"
#include "msched/evosearch/brute_force.hpp"

using namespace msched;
using namespace msched::lab;

namespace {

const NoiseSchedule kNs{};

GaussianMixture bimodal() { return GaussianMixture(1, {{0.5, {-2.0}, 0.4}, {0.5, {2.0}, 0.4}}); }

Matrix row(std::initializer_list<double> v) {
  Matrix m(1, static_cast<Eigen::Index>(v.size()));
  Eigen::Index j = 0;
  for (double x : v) m(0, j++) = x;
  return m;
}

double lab_quality(const GaussianMixture& gm, const DenoiserZoo& zoo, const StepPlan& plan, std::uint64_t seed,
                   std::size_t n = 600) {
  LabSettings s;
  s.n_samples = n;
  s.n_reference = n;
  s.noise_seed = seed;
  s.model_seed = seed + 100;
  s.reference_seed = seed + 200;
  return LabOracle(gm, zoo, kNs, s).quality(plan);
}

}  // namespace

TEST(Mixture, SingleStandardGaussianScore) {
  const GaussianMixture gm(2, {{1.0, {0.0, 0.0}, 1.0}});
  for (double t : {0.01, 0.3, 0.9}) {
    const Matrix x = row({0.7, -1.3});
    const auto np = kNs.eval(t);
    const Matrix s = gm.score(x, kNs, t);
    const double v = np.alpha * np.alpha + np.sigma * np.sigma;
    EXPECT_NEAR(s(0, 0), -0.7 / v, 1e-12);
    EXPECT_NEAR(s(0, 1), 1.3 / v, 1e-12);
  }
}

TEST(Mixture, SymmetricScoreVanishesAtOrigin) {
  const auto s = bimodal().score(row({0.0}), kNs, 0.2);
  EXPECT_NEAR(s(0, 0), 0.0, 1e-14);
  EXPECT_NEAR(GaussianMixture::ring().score(row({0.0, 0.0}), kNs, 0.4).norm(), 0.0, 1e-12);
}

TEST(Mixture, ScoreMatchesLogDensityDifferences) {
  const auto gm = GaussianMixture::ring();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> ux(-5.0, 5.0), ut(0.01, 1.0);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const double t = ut(rng);
    std::vector<double> x{ux(rng), ux(rng)};
    Matrix xm(1, 2);
    xm << x[0], x[1];
    const Matrix s = gm.score(xm, kNs, t);
    for (int j = 0; j < 2; ++j) {
      const double h = 1e-5;
      auto xp = x, xn = x;
      xp[j] += h;
      xn[j] -= h;
      const double fd = (gm.log_density(xp, kNs, t) - gm.log_density(xn, kNs, t)) / (2 * h);
      worst = std::max(worst, std::abs(fd - s(0, j)) / std::max(std::abs(s(0, j)), 1e-3));
    }
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(Mixture, PointMassHasNoScoreAtZero) {
  const GaussianMixture gm(1, {{1.0, {1.0}, 0.0}});
  EXPECT_THROW(gm.score(row({0.5}), kNs, 0.0), SingularityError);
  EXPECT_NO_THROW(gm.score(row({0.5}), kNs, 0.1));
}

TEST(Mixture, Validation) {
  EXPECT_THROW(GaussianMixture(3, {{1.0, {0, 0, 0}, 1.0}}), ConfigError);
  EXPECT_THROW(GaussianMixture(1, {{-1.0, {0}, 1.0}}), ConfigError);
  EXPECT_THROW(GaussianMixture(2, {{1.0, {0}, 1.0}}), ShapeError);
  EXPECT_NEAR(GaussianMixture::ring().variance(), 8.0 + 0.09, 1e-12);
}

TEST(DdimStep, ZeroEpsRescales) {
  const Matrix x = row({1.5, -2.0});
  const Matrix y = ddim_step(Matrix::Zero(1, 2), x, 0.6, 0.3, kNs);
  const double r = kNs.alpha(0.3) / kNs.alpha(0.6);
  EXPECT_NEAR(y(0, 0), 1.5 * r, 1e-14);
  EXPECT_NEAR(y(0, 1), -2.0 * r, 1e-14);
}

TEST(DdimStep, LinearInStateAndEps) {
  const Matrix x1 = row({1.0, 2.0}), x2 = row({-0.5, 0.25}), e1 = row({0.3, -0.1}), e2 = row({1.0, 1.0});
  const Matrix a = ddim_step(e1 + 2.0 * e2, x1 + 2.0 * x2, 0.8, 0.2, kNs);
  const Matrix b = ddim_step(e1, x1, 0.8, 0.2, kNs) + 2.0 * ddim_step(e2, x2, 0.8, 0.2, kNs);
  EXPECT_LT((a - b).norm(), 1e-12);
}

TEST(DdimStep, DirectionError) {
  EXPECT_THROW(ddim_step(row({0.0}), row({0.0}), 0.3, 0.3, kNs), StepDirectionError);
  EXPECT_THROW(ddim_step(row({0.0}), row({0.0}), 0.3, 0.5, kNs), StepDirectionError);
}

TEST(DdimStep, ExactDenoiserRecoversGaussianVariance) {
  const GaussianMixture gm(1, {{1.0, {0.0}, 0.5}});
  const DenoiserZoo zoo{Denoiser::exact_model("exact", 1.0)};
  const auto x = run_schedule(single_model_plan(1, 100, kNs), zoo, gm, kNs, 10000, 3, 4);
  const double mean = x.mean();
  const double var = (x.array() - mean).square().mean();
  EXPECT_NEAR(var, 0.25, 0.025);
}

TEST(RunSchedule, DeterministicAndSingleStep) {
  const auto gm = GaussianMixture::ring();
  const DenoiserZoo zoo{Denoiser::perturbed_model("p", 1.0, Profile{0.2, 0.1, 1.0}, Profile{0.05, 0.05, 1.0})};
  const auto plan = single_model_plan(1, 7, kNs);
  EXPECT_EQ(run_schedule(plan, zoo, gm, kNs, 50, 1, 2), run_schedule(plan, zoo, gm, kNs, 50, 1, 2));

  StepPlan one;
  one.ddim.push_back({0, 0.7, 1});
  std::mt19937_64 noise(5), model(6);
  const Matrix x = standard_normal(40, 2, noise);
  const Matrix expect = ddim_step(zoo[0].eps(gm, kNs, x, 0.7, model), x, 0.7, 0.0, kNs);
  EXPECT_EQ(run_schedule(one, zoo, gm, kNs, 40, 5, 6), expect);
}

TEST(RunSchedule, Errors) {
  const auto gm = GaussianMixture::ring();
  const DenoiserZoo zoo{Denoiser::exact_model("e", 1.0)};
  EXPECT_THROW(run_schedule(StepPlan{}, zoo, gm, kNs, 10, 1, 1), DegenerateSchedule);
  StepPlan dpm;
  dpm.sampler = SamplerKind::dpm_solver;
  EXPECT_THROW(run_schedule(dpm, zoo, gm, kNs, 10, 1, 1), InvalidSchedule);
  EXPECT_THROW(run_schedule(single_model_plan(2, 3, kNs), zoo, gm, kNs, 10, 1, 1), InvalidSchedule);
}

TEST(RunSchedule, MoreExactStepsNeverHurt) {
  // 5 vs 10 vs 50 steps on a bimodal mixture; one Monte-Carlo inversion is tolerated.
  const DenoiserZoo zoo{Denoiser::exact_model("exact", 1.0)};
  int violations = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const double q5 = lab_quality(bimodal(), zoo, single_model_plan(1, 5, kNs), seed);
    const double q10 = lab_quality(bimodal(), zoo, single_model_plan(1, 10, kNs), seed);
    const double q50 = lab_quality(bimodal(), zoo, single_model_plan(1, 50, kNs), seed);
    violations += q10 > q5;
    violations += q50 > q10;
    EXPECT_LT(q50, q5);
  }
  EXPECT_LE(violations, 1);
}

TEST(PerStepLoss, ExactBelowPerturbed) {
  // The bias adds b(t)^2 in expectation; the sample cross term is O(b / sqrt(n)), so only
  // timesteps where the bias is clearly nonzero are compared.
  const auto gm = GaussianMixture::ring();
  const std::vector<double> ts{0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0};
  const auto exact = per_step_loss(Denoiser::exact_model("e", 1), gm, kNs, ts, 20000, 7);
  int compared = 0;
  for (const auto& d : crossing_zoo()) {
    const auto loss = per_step_loss(d, gm, kNs, ts, 20000, 7);
    for (std::size_t i = 0; i < ts.size(); ++i) {
      const double b = d.bias(ts[i], kNs.horizon());
      if (b == 0.0) {
        EXPECT_EQ(exact[i], loss[i]);
      }
      if (b < 0.02) continue;
      EXPECT_LT(exact[i], loss[i]) << d.name << " t=" << ts[i];
      ++compared;
    }
  }
  EXPECT_GE(compared, 6);
}

TEST(PerStepLoss, OpposedLinearBiasesCross) {
  const auto gm = GaussianMixture::ring();
  const double c = 0.5;
  const auto early = Denoiser::perturbed_model("b1", 1, Profile{0.0, c, 1.0}, {});  // c * t
  const auto late = Denoiser::perturbed_model("b2", 1, Profile{c, 0.0, 1.0}, {});   // c * (T - t)
  const auto ts = discretize_linear(21, 0.01, 1.0);
  const auto a = per_step_loss(early, gm, kNs, ts, 2000, 3);
  const auto b = per_step_loss(late, gm, kNs, ts, 2000, 3);
  EXPECT_LT(a.front() - b.front(), 0.0);
  EXPECT_GT(a.back() - b.back(), 0.0);
}

TEST(PerStepLoss, ZeroPerturbationMatchesExact) {
  const auto gm = bimodal();
  const std::vector<double> ts{0.05, 0.5, 0.95};
  EXPECT_EQ(per_step_loss(Denoiser::perturbed_model("z", 1, {}, {}), gm, kNs, ts, 500, 1),
            per_step_loss(Denoiser::exact_model("e", 1), gm, kNs, ts, 500, 1));
  EXPECT_THROW(per_step_loss(Denoiser::exact_model("e", 1), gm, kNs, ts, 0, 1), ConfigError);
}

TEST(EnergyDistance, Examples) {
  std::mt19937_64 rng(1);
  const Matrix a = standard_normal(50, 2, rng);
  EXPECT_EQ(energy_distance(a, a), 0.0);
  Matrix p = Matrix::Zero(10, 2), q = Matrix::Zero(7, 2);
  q.col(0).setConstant(3.0);
  q.col(1).setConstant(4.0);
  EXPECT_NEAR(energy_distance(p, q), 10.0, 1e-12);
  EXPECT_THROW(energy_distance(a, Matrix::Zero(5, 1)), ShapeError);
  EXPECT_THROW(energy_distance(Matrix(0, 2), a), ShapeError);
}

TEST(EnergyDistance, ShrinkingBiasImprovesQuality) {
  const auto gm = GaussianMixture::ring();
  const auto plan = single_model_plan(1, 20, kNs);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    double prev = std::numeric_limits<double>::infinity();
    for (double c : {1.0, 0.5, 0.25, 0.0}) {
      const DenoiserZoo zoo{Denoiser::perturbed_model("p", 1, Profile{c, c, 1.0}, {})};
      const double q = lab_quality(gm, zoo, plan, seed, 400);
      EXPECT_LT(q, prev) << "seed " << seed << " c " << c;
      prev = q;
    }
  }
}

TEST(LabOracle, EmptyScheduleIsPureNoise) {
  LabSettings s;
  s.n_samples = s.n_reference = 200;
  LabOracle lab(GaussianMixture::ring(), crossing_zoo(), kNs, s);
  const ModelSchedule none{{0, 0, 0, 0}, SamplerKind::ddim};
  std::mt19937_64 rng(s.noise_seed);
  const Matrix noise = standard_normal(200, 2, rng);
  EXPECT_NEAR(lab.quality(none), energy_distance(noise, lab.reference()), 1e-12);
  EXPECT_GT(lab.quality(none), lab.quality({{0, 2, 1, 1}, SamplerKind::ddim}));
  EXPECT_THROW(lab.quality({{1, 1, 1}, SamplerKind::dpm_solver}), InvalidSchedule);
  EXPECT_THROW(lab.quality({{1, 3, 1}, SamplerKind::ddim}), InvalidSchedule);
}

TEST(SyntheticOracle, SolverTerms) {
  const auto o = two_model_synthetic();
  EXPECT_EQ(o(ModelSchedule{std::vector<int>(6, 0), SamplerKind::dpm_solver}), o.empty_penalty);
  // One group covering the full range: order-k discretisation is disc * 1^(k+1) = disc.
  const double one = o({{0, 0, 0, 1, 0, 0}, SamplerKind::dpm_solver});
  EXPECT_NEAR(one, o.discretization + o.model_error[0](1.0, 1.0), 1e-12);
  // Two groups halve the logSNR width.
  const double two = o({{1, 0, 0, 1, 0, 0}, SamplerKind::dpm_solver});
  EXPECT_LT(two - o.model_error[0](1.0, 1.0), one);
  // Model order inside a group is visible.
  EXPECT_NE(o({{1, 2, 0, 0, 0, 0}, SamplerKind::dpm_solver}), o({{2, 1, 0, 0, 0, 0}, SamplerKind::dpm_solver}));
}

TEST(SyntheticOracle, LinearCount) {
  const LinearCountOracle o{{0.0, 1.0, 2.5}};
  EXPECT_EQ(o({{1, 2, 0, 2}, SamplerKind::ddim}), 6.0);
  EXPECT_GT(o({{0, 0, 0, 0}, SamplerKind::ddim}), o({{2, 2, 2, 2}, SamplerKind::ddim}));
}

TEST(TrainingData, PointMassOnNullGivesSentinel) {
  const LinearCountOracle o{{0.0, 1.0, 2.0}};
  const auto recs = generate_training_data(2, 5, SamplerKind::ddim, o, {{"null", {1.0, 0.0, 0.0}}}, 20, 1);
  ASSERT_EQ(recs.size(), 20u);
  for (const auto& r : recs) {
    EXPECT_EQ(r.schedule.nonzero_count(), 0u);
    EXPECT_EQ(r.quality, o(r.schedule));
    EXPECT_EQ(r.family, "null");
  }
}

TEST(TrainingData, UniformMarginals) {
  const std::size_t N = 3, L = 10, count = 1000;
  const auto recs = generate_training_data(N, L, SamplerKind::ddim, LinearCountOracle{{0, 1, 2, 3}},
                                           {{"uniform", {0.25, 0.25, 0.25, 0.25}}}, count, 2);
  std::vector<double> hist(N + 1, 0.0);
  for (const auto& r : recs)
    for (int e : r.schedule.entries) hist[static_cast<std::size_t>(e)] += 1.0;
  const double n = static_cast<double>(count * L), p = 0.25, sd = std::sqrt(n * p * (1 - p));
  for (double h : hist) EXPECT_NEAR(h, n * p, 3 * sd);
}

TEST(TrainingData, RoundRobinAndDisjointFamilies) {
  const std::vector<SamplingFamily> fams{{"low", {0.5, 0.5, 0, 0, 0}},
                                         {"high", {0, 0, 0, 0.5, 0.5}},
                                         {"mid", {0, 0, 1, 0, 0}},
                                         {"all", {0.2, 0.2, 0.2, 0.2, 0.2}}};
  const auto recs = generate_training_data(4, 6, SamplerKind::dpm_solver, [](const ModelSchedule& q) { return static_cast<double>(q.nonzero_count()); }, fams, 1000, 3);
  std::map<std::string, int> per;
  std::map<std::string, std::vector<int>> usage;
  for (const auto& r : recs) {
    ++per[r.family];
    auto& u = usage[r.family];
    u.resize(5);
    for (int e : r.schedule.entries) ++u[static_cast<std::size_t>(e)];
  }
  for (const auto& f : fams) EXPECT_EQ(per[f.name], 250);
  for (int m = 0; m < 5; ++m) EXPECT_FALSE(usage["low"][m] > 0 && usage["high"][m] > 0);
}

TEST(TrainingData, Validation) {
  const LinearCountOracle o{{0.0, 1.0}};
  EXPECT_THROW(generate_training_data(1, 3, SamplerKind::ddim, o, {{"bad", {0.5, 0.4}}}, 5, 1), ConfigError);
  EXPECT_THROW(generate_training_data(1, 3, SamplerKind::ddim, o, {{"bad", {1.0}}}, 5, 1), ConfigError);
  EXPECT_THROW(generate_training_data(1, 3, SamplerKind::ddim, o, {}, 5, 1), ConfigError);
  EXPECT_TRUE(generate_training_data(1, 3, SamplerKind::ddim, o, {{"u", {0.5, 0.5}}}, 0, 1).empty());
}

TEST(CrossingZoo, LossCurvesCross) {
  const auto zoo = crossing_zoo();
  const auto ts = discretize_linear(20, 0.01, 1.0);
  const auto a = per_step_loss(zoo[0], GaussianMixture::ring(), kNs, ts, 2000, 11);
  const auto b = per_step_loss(zoo[1], GaussianMixture::ring(), kNs, ts, 2000, 11);
  int changes = 0;
  for (std::size_t i = 1; i < ts.size(); ++i) changes += ((a[i] - b[i]) > 0) != ((a[i - 1] - b[i - 1]) > 0);
  EXPECT_GE(changes, 1);
}

TEST(NeuralDenoiser, TrainingReducesLoss) {
  const auto gm = bimodal();
  for (std::size_t width : {16, 64}) {
    NeuralTrainConfig cfg;
    cfg.width = width;
    cfg.steps = 400;
    cfg.batch = 64;
    cfg.seed = 5;
    const auto [net, hist] = train_neural_eps(gm, kNs, cfg);
    double head = 0, tail = 0;
    for (std::size_t i = 0; i < 50; ++i) {
      head += hist[i];
      tail += hist[hist.size() - 1 - i];
    }
    EXPECT_LT(tail, head) << "width " << width;
    const auto d = neural_model("nn", 1.0, net);
    std::mt19937_64 rng(1);
    const Matrix e = d.eps(gm, kNs, row({0.5}), 0.5, rng);
    EXPECT_TRUE(e.allFinite());
  }
}
