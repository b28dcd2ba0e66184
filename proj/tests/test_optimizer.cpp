#include "smoothsparse/experiments.hpp"

#include <gtest/gtest.h>

using namespace smoothsparse;

namespace {

// f(theta) = (theta - 3)^2 over a single-entry psi.
struct Quadratic {
  Index num_samples() const { return 1; }
  double evaluate(const ModelParams& p, std::span<const Index>, ModelParams& g) const {
    g.psi = 2.0 * (p.psi.array() - 3.0).matrix();
    g.xi = p.xi.zeros_like();
    return (p.psi.array() - 3.0).square().sum();
  }
  std::optional<double> validation_loss(const ModelParams&) const { return std::nullopt; }
  Vector beta(const ModelParams& p) const { return p.psi; }
};

struct Exploding {
  Index num_samples() const { return 1; }
  double evaluate(const ModelParams& p, std::span<const Index>, ModelParams& g) const {
    g.psi = Vector::Constant(1, std::exp(std::abs(p.psi[0])) * 1e300);
    g.xi = p.xi;
    return p.psi[0];
  }
  std::optional<double> validation_loss(const ModelParams&) const { return std::nullopt; }
  Vector beta(const ModelParams& p) const { return p.psi; }
};

Dataset toy() {
  Dataset d;
  d.X = Matrix::Constant(1, 1, 1.5);
  d.y = Vector::Constant(1, 1.0);
  return d;
}

}  // namespace

TEST(Schedule, Values) {
  EXPECT_EQ(schedule_lr(Schedule::Constant, 5, 10), 1.0);
  EXPECT_EQ(schedule_lr(Schedule::Cosine, 0, 10), 1.0);
  EXPECT_EQ(schedule_lr(Schedule::Cosine, 10, 10), 0.5 * (1.0 + std::cos(std::numbers::pi)));
  EXPECT_NEAR(schedule_lr(Schedule::Cosine, 5, 10), 0.5, 1e-15);
  EXPECT_EQ(schedule_lr(Schedule::InverseTime, 0, 10, 1e-6), 1.0);
  EXPECT_DOUBLE_EQ(schedule_lr(Schedule::InverseTime, 4, 10, 0.25), 0.5);
}

TEST(OptimConfig, Validation) {
  OptimConfig c;
  EXPECT_NO_THROW(c.validate());
  c.learning_rate = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = OptimConfig{};
  c.momentum = 1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = OptimConfig{};
  c.patience = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = OptimConfig{};
  c.factor_lr_scale["v"] = -1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(InitSurrogate, Examples) {
  const auto hpp = ParamSpec::make(ParamKind::HPP, 2);
  const FactorSet s = init_surrogate(hpp, Vector{{4.0, 0.0}}, InitScheme::svf(0.0));
  EXPECT_EQ(s[0], (Vector{{2.0, 0.0}}));
  EXPECT_EQ(s[1], (Vector{{2.0, 0.0}}));

  const auto h3 = ParamSpec::make(ParamKind::HPPk, 2, 3.0);
  const FactorSet o = init_surrogate(h3, Vector{{5.0, -1.0}}, InitScheme::ones_tail());
  EXPECT_EQ(o[0], (Vector{{5.0, -1.0}}));
  EXPECT_EQ(o[1], Vector::Ones(2));
  EXPECT_EQ(o[2], Vector::Ones(2));
}

TEST(InitSurrogate, RoundTripWithoutJitter) {
  const GroupPartition groups(std::vector<Index>{2, 1, 3});
  for (ParamKind kind : kAllParamKinds) {
    const ParamSpec spec = sweep_spec(kind, groups);
    CounterRng rng(1, static_cast<std::uint64_t>(kind));
    const Vector b = rng.normal_vector(6);
    for (const InitScheme s : {InitScheme::svf(0.0), InitScheme::ones_tail()}) {
      const Vector back = forward(spec, init_surrogate(spec, b, s));
      EXPECT_LE((back - b).lpNorm<Eigen::Infinity>(), 1e-12) << to_string(kind);
    }
  }
}

TEST(InitSurrogate, JitterKeepsZeroButLeavesSignFree) {
  const auto hpp = ParamSpec::make(ParamKind::HPP, 2);
  const FactorSet s = init_surrogate(hpp, Vector{{4.0, 0.0}}, InitScheme::svf(1e-4));
  EXPECT_EQ(s[0][1], 0.0);
  EXPECT_EQ(s[1][1], 1e-4);
  EXPECT_EQ(forward(hpp, s)[1], 0.0);
}

TEST(InitSurrogate, RandomScaledProductSd) {
  const auto h3 = ParamSpec::make(ParamKind::HPPk, 20000, 3.0);
  CounterRng rng(4);
  const FactorSet xi = init_surrogate(h3, Vector::Zero(20000), InitScheme::random_scaled(0.5), &rng);
  const Vector b = forward(h3, xi);
  const double sd = std::sqrt(b.squaredNorm() / 20000.0);
  EXPECT_NEAR(sd, 0.5, 0.02);
  EXPECT_THROW(init_surrogate(h3, Vector::Zero(20000), InitScheme::random_scaled(0.5)), std::invalid_argument);
}

TEST(Run, QuadraticContraction) {
  ModelParams p;
  p.psi = Vector::Zero(1);
  OptimConfig c;
  c.learning_rate = 0.1;
  c.epochs = 200;
  const RunResult r = run(Quadratic{}, p, c);
  EXPECT_LE(std::abs(r.params.psi[0] - 3.0), 1e-6);
  EXPECT_EQ(r.trace.size(), 200u);
}

TEST(Run, NonFiniteAborts) {
  ModelParams p;
  p.psi = Vector::Constant(1, 1.0);
  OptimConfig c;
  c.learning_rate = 1.0;
  EXPECT_THROW(run(Exploding{}, p, c), NumericalError);
}

TEST(Run, ToyLandscape) {
  const Dataset d = toy();
  const auto hpp = ParamSpec::make(ParamKind::HPP, 1);
  ModelParams p;
  p.xi = make_factors(hpp, 1.0);
  OptimConfig c;
  c.learning_rate = 0.05;
  c.epochs = 3000;
  const RunResult r = run(LinearSurrogate{&d, nullptr, hpp, 2.0, {}}, p, c);
  const double uv = r.params.xi[0][0] * r.params.xi[1][0];
  EXPECT_NEAR(uv, 2.0 / 9.0, 1e-3);
  EXPECT_NEAR(surrogate_objective(LinearModel{}, d, r.params.xi, Vector(), hpp, 2.0).value, 8.0 / 9.0, 1e-3);
}

TEST(Run, DeterministicTraces) {
  CounterRng rng(5);
  Dataset d;
  d.X = rng.normal_vector(60 * 5).reshaped(60, 5);
  d.y = rng.normal_vector(60);
  const auto spec = ParamSpec::make(ParamKind::HPPk, 5, 3.0);
  ModelParams p;
  p.xi = init_surrogate(spec, rng.normal_vector(5, 0.3), InitScheme::ones_tail());
  OptimConfig c;
  c.learning_rate = 0.01;
  c.momentum = 0.9;
  c.batch_size = 7;
  c.epochs = 50;
  c.seed = 42;
  const RunResult a = run(LinearSurrogate{&d, &d, spec, 0.1, {}}, p, c);
  const RunResult b = run(LinearSurrogate{&d, &d, spec, 0.1, {}}, p, c);
  EXPECT_EQ(a.trace, b.trace);
  EXPECT_EQ(a.params.xi.flatten(), b.params.xi.flatten());
  c.seed = 43;
  const RunResult e = run(LinearSurrogate{&d, &d, spec, 0.1, {}}, p, c);
  EXPECT_NE(a.params.xi.flatten(), e.params.xi.flatten());
}

TEST(Run, EarlyStoppingRestoresBest) {
  CounterRng rng(6);
  Dataset train, val;
  train.X = rng.normal_vector(20 * 10).reshaped(20, 10);
  train.y = rng.normal_vector(20);
  val.X = rng.normal_vector(20 * 10).reshaped(20, 10);
  val.y = rng.normal_vector(20);
  const auto spec = ParamSpec::make(ParamKind::HPP, 10);
  ModelParams p;
  p.xi = init_surrogate(spec, Vector::Zero(10), InitScheme::svf(0.1));
  OptimConfig c;
  c.learning_rate = 0.05;
  c.epochs = 2000;
  c.patience = 5;
  const LinearSurrogate obj{&train, &val, spec, 0.0, {}};
  const RunResult r = run(obj, p, c);
  ASSERT_GE(r.best_epoch, 0);
  EXPECT_LT(r.trace.size(), 2000u);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& t : r.trace) best = std::min(best, t.val_loss);
  EXPECT_DOUBLE_EQ(*obj.validation_loss(r.params), best);
}

TEST(Run, UnknownFactorScaleRejected) {
  const auto spec = ParamSpec::make(ParamKind::HPP, 1);
  ModelParams p;
  p.xi = make_factors(spec, 1.0);
  OptimConfig c;
  c.factor_lr_scale["w"] = 0.5;
  const Dataset d = toy();
  EXPECT_THROW(run(LinearSurrogate{&d, nullptr, spec, 1.0, {}}, p, c), std::invalid_argument);
}

TEST(Run, ZeroStaysZeroWithoutJitter) {
  CounterRng rng(7);
  Dataset d;
  d.X = rng.normal_vector(30 * 4).reshaped(30, 4);
  d.y = d.X * Vector{{1.0, -2.0, 0.5, 3.0}};
  const auto spec = ParamSpec::make(ParamKind::HPP, 4);
  ModelParams p;
  p.xi = init_surrogate(spec, Vector{{1.0, 0.0, 0.0, 1.0}}, InitScheme::svf(0.0));
  OptimConfig c;
  c.learning_rate = 0.05;
  c.epochs = 500;
  const RunResult r = run(LinearSurrogate{&d, nullptr, spec, 0.01, {}}, p, c);
  const Vector b = forward(spec, r.params.xi);
  EXPECT_EQ(b[1], 0.0);
  EXPECT_EQ(b[2], 0.0);
  EXPECT_NE(b[0], 0.0);
}

TEST(Run, BalanceAtConvergence) {
  CounterRng rng(8);
  Dataset d;
  d.X = rng.normal_vector(100 * 5).reshaped(100, 5);
  d.y = d.X * Vector{{1.0, -2.0, 0.0, 0.0, 0.7}} + 0.1 * rng.normal_vector(100);
  const auto spec = ParamSpec::make(ParamKind::HPP, 5);
  ModelParams p;
  p.xi = make_factors(spec, 0.5);
  OptimConfig c;
  c.learning_rate = 0.05;
  c.momentum = 0.9;
  c.epochs = 5000;
  const RunResult r = run(LinearSurrogate{&d, nullptr, spec, 0.2, {}}, p, c);
  const Vector b = forward(spec, r.params.xi);
  for (Index i = 0; i < 5; ++i) {
    const double u = r.params.xi[0][i], v = r.params.xi[1][i];
    EXPECT_LE(std::abs(u * u - v * v), 1e-4 * std::max(1.0, std::abs(b[i])));
  }
}

TEST(Threshold, Examples) {
  EXPECT_EQ(threshold(Vector{{1e-8, 0.5}}, 1e-6), (Vector{{0.0, 0.5}}));
  EXPECT_EQ(threshold(Vector{{0.0, 1e-300}}, 0.0), (Vector{{0.0, 1e-300}}));
  EXPECT_EQ(threshold_groups(Vector{{3e-7, 4e-7}}, 1e-6, GroupPartition(std::vector<Index>{2})), Vector::Zero(2));
  EXPECT_THROW(threshold(Vector::Ones(2), -1.0), std::invalid_argument);
}

TEST(SelectThreshold, NoiselessTieGoesToLargest) {
  CounterRng rng(9);
  Dataset val;
  val.X = rng.normal_vector(50 * 4).reshaped(50, 4);
  const Vector bstar{{2.0, 0.0, -1.0, 0.0}};
  val.y = val.X * bstar;
  const ThresholdChoice c = select_threshold(bstar, {0.0, 0.1, 0.5, 0.9, 1.0, 1.5}, val);
  EXPECT_EQ(c.tau, 0.9);
  EXPECT_EQ(select_threshold(bstar, {0.3}, val).tau, 0.3);
  EXPECT_THROW(select_threshold(bstar, {}, val), std::invalid_argument);
}

TEST(SelectThreshold, RecoversPlantedSupport) {
  CounterRng rng(10);
  Dataset val;
  val.X = rng.normal_vector(200 * 6).reshaped(200, 6);
  const Vector bstar{{1.5, 0.0, -2.0, 0.0, 0.0, 1.0}};
  val.y = val.X * bstar + 0.05 * rng.normal_vector(200);
  Vector bhat = bstar;
  bhat[1] = 0.02;
  bhat[3] = -0.01;
  bhat[4] = 0.005;
  const auto taus = threshold_grid(bhat);
  const ThresholdChoice c = select_threshold(bhat, taus, val);
  // exhaustive check over the grid
  double best = std::numeric_limits<double>::infinity();
  for (double t : taus) best = std::min(best, LinearModel{}.loss(val, threshold(bhat, t), Vector()));
  EXPECT_EQ(c.val_loss, best);
  const Vector chosen = threshold(bhat, c.tau);
  for (Index i = 0; i < 6; ++i) EXPECT_EQ(chosen[i] != 0.0, bstar[i] != 0.0);
}

TEST(CounterRng, StreamsIndependentAndReproducible) {
  CounterRng a(1, 2), b(1, 2), c(1, 3);
  const auto x = a(), y = b(), z = c();
  EXPECT_EQ(x, y);
  EXPECT_NE(x, z);
  CounterRng u(3);
  double mean = 0.0;
  for (int i = 0; i < 10000; ++i) mean += u.uniform();
  EXPECT_NEAR(mean / 10000.0, 0.5, 0.02);
}
