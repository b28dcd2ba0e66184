#include "smoothsparse/experiments.hpp"

#include <gtest/gtest.h>

using namespace smoothsparse;

namespace {

// Single sample with L(beta) = (1 - 1.5 beta)^2.
Dataset toy() {
  Dataset d;
  d.X = Matrix::Constant(1, 1, 1.5);
  d.y = Vector::Constant(1, 1.0);
  return d;
}

Dataset random_regression(Index n, Index d, std::uint64_t seed) {
  CounterRng rng(seed);
  Dataset out;
  out.X = rng.normal_vector(n * d).reshaped(n, d);
  out.y = rng.normal_vector(n);
  return out;
}

const GroupPartition kGroups(std::vector<Index>{2, 1, 3});

}  // namespace

TEST(BaseObjective, ToyValues) {
  const LinearModel m;
  const auto hpp = ParamSpec::make(ParamKind::HPP, 1);
  // user lambda multiplies ||beta||_1; lambda = 2 gives the toy's 2|beta|
  EXPECT_DOUBLE_EQ(base_objective(m, toy(), Vector{{0.0}}, Vector(), hpp, 2.0), 1.0);
  // 1-D lasso stationarity: beta = (1.5 - 1) / 1.5^2 = 2/9
  const double b = 2.0 / 9.0;
  EXPECT_NEAR(base_objective(m, toy(), Vector{{b}}, Vector(), hpp, 2.0), 8.0 / 9.0, 1e-15);
  for (double x : {0.1, 0.2, 0.25, 0.3}) EXPECT_GE(base_objective(m, toy(), Vector{{x}}, Vector(), hpp, 2.0), 8.0 / 9.0);
}

TEST(BaseObjective, LeastSquaresZero) {
  Dataset d;
  d.X = Matrix::Identity(2, 2);
  d.y = Vector{{3.0, 0.5}};
  RegSpec r{1.0, 1.0, {}, 0.0, GroupPartition::trivial(2)};
  EXPECT_EQ(base_objective(LinearModel{}, d, d.y, Vector(), r), 0.0);
  EXPECT_THROW(base_objective(LinearModel{}, d, Vector::Ones(3), Vector(), r), std::invalid_argument);
}

TEST(SurrogateObjective, ToyOriginAndBalancedPoint) {
  const LinearModel m;
  const auto hpp = ParamSpec::make(ParamKind::HPP, 1);
  const SurrogateEval e0 = surrogate_objective(m, toy(), make_factors(hpp), Vector(), hpp, 2.0);
  EXPECT_DOUBLE_EQ(e0.value, 1.0);
  EXPECT_EQ(e0.grad_xi.flatten().norm(), 0.0);
  const FactorSet s = solution_map(hpp, Vector{{2.0 / 9.0}});
  const SurrogateEval e = surrogate_objective(m, toy(), s, Vector(), hpp, 2.0);
  EXPECT_NEAR(e.value, base_objective(m, toy(), Vector{{2.0 / 9.0}}, Vector(), hpp, 2.0), 1e-12);
  EXPECT_NEAR(e.value, 8.0 / 9.0, 1e-12);
  // printed toy form (1 - 1.5uv)^2 + u^2 + v^2
  FactorSet xi = make_factors(hpp);
  xi[0][0] = 0.3;
  xi[1][0] = -0.7;
  const double uv = 0.3 * -0.7;
  EXPECT_NEAR(surrogate_objective(m, toy(), xi, Vector(), hpp, 2.0).value,
              (1 - 1.5 * uv) * (1 - 1.5 * uv) + 0.09 + 0.49, 1e-14);
}

TEST(SurrogateObjective, GradientMatchesFiniteDifferences) {
  for (ParamKind kind : kAllParamKinds) {
    EXPECT_LE(gradcheck_surrogate(sweep_spec(kind, kGroups), 20, 1), 1e-5) << to_string(kind);
  }
}

TEST(SurrogateObjective, InterceptGradient) {
  const Dataset d = random_regression(20, 3, 4);
  const LinearModel m{true};
  const auto spec = ParamSpec::make(ParamKind::HPP, 3);
  CounterRng rng(2);
  FactorSet xi = make_factors(spec);
  xi.assign_flat(rng.normal_vector(6));
  const ScalarField f = [&](const Vector& x, Vector* g) {
    const SurrogateEval e = surrogate_objective(m, d, xi, x, spec, 0.3);
    if (g) *g = e.grad_psi;
    return e.value;
  };
  EXPECT_LE(fd_gradient_check(f, Vector{{0.4}}), 1e-6);
}

TEST(ObjectiveProperties, MajorizationAndEquality) {
  const Dataset d = random_regression(25, 6, 3);
  const LinearModel m;
  for (ParamKind kind : kAllParamKinds) {
    const ParamSpec spec = sweep_spec(kind, kGroups);
    CounterRng rng(12, static_cast<std::uint64_t>(kind));
    for (int t = 0; t < 1000; ++t) {
      FactorSet xi = make_factors(spec);
      xi.assign_flat(rng.normal_vector(xi.total_dim()));
      const Vector b = forward(spec, xi);
      const double P = base_objective(m, d, b, Vector(), spec, 0.8);
      EXPECT_GE(surrogate_objective(m, d, xi, Vector(), spec, 0.8).value, P - 1e-12 * (1.0 + P)) << to_string(kind);
      if (t < 100) {
        const double Q = surrogate_objective(m, d, solution_map(spec, b), Vector(), spec, 0.8).value;
        EXPECT_NEAR(Q, P, 1e-12 * (1.0 + P)) << to_string(kind);
      }
    }
  }
}

TEST(ObjectiveProperties, OriginIsCritical) {
  const Dataset d = random_regression(25, 6, 3);
  for (ParamKind kind : kAllParamKinds) {
    const ParamSpec spec = sweep_spec(kind, kGroups);
    const SurrogateEval e = surrogate_objective(LinearModel{}, d, make_factors(spec), Vector(), spec, 0.8);
    EXPECT_EQ(e.grad_xi.flatten().lpNorm<Eigen::Infinity>(), 0.0) << to_string(kind);
  }
}

TEST(ElasticNet, ValueAndGradient) {
  const Dataset d = random_regression(15, 4, 5);
  const Vector zero = Vector::Zero(4);
  const ElasticNetEval e0 = elastic_net_surrogate(d, zero, zero, 0.7, 0.5);
  EXPECT_DOUBLE_EQ(e0.value, LinearModel{}.loss(d, zero, Vector()));
  EXPECT_THROW(elastic_net_surrogate(d, zero, zero, 0.7, 0.0), std::invalid_argument);
  EXPECT_THROW(elastic_net_surrogate(d, zero, zero, 0.7, 1.0), std::invalid_argument);
  CounterRng rng(6);
  const ScalarField f = [&](const Vector& x, Vector* g) {
    const ElasticNetEval e = elastic_net_surrogate(d, x.head(4), x.tail(4), 0.7, 0.3);
    if (g) {
      g->resize(8);
      *g << e.grad_u, e.grad_v;
    }
    return e.value;
  };
  for (int t = 0; t < 5; ++t) EXPECT_LE(fd_gradient_check(f, rng.normal_vector(8)), 1e-5);
}

TEST(ElasticNet, OrthogonalDesignMatchesProximalOracle) {
  Dataset d;
  d.X = Matrix::Identity(1, 1);
  d.y = Vector{{3.0}};
  const double lambda = 1.0, alpha = 0.5;
  ModelParams p;
  p.xi = solution_map(ParamSpec::make(ParamKind::HPP, 1), Vector{{1.0}});
  OptimConfig oc;
  oc.learning_rate = 0.05;
  oc.epochs = 5000;
  const RunResult r = run(ElasticNetObjective{&d, lambda, alpha}, p, oc);
  const double bhat = r.params.xi[0][0] * r.params.xi[1][0];
  const OracleResult o = prox_elastic_net(d.X, d.y, lambda, alpha);
  // (1/n)(y - b)^2 + 0.5|b| + 0.5 b^2 at n = 1: b = (2y - 0.5) / (2 + 1)
  EXPECT_NEAR(o.beta[0], (6.0 - 0.5) / 3.0, 1e-12);
  EXPECT_NEAR(bhat, o.beta[0], 1e-4);
}

TEST(Mlp, ZeroNetworkLoss) {
  const MlpSpec net{3, 4, 3, MlpLayer::Hidden};
  Dataset d;
  d.X = Matrix::Ones(6, 3);
  d.y = Vector{{0, 1, 2, 0, 1, 2}};
  const MlpWeights w = mlp_unpack(net, Vector::Zero(net.beta_dim()), Vector::Zero(net.psi_dim()));
  EXPECT_NEAR(mlp_loss(w, d), std::log(3.0), 1e-14);
}

TEST(Mlp, GradientCheck) {
  EXPECT_LE(gradcheck_mlp(MlpSpec{5, 4, 3, MlpLayer::Hidden}, 3, 10, 2), 1e-4);
  EXPECT_LE(gradcheck_mlp(MlpSpec{5, 4, 2, MlpLayer::Output}, 2, 10, 2), 1e-4);
}

TEST(Mlp, PackUnpackRoundTrip) {
  const MlpSpec net{3, 4, 2, MlpLayer::Output};
  CounterRng rng(1);
  const Vector b = rng.normal_vector(net.beta_dim());
  const Vector psi = rng.normal_vector(net.psi_dim());
  const auto [b2, psi2] = mlp_pack(net, mlp_unpack(net, b, psi));
  EXPECT_EQ(b2, b);
  EXPECT_EQ(psi2, psi);
}

TEST(Reconstruct, CollapsedModelsAgree) {
  const auto hpp = ParamSpec::make(ParamKind::HPP, 2);
  ModelParams p;
  p.xi = make_factors(hpp);
  p.xi[0] = Vector{{2.0, -1.0}};
  p.xi[1] = Vector{{2.0, 1.0}};
  EXPECT_EQ(reconstruct(p, hpp), (Vector{{4.0, -1.0}}));

  CounterRng rng(3);
  const MlpSpec net{4, 5, 3, MlpLayer::Hidden};
  const auto spec = ParamSpec::make(ParamKind::HPPk, net.beta_dim(), 3.0);
  ModelParams q;
  q.xi = make_factors(spec);
  q.xi.assign_flat(rng.normal_vector(q.xi.total_dim()));
  q.psi = rng.normal_vector(net.psi_dim());
  const Matrix X = rng.normal_vector(100 * 4).reshaped(100, 4);
  const MlpWeights collapsed = reconstruct(q, spec, net);
  const MlpWeights direct = mlp_unpack(net, forward(spec, q.xi), q.psi);
  EXPECT_LE((mlp_logits(collapsed, X) - mlp_logits(direct, X)).cwiseAbs().maxCoeff(), 1e-12);

  const auto gp = ParamSpec::make(ParamKind::GHPowP, GroupPartition(std::vector<Index>{3, 2}), 2.5);
  FactorSet xi = make_factors(gp);
  xi.assign_flat(rng.normal_vector(xi.total_dim()));
  const Vector b = forward(gp, xi);
  for (Index j = 0; j < 2; ++j) {
    const GroupRange r = gp.partition.range(j);
    EXPECT_NEAR(b.segment(r.begin, r.size).norm(),
                xi[0].segment(r.begin, r.size).norm() * std::pow(std::abs(xi[1][j]), 1.5), 1e-12);
  }
}
