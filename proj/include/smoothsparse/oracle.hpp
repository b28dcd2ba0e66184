#pragma once

// Reference solvers used to certify the smooth-transfer results. None of them
// calls solution_map or induced_reg.

#include "smoothsparse/optimizer.hpp"

#include <functional>
#include <limits>
#include <vector>

namespace smoothsparse {

struct OracleResult {
  Vector beta;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> history;  // objective after each sweep / iteration (when recorded)
};

// ---------------------------------------------------------------------------
// Numeric constrained minimum of R_xi over the fiber K^{-1}(beta)

struct SvfOptions {
  int restarts = 8;
  std::uint64_t seed = 1;
  int max_outer = 60;
  int max_inner = 4000;
  double feas_tol = 1e-10;
  double grad_tol = 1e-9;
  double rho0 = 100.0;
};

struct SvfResult {
  double value = std::numeric_limits<double>::infinity();
  double violation = std::numeric_limits<double>::infinity();
  bool converged = false;
  int iterations = 0;
};

namespace detail {

/// Power with which the first factor enters K (used to solve for it).
inline double first_factor_power(const ParamSpec& spec) {
  switch (spec.kind) {
    case ParamKind::Powerprop: return spec.k;
    case ParamKind::GHPowPk1k: return spec.k1;
    default: return 1.0;
  }
}

/// Random start; when K is odd and monotone in the first factor, that factor
/// is solved for so the start lies on the fiber.
inline FactorSet svf_start(const ParamSpec& spec, const Vector& beta, CounterRng& rng) {
  const double scale = std::pow(1.0 + beta.cwiseAbs().maxCoeff(), 1.0 / spec.k);
  FactorSet xi = make_factors(spec);
  for (auto& f : xi.factors) f = rng.normal_vector(f.size(), scale);
  if (is_difference_kind(spec.kind)) return xi;  // pure penalty start
  // Magnitudes in [0.5, 1.5] * scale keep the solved first factor moderate.
  for (std::size_t f = 1; f < xi.size(); ++f)
    for (Index i = 0; i < xi[f].size(); ++i) xi[f][i] = (rng.uniform() < 0.5 ? -1.0 : 1.0) * scale * (0.5 + rng.uniform());
  const double e = first_factor_power(spec);
  FactorSet probe = xi;
  probe[0].setOnes();
  const Vector c = forward(spec, probe);
  for (Index i = 0; i < beta.size(); ++i) {
    if (std::abs(c[i]) < 1e-8) continue;
    const double t = beta[i] / c[i];
    xi[0][i] = sign(t) * abs_pow(t, 1.0 / e);
  }
  return xi;
}

struct AugLagrangian {
  const ParamSpec& spec;
  const Vector& beta;
  Vector y;
  double rho;

  double value(const FactorSet& xi) const {
    const Vector c = forward(spec, xi) - beta;
    return surrogate_penalty(spec, xi) + y.dot(c) + 0.5 * rho * c.squaredNorm();
  }

  double value_grad(const FactorSet& xi, Vector& g) const {
    const Vector c = forward(spec, xi) - beta;
    FactorSet gx = surrogate_penalty_grad(spec, xi);
    gx += vjp(spec, xi, y + rho * c);
    g = gx.flatten();
    return surrogate_penalty(spec, xi) + y.dot(c) + 0.5 * rho * c.squaredNorm();
  }
};

/// Gradient descent with Barzilai-Borwein trial steps and Armijo backtracking.
inline int minimize_bb(const AugLagrangian& al, FactorSet& xi, int max_iter, double grad_tol) {
  Vector x = xi.flatten();
  Vector g;
  double f = al.value_grad(xi, g);
  double step = 1e-2;
  Vector x_prev, g_prev;
  FactorSet trial = xi;
  std::vector<double> recent(8, f);  // nonmonotone reference values
  int it = 0;
  for (; it < max_iter; ++it) {
    if (g.lpNorm<Eigen::Infinity>() <= grad_tol) break;
    if (it > 0) {
      const Vector s = x - x_prev, yv = g - g_prev;
      const double sy = s.dot(yv);
      step = sy > 0.0 ? std::clamp(s.squaredNorm() / sy, 1e-12, 1e6) : std::min(step * 2.0, 1e6);
    }
    const double gg = g.squaredNorm();
    const double fref = *std::max_element(recent.begin(), recent.end());
    double ft = 0.0;
    Vector xt;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      xt = x - step * g;
      trial.assign_flat(xt);
      ft = al.value(trial);
      if (std::isfinite(ft) && ft <= fref - 1e-4 * step * gg) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no descent possible at working precision
    recent[static_cast<std::size_t>(it) % recent.size()] = ft;
    x_prev = std::move(x);
    g_prev = std::move(g);
    x = std::move(xt);
    xi.assign_flat(x);
    f = al.value_grad(xi, g);
  }
  return it;
}

inline SvfResult svf_solve_from(const ParamSpec& spec, const Vector& beta, FactorSet xi, const SvfOptions& opt) {
  AugLagrangian al{spec, beta, Vector::Zero(beta.size()), opt.rho0};
  const double feas = opt.feas_tol * std::max(1.0, beta.cwiseAbs().maxCoeff());
  double prev_viol = std::numeric_limits<double>::infinity();
  SvfResult res;
  for (int outer = 0; outer < opt.max_outer; ++outer) {
    res.iterations += minimize_bb(al, xi, opt.max_inner, opt.grad_tol);
    const Vector c = forward(spec, xi) - beta;
    const double viol = c.lpNorm<Eigen::Infinity>();
    res.violation = viol;
    res.value = surrogate_penalty(spec, xi);
    if (!std::isfinite(res.value)) break;
    Vector g;
    al.value_grad(xi, g);
    if (viol <= feas && g.lpNorm<Eigen::Infinity>() <= 1e3 * opt.grad_tol) {
      res.converged = true;
      break;
    }
    al.y += al.rho * c;
    if (viol > 0.25 * prev_viol) al.rho = std::min(al.rho * 2.0, 1e8);
    prev_viol = viol;
  }
  return res;
}

}  // namespace detail

/// min R_xi(xi) s.t. K(xi) = beta by augmented-Lagrangian descent. Both R_xi
/// and K separate over groups, so each group is solved on its own from
/// `restarts` random starts and the best values are summed. Each group is
/// first scaled to max |beta_i| = 1 using K(c xi) = c^k K(xi) and
/// R(c xi) = c^2 R(xi); for depth >= 3 the origin is a strict local minimum of
/// the augmented Lagrangian, and a fixed scale lets rho0 keep starts away from it.
inline SvfResult svf_numeric_min(const ParamSpec& spec, const Eigen::Ref<const Vector>& beta_in,
                                 const SvfOptions& opt = {}) {
  if (beta_in.size() != spec.dim()) throw std::invalid_argument("svf_numeric_min: dimension mismatch");
  if (spec.dim() > 8) throw std::invalid_argument("svf_numeric_min: intended for d <= 8");
  if (opt.restarts < 8) throw std::invalid_argument("svf_numeric_min: need at least 8 restarts");
  SvfResult total;
  total.value = 0.0;
  total.violation = 0.0;
  total.converged = true;
  for (Index j = 0; j < spec.num_groups(); ++j) {
    const GroupRange r = spec.partition.range(j);
    const ParamSpec sub = ParamSpec::make(spec.kind, GroupPartition({r.size}), spec.k, spec.k1);
    const double scale = beta_in.segment(r.begin, r.size).cwiseAbs().maxCoeff();
    const double unit = scale > 0.0 ? scale : 1.0;
    const Vector beta = beta_in.segment(r.begin, r.size) / unit;
    SvfResult best, best_any;
    for (int s = 0; s < opt.restarts; ++s) {
      CounterRng rng(opt.seed, static_cast<std::uint64_t>(j) * 1000003ULL + static_cast<std::uint64_t>(s));
      const SvfResult res = detail::svf_solve_from(sub, beta, detail::svf_start(sub, beta, rng), opt);
      total.iterations += res.iterations;
      if (res.converged && res.value < best.value) best = res;
      if (res.value < best_any.value && std::isfinite(res.violation)) best_any = res;
    }
    const SvfResult& pick = best.converged ? best : best_any;
    total.value += pick.value * std::pow(unit, 2.0 / spec.k);
    total.violation = std::max(total.violation, pick.violation * unit);
    total.converged = total.converged && best.converged;
  }
  return total;
}

// ---------------------------------------------------------------------------
// Convex reference solvers for (1/n)||y - X beta||^2 + penalty

inline double soft_threshold(double z, double t) { return z > t ? z - t : (z < -t ? z + t : 0.0); }

/// Null-solution threshold of the lasso objective: max_j |2 X_j^T y / n|.
inline double lasso_lambda_max(const Matrix& X, const Vector& y) {
  return (2.0 / static_cast<double>(X.rows())) * (X.transpose() * y).cwiseAbs().maxCoeff();
}

/// Group analogue: max_j ||2 X_j^T y / n|| / w_j.
inline double group_lasso_lambda_max(const Matrix& X, const Vector& y, const GroupPartition& partition,
                                     const std::vector<double>& weights = {}) {
  const Vector g = (2.0 / static_cast<double>(X.rows())) * (X.transpose() * y);
  double m = 0.0;
  for (Index j = 0; j < partition.num_groups(); ++j) {
    const GroupRange r = partition.range(j);
    const double w = weights.empty() ? 1.0 : weights[static_cast<std::size_t>(j)];
    m = std::max(m, g.segment(r.begin, r.size).norm() / w);
  }
  return m;
}

inline double lasso_objective(const Matrix& X, const Vector& y, const Vector& beta, double lambda) {
  return (y - X * beta).squaredNorm() / static_cast<double>(X.rows()) + lambda * beta.lpNorm<1>();
}

inline double group_lasso_objective(const Matrix& X, const Vector& y, const Vector& beta, double lambda,
                                    const GroupPartition& partition, const std::vector<double>& weights = {}) {
  RegSpec reg{2.0, 1.0, weights, lambda, partition};
  return (y - X * beta).squaredNorm() / static_cast<double>(X.rows()) + lambda * lpq_reg(beta, reg);
}

inline double elastic_net_objective(const Matrix& X, const Vector& y, const Vector& beta, double lambda,
                                    double alpha) {
  return (y - X * beta).squaredNorm() / static_cast<double>(X.rows()) +
         lambda * (1.0 - alpha) * beta.lpNorm<1>() + lambda * alpha * beta.squaredNorm();
}

namespace detail {

/// Cyclic coordinate descent for (1/n)||y - X b||^2 + l1 ||b||_1 + l2 ||b||^2.
inline OracleResult cd_elastic(const Matrix& X, const Vector& y, double l1, double l2, double tol, int max_sweeps,
                               const Vector* warm, bool record) {
  const Index n = X.rows(), d = X.cols();
  if (n < 1 || d < 1 || y.size() != n) throw std::invalid_argument("coordinate descent: shape mismatch");
  const double nn = static_cast<double>(n);
  const Vector a = X.colwise().squaredNorm().transpose();
  OracleResult out;
  out.beta = warm ? *warm : Vector::Zero(d);
  Vector r = y - X * out.beta;
  auto objective = [&] { return r.squaredNorm() / nn + l1 * out.beta.lpNorm<1>() + l2 * out.beta.squaredNorm(); };
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (Index j = 0; j < d; ++j) {
      const double denom = 2.0 * a[j] / nn + 2.0 * l2;
      if (denom == 0.0) continue;
      const double old = out.beta[j];
      const double rho = X.col(j).dot(r) + a[j] * old;
      const double nb = soft_threshold(2.0 * rho / nn, l1) / denom;
      if (nb != old) {
        r -= (nb - old) * X.col(j);
        out.beta[j] = nb;
        max_change = std::max(max_change, std::abs(nb - old));
      }
    }
    ++out.iterations;
    if (record) out.history.push_back(objective());
    if (max_change <= tol) {
      out.converged = true;
      break;
    }
  }
  out.objective = (y - X * out.beta).squaredNorm() / nn + l1 * out.beta.lpNorm<1>() + l2 * out.beta.squaredNorm();
  return out;
}

/// ||X^T X|| by power iteration.
inline double gram_norm(const Matrix& X, int iterations = 20) {
  Vector v = Vector::Ones(X.cols()) / std::sqrt(static_cast<double>(X.cols()));
  double est = 0.0;
  for (int i = 0; i < iterations; ++i) {
    const Vector w = X.transpose() * (X * v);
    est = w.norm();
    if (est == 0.0) return 0.0;
    v = w / est;
  }
  return est;
}

}  // namespace detail

/// Lasso (1/n)||y - X beta||^2 + lambda ||beta||_1 by cyclic coordinate descent.
inline OracleResult cd_lasso(const Matrix& X, const Vector& y, double lambda, double tol = 1e-12,
                             int max_sweeps = 100000, const Vector* warm = nullptr, bool record = false) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("cd_lasso: lambda must be non-negative");
  return detail::cd_elastic(X, y, lambda, 0.0, tol, max_sweeps, warm, record);
}

/// Elastic net (1/n)||y - X beta||^2 + lambda (1 - alpha) ||beta||_1 + lambda alpha ||beta||^2.
inline OracleResult prox_elastic_net(const Matrix& X, const Vector& y, double lambda, double alpha,
                                     double tol = 1e-12, int max_sweeps = 100000) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("prox_elastic_net: lambda must be non-negative");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("prox_elastic_net: alpha must lie in [0, 1]");
  return detail::cd_elastic(X, y, lambda * (1.0 - alpha), lambda * alpha, tol, max_sweeps, nullptr, false);
}

/// ISTA for the lasso with step 0.95 / Lipschitz.
inline OracleResult ista_lasso(const Matrix& X, const Vector& y, double lambda, double tol = 1e-13,
                               int max_iter = 1000000) {
  const double nn = static_cast<double>(X.rows());
  const double lip = 2.0 * detail::gram_norm(X) / nn;
  const double step = lip > 0.0 ? 0.95 / lip : 1.0;
  OracleResult out;
  out.beta = Vector::Zero(X.cols());
  for (int it = 0; it < max_iter; ++it) {
    const Vector z = out.beta + step * (2.0 / nn) * (X.transpose() * (y - X * out.beta));
    const Vector nb = z.unaryExpr([&](double x) { return soft_threshold(x, step * lambda); });
    const double change = (nb - out.beta).lpNorm<Eigen::Infinity>();
    out.beta = nb;
    out.iterations = it + 1;
    if (change <= tol) {
      out.converged = true;
      break;
    }
  }
  out.objective = lasso_objective(X, y, out.beta, lambda);
  return out;
}

/// prox of tau ||z||_2: max(0, 1 - tau / ||z||) z.
inline Vector block_soft_threshold(const Eigen::Ref<const Vector>& z, double tau) {
  const double nz = z.norm();
  if (nz == 0.0 || tau >= nz) return Vector::Zero(z.size());
  return (1.0 - tau / nz) * z;
}

/// Group lasso (1/n)||y - X beta||^2 + lambda sum_j w_j ||beta_j||_2 by ISTA.
inline OracleResult prox_group_lasso(const Matrix& X, const Vector& y, double lambda, const GroupPartition& partition,
                                     const std::vector<double>& weights = {}, double tol = 1e-13,
                                     int max_iter = 1000000, const Vector* warm = nullptr) {
  if (partition.dim() != X.cols()) throw std::invalid_argument("prox_group_lasso: partition does not match X");
  if (!weights.empty() && static_cast<Index>(weights.size()) != partition.num_groups())
    throw std::invalid_argument("prox_group_lasso: one weight per group required");
  const double nn = static_cast<double>(X.rows());
  const double lip = 2.0 * detail::gram_norm(X) / nn;
  const double step = lip > 0.0 ? 0.95 / lip : 1.0;
  const Matrix G = X.transpose() * X * (2.0 / nn);
  const Vector c = X.transpose() * y * (2.0 / nn);
  OracleResult out;
  out.beta = warm ? *warm : Vector::Zero(X.cols());
  Vector nb(X.cols());
  for (int it = 0; it < max_iter; ++it) {
    const Vector z = out.beta - step * (G * out.beta - c);
    for (Index j = 0; j < partition.num_groups(); ++j) {
      const GroupRange r = partition.range(j);
      const double w = weights.empty() ? 1.0 : weights[static_cast<std::size_t>(j)];
      nb.segment(r.begin, r.size) = block_soft_threshold(z.segment(r.begin, r.size), step * lambda * w);
    }
    const double change = (nb - out.beta).lpNorm<Eigen::Infinity>();
    out.beta = nb;
    out.iterations = it + 1;
    if (change <= tol) {
      out.converged = true;
      break;
    }
  }
  out.objective = group_lasso_objective(X, y, out.beta, lambda, partition, weights);
  return out;
}

/// Direct (sub)gradient descent on the non-smooth lasso / group lasso, with the
/// subgradient of |x| (resp. ||x||) at 0 taken as 0. Used only to demonstrate
/// that it does not produce exact zeros.
inline OracleResult subgradient_gd(const Matrix& X, const Vector& y, double lambda, const OptimConfig& config,
                                   const GroupPartition* groups = nullptr, const Vector* beta0 = nullptr) {
  config.validate();
  if (beta0 && beta0->size() != X.cols()) throw std::invalid_argument("subgradient_gd: beta0 has wrong length");
  const double nn = static_cast<double>(X.rows());
  const Matrix G = X.transpose() * X * (2.0 / nn);
  const Vector c = X.transpose() * y * (2.0 / nn);
  OracleResult out;
  out.beta = beta0 ? *beta0 : Vector::Zero(X.cols());
  Vector vel = Vector::Zero(X.cols());
  Vector g(X.cols());
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = config.learning_rate * schedule_lr(config.schedule, epoch, config.epochs, config.decay_rate);
    g = G * out.beta - c;
    if (groups) {
      for (Index j = 0; j < groups->num_groups(); ++j) {
        const GroupRange r = groups->range(j);
        const double nrm = out.beta.segment(r.begin, r.size).norm();
        if (nrm > 0.0) g.segment(r.begin, r.size) += lambda * out.beta.segment(r.begin, r.size) / nrm;
      }
    } else {
      g += lambda * out.beta.unaryExpr([](double x) { return sign(x); });
    }
    vel = config.momentum * vel + g;
    out.beta -= lr * vel;
    out.iterations = epoch + 1;
  }
  out.objective = groups ? group_lasso_objective(X, y, out.beta, lambda, *groups) : lasso_objective(X, y, out.beta, lambda);
  return out;
}

inline OracleResult subgradient_gd_lasso(const Matrix& X, const Vector& y, double lambda, const OptimConfig& config,
                                         const Vector* beta0 = nullptr) {
  return subgradient_gd(X, y, lambda, config, nullptr, beta0);
}

// ---------------------------------------------------------------------------
// Finite-difference gradient check

/// f(x, grad) returns the value and, when grad is non-null, writes the analytic gradient.
using ScalarField = std::function<double(const Vector&, Vector*)>;

/// Max over coordinates of |analytic - central FD| / max(1, |analytic|).
inline double fd_gradient_check(const ScalarField& f, const Vector& x, double step = 1e-6) {
  if (!(step > 0.0)) throw std::invalid_argument("fd_gradient_check: step must be positive");
  Vector g;
  const double f0 = f(x, &g);
  if (!std::isfinite(f0) || !g.allFinite()) throw NumericalError("fd_gradient_check: non-finite analytic value");
  if (g.size() != x.size()) throw std::invalid_argument("fd_gradient_check: gradient has wrong length");
  double worst = 0.0;
  Vector xp = x;
  for (Index i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + step;
    const double fp = f(xp, nullptr);
    xp[i] = x[i] - step;
    const double fm = f(xp, nullptr);
    xp[i] = x[i];
    const double fd = (fp - fm) / (2.0 * step);
    if (!std::isfinite(fd)) throw NumericalError("fd_gradient_check: non-finite finite difference");
    worst = std::max(worst, std::abs(g[i] - fd) / std::max(1.0, std::abs(g[i])));
  }
  return worst;
}

}  // namespace smoothsparse
