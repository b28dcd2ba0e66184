#pragma once

// Base objectives P = L + lambda R_beta and their smooth surrogates
// Q = L o K + (lambda / c) R_xi over linear models and a one-hidden-layer MLP.
//
// lambda convention: the user-facing lambda always multiplies the base
// regularizer without its leading constant c (e.g. ||beta||_1 for HPP, which
// induces 2||beta||_1). The surrogate penalty is scaled by lambda / c so that
// Q(solution_map(beta)) == P(beta).

#include "smoothsparse/param_maps.hpp"

#include <cmath>
#include <optional>
#include <span>
#include <vector>

namespace smoothsparse {

enum class LossKind { MSE, CrossEntropy };

/// Rows of X pair with entries of y. For classification y holds class labels
/// 0..C-1 stored as doubles.
struct Dataset {
  Matrix X;
  Vector y;

  Index n() const { return X.rows(); }
  Index features() const { return X.cols(); }

  void validate() const {
    if (X.rows() < 1) throw std::invalid_argument("Dataset: need at least one sample");
    if (X.rows() != y.size()) throw std::invalid_argument("Dataset: X and y disagree on n");
    if (!X.allFinite() || !y.allFinite()) throw std::invalid_argument("Dataset: non-finite values");
  }

  Dataset rows(std::span<const Index> idx) const {
    Dataset out;
    out.X.resize(static_cast<Index>(idx.size()), X.cols());
    out.y.resize(static_cast<Index>(idx.size()));
    for (std::size_t r = 0; r < idx.size(); ++r) {
      out.X.row(static_cast<Index>(r)) = X.row(idx[r]);
      out.y[static_cast<Index>(r)] = y[idx[r]];
    }
    return out;
  }
};

/// psi: unregularized parameters; xi: the overparametrized block.
struct ModelParams {
  Vector psi;
  FactorSet xi;
};

/// Linear regression y ~ X beta (+ intercept psi[0]) with mean squared error.
struct LinearModel {
  bool intercept = false;

  Index psi_dim() const { return intercept ? 1 : 0; }

  Vector predict(const Matrix& X, const Eigen::Ref<const Vector>& beta, const Vector& psi) const {
    if (X.cols() != beta.size()) throw std::invalid_argument("LinearModel: beta has wrong length");
    if (psi.size() != psi_dim()) throw std::invalid_argument("LinearModel: psi has wrong length");
    Vector out = X * beta;
    if (intercept) out.array() += psi[0];
    return out;
  }

  double loss(const Dataset& data, const Eigen::Ref<const Vector>& beta, const Vector& psi) const {
    return (data.y - predict(data.X, beta, psi)).squaredNorm() / static_cast<double>(data.n());
  }

  /// Loss plus its gradients with respect to beta and psi.
  double loss_grad(const Dataset& data, const Eigen::Ref<const Vector>& beta, const Vector& psi, Vector& g_beta,
                   Vector& g_psi) const {
    const double n = static_cast<double>(data.n());
    const Vector r = data.y - predict(data.X, beta, psi);
    g_beta = (-2.0 / n) * (data.X.transpose() * r);
    g_psi.resize(psi_dim());
    if (intercept) g_psi[0] = -2.0 * r.sum() / n;
    return r.squaredNorm() / n;
  }
};

/// P(psi, beta) = L(psi, beta) + lambda * lpq_reg(beta, reg).
inline double base_objective(const LinearModel& model, const Dataset& data, const Eigen::Ref<const Vector>& beta,
                             const Vector& psi, const RegSpec& reg) {
  reg.validate();
  return model.loss(data, beta, psi) + reg.lambda * lpq_reg(beta, reg);
}

/// Base objective matching a parametrization: the regularizer of
/// base_regularizer(spec) with strength lambda.
inline double base_objective(const LinearModel& model, const Dataset& data, const Eigen::Ref<const Vector>& beta,
                             const Vector& psi, const ParamSpec& spec, double lambda) {
  RegSpec reg = base_regularizer(spec);
  reg.lambda = lambda;
  return base_objective(model, data, beta, psi, reg);
}

/// Scale applied to R_xi for a user-facing lambda.
inline double penalty_scale(const ParamSpec& spec, double lambda) { return lambda / induced_constant(spec); }

struct SurrogateEval {
  double value = 0.0;
  FactorSet grad_xi;
  Vector grad_psi;
};

/// Q(psi, xi) = L(psi, K(xi)) + (lambda / c) R_xi(xi) with its gradients.
inline SurrogateEval surrogate_objective(const LinearModel& model, const Dataset& data, const FactorSet& xi,
                                         const Vector& psi, const ParamSpec& spec, double lambda) {
  const Vector beta = forward(spec, xi);
  Vector g_beta;
  SurrogateEval out;
  const double loss = model.loss_grad(data, beta, psi, g_beta, out.grad_psi);
  const double s = penalty_scale(spec, lambda);
  out.value = loss + s * surrogate_penalty(spec, xi);
  out.grad_xi = vjp(spec, xi, g_beta);
  FactorSet gp = surrogate_penalty_grad(spec, xi);
  gp *= s;
  out.grad_xi += gp;
  return out;
}

/// Elastic-net surrogate over the HPP:
///   Q = L(u*v) + lambda alpha ||u*v||^2 + (lambda (1 - alpha) / 2)(||u||^2 + ||v||^2),
/// equivalent to L(beta) + lambda (1 - alpha) ||beta||_1 + lambda alpha ||beta||_2^2.
struct ElasticNetEval {
  double value = 0.0;
  Vector grad_u;
  Vector grad_v;
};

inline ElasticNetEval elastic_net_surrogate(const Dataset& data, const Vector& u, const Vector& v, double lambda,
                                            double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("elastic_net_surrogate: alpha must lie in (0, 1)");
  if (u.size() != v.size() || u.size() != data.features())
    throw std::invalid_argument("elastic_net_surrogate: shape mismatch");
  const LinearModel model;
  const Vector beta = u.cwiseProduct(v);
  Vector g_beta, g_psi;
  const double loss = model.loss_grad(data, beta, Vector(), g_beta, g_psi);
  const double ridge = lambda * alpha;
  const double l2 = lambda * (1.0 - alpha) / 2.0;
  ElasticNetEval out;
  out.value = loss + ridge * beta.squaredNorm() + l2 * (u.squaredNorm() + v.squaredNorm());
  g_beta += 2.0 * ridge * beta;
  out.grad_u = g_beta.cwiseProduct(v) + 2.0 * l2 * u;
  out.grad_v = g_beta.cwiseProduct(u) + 2.0 * l2 * v;
  return out;
}

// ---------------------------------------------------------------------------
// One-hidden-layer ReLU network with softmax output and mean cross-entropy.

enum class MlpLayer { Hidden, Output };

struct MlpSpec {
  Index inputs = 0;
  Index hidden = 0;
  Index classes = 2;
  MlpLayer overparam = MlpLayer::Hidden;

  void validate() const {
    if (inputs < 1 || hidden < 1 || classes < 2) throw std::invalid_argument("MlpSpec: invalid sizes");
  }
  Index w1_size() const { return hidden * inputs; }
  Index w2_size() const { return classes * hidden; }
  /// Length of beta: the flattened (column-major) designated weight matrix.
  Index beta_dim() const { return overparam == MlpLayer::Hidden ? w1_size() : w2_size(); }
  /// psi = (other weight matrix, b1, b2).
  Index psi_dim() const { return (overparam == MlpLayer::Hidden ? w2_size() : w1_size()) + hidden + classes; }
};

struct MlpWeights {
  Matrix W1;  // hidden x inputs
  Vector b1;
  Matrix W2;  // classes x hidden
  Vector b2;
};

inline MlpWeights mlp_unpack(const MlpSpec& spec, const Eigen::Ref<const Vector>& beta, const Vector& psi) {
  if (beta.size() != spec.beta_dim() || psi.size() != spec.psi_dim())
    throw std::invalid_argument("mlp_unpack: shape mismatch");
  MlpWeights w;
  Index off = 0;
  auto take = [&](Index rows, Index cols) {
    Matrix m = Eigen::Map<const Matrix>(psi.data() + off, rows, cols);
    off += rows * cols;
    return m;
  };
  if (spec.overparam == MlpLayer::Hidden) {
    w.W1 = Eigen::Map<const Matrix>(beta.data(), spec.hidden, spec.inputs);
    w.W2 = take(spec.classes, spec.hidden);
  } else {
    w.W1 = take(spec.hidden, spec.inputs);
    w.W2 = Eigen::Map<const Matrix>(beta.data(), spec.classes, spec.hidden);
  }
  w.b1 = psi.segment(off, spec.hidden);
  off += spec.hidden;
  w.b2 = psi.segment(off, spec.classes);
  return w;
}

/// Inverse of mlp_unpack: splits weights into (beta, psi).
inline std::pair<Vector, Vector> mlp_pack(const MlpSpec& spec, const MlpWeights& w) {
  const Matrix& B = spec.overparam == MlpLayer::Hidden ? w.W1 : w.W2;
  const Matrix& O = spec.overparam == MlpLayer::Hidden ? w.W2 : w.W1;
  Vector beta = Eigen::Map<const Vector>(B.data(), B.size());
  Vector psi(spec.psi_dim());
  psi << Eigen::Map<const Vector>(O.data(), O.size()), w.b1, w.b2;
  return {beta, psi};
}

/// Class scores (n x classes) of the plain network.
inline Matrix mlp_logits(const MlpWeights& w, const Matrix& X) {
  const Matrix H = ((X * w.W1.transpose()).rowwise() + w.b1.transpose()).cwiseMax(0.0);
  return (H * w.W2.transpose()).rowwise() + w.b2.transpose();
}

inline Vector mlp_predict_class(const MlpWeights& w, const Matrix& X) {
  const Matrix Z = mlp_logits(w, X);
  Vector out(Z.rows());
  for (Index i = 0; i < Z.rows(); ++i) {
    Index c = 0;
    Z.row(i).maxCoeff(&c);
    out[i] = static_cast<double>(c);
  }
  return out;
}

namespace detail {
inline Index label_of(double y, Index classes) {
  const auto c = static_cast<Index>(std::lround(y));
  if (c < 0 || c >= classes || static_cast<double>(c) != y) throw std::invalid_argument("mlp: invalid class label");
  return c;
}
}  // namespace detail

/// Mean softmax cross-entropy of the plain network, optionally with gradients.
inline double mlp_loss(const MlpWeights& w, const Dataset& data, MlpWeights* grad = nullptr) {
  const Index n = data.n();
  const Index C = w.W2.rows();
  const Matrix A = (data.X * w.W1.transpose()).rowwise() + w.b1.transpose();
  const Matrix H = A.cwiseMax(0.0);
  Matrix Z = (H * w.W2.transpose()).rowwise() + w.b2.transpose();
  double loss = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double m = Z.row(i).maxCoeff();
    Z.row(i).array() = (Z.row(i).array() - m).exp();
    const double s = Z.row(i).sum();
    const Index c = detail::label_of(data.y[i], C);
    loss -= std::log(Z(i, c) / s);
    Z.row(i) /= s;  // now softmax probabilities
    Z(i, c) -= 1.0;
  }
  loss /= static_cast<double>(n);
  if (grad) {
    const Matrix dZ = Z / static_cast<double>(n);
    grad->W2 = dZ.transpose() * H;
    grad->b2 = dZ.colwise().sum().transpose();
    Matrix dA = dZ * w.W2;
    dA.array() *= (A.array() > 0.0).cast<double>();
    grad->W1 = dA.transpose() * data.X;
    grad->b1 = dA.colwise().sum().transpose();
  }
  return loss;
}

/// Q for the MLP with the designated layer replaced by K(xi).
inline SurrogateEval mlp_forward_backward(const MlpSpec& net, const ParamSpec& spec, const ModelParams& params,
                                          const Dataset& batch, double lambda) {
  net.validate();
  if (spec.dim() != net.beta_dim()) throw std::invalid_argument("mlp_forward_backward: spec does not fit the layer");
  const Vector beta = forward(spec, params.xi);
  const MlpWeights w = mlp_unpack(net, beta, params.psi);
  MlpWeights g;
  SurrogateEval out;
  const double loss = mlp_loss(w, batch, &g);
  auto [g_beta, g_psi] = mlp_pack(net, g);
  const double s = penalty_scale(spec, lambda);
  out.value = loss + s * surrogate_penalty(spec, params.xi);
  out.grad_psi = std::move(g_psi);
  out.grad_xi = vjp(spec, params.xi, g_beta);
  FactorSet gp = surrogate_penalty_grad(spec, params.xi);
  gp *= s;
  out.grad_xi += gp;
  return out;
}

/// beta_hat = K(xi_hat) for a linear model.
inline Vector reconstruct(const ModelParams& params, const ParamSpec& spec) { return forward(spec, params.xi); }

/// Plain network with the designated layer collapsed to K(xi_hat).
inline MlpWeights reconstruct(const ModelParams& params, const ParamSpec& spec, const MlpSpec& net) {
  return mlp_unpack(net, forward(spec, params.xi), params.psi);
}

// ---------------------------------------------------------------------------
// Objective adaptors consumed by the optimizer. Each exposes
//   num_samples(), evaluate(params, batch, grad), validation_loss(params), beta(params).

/// Linear model with a Hadamard-overparametrized coefficient vector.
struct LinearSurrogate {
  const Dataset* train = nullptr;
  const Dataset* val = nullptr;
  ParamSpec spec;
  double lambda = 0.0;
  LinearModel model;

  Index num_samples() const { return train->n(); }

  double evaluate(const ModelParams& p, std::span<const Index> batch, ModelParams& grad) const {
    SurrogateEval e = batch.empty() ? surrogate_objective(model, *train, p.xi, p.psi, spec, lambda)
                                    : surrogate_objective(model, train->rows(batch), p.xi, p.psi, spec, lambda);
    grad.xi = std::move(e.grad_xi);
    grad.psi = std::move(e.grad_psi);
    return e.value;
  }

  std::optional<double> validation_loss(const ModelParams& p) const {
    if (!val) return std::nullopt;
    return model.loss(*val, forward(spec, p.xi), p.psi);
  }

  Vector beta(const ModelParams& p) const { return forward(spec, p.xi); }
};

/// Elastic-net surrogate; xi holds the HPP factors (u, v).
struct ElasticNetObjective {
  const Dataset* train = nullptr;
  double lambda = 0.0;
  double alpha = 0.5;

  Index num_samples() const { return train->n(); }

  double evaluate(const ModelParams& p, std::span<const Index> batch, ModelParams& grad) const {
    const ElasticNetEval e = batch.empty() ? elastic_net_surrogate(*train, p.xi[0], p.xi[1], lambda, alpha)
                                           : elastic_net_surrogate(train->rows(batch), p.xi[0], p.xi[1], lambda, alpha);
    grad.xi = p.xi;
    grad.xi[0] = e.grad_u;
    grad.xi[1] = e.grad_v;
    grad.psi.resize(0);
    return e.value;
  }

  std::optional<double> validation_loss(const ModelParams&) const { return std::nullopt; }
  Vector beta(const ModelParams& p) const { return p.xi[0].cwiseProduct(p.xi[1]); }
};

/// MLP with one overparametrized layer.
struct MlpSurrogate {
  const Dataset* train = nullptr;
  const Dataset* val = nullptr;
  MlpSpec net;
  ParamSpec spec;
  double lambda = 0.0;

  Index num_samples() const { return train->n(); }

  double evaluate(const ModelParams& p, std::span<const Index> batch, ModelParams& grad) const {
    SurrogateEval e = batch.empty() ? mlp_forward_backward(net, spec, p, *train, lambda)
                                    : mlp_forward_backward(net, spec, p, train->rows(batch), lambda);
    grad.xi = std::move(e.grad_xi);
    grad.psi = std::move(e.grad_psi);
    return e.value;
  }

  std::optional<double> validation_loss(const ModelParams& p) const {
    if (!val) return std::nullopt;
    return mlp_loss(reconstruct(p, spec, net), *val);
  }

  Vector beta(const ModelParams& p) const { return forward(spec, p.xi); }
};

}  // namespace smoothsparse
