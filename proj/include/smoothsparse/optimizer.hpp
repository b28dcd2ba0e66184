#pragma once

// Seeded heavy-ball (S)GD over ModelParams, learning-rate schedules, SVF-based
// initialization and post-hoc thresholding.

#include "smoothsparse/objectives.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace smoothsparse {

/// Counter-based generator: output n is splitmix64(key + n * golden), where
/// the key mixes (seed, stream). Cheap to fork into independent streams.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) : key_(mix(seed ^ mix(stream + 0x632be59bd9b4e019ULL))) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix(key_ + (counter_++) * 0x9e3779b97f4a7c15ULL); }

  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  double normal() {
    std::normal_distribution<double> dist;
    return dist(*this);
  }

  Vector normal_vector(Index n, double sd = 1.0) {
    Vector out(n);
    std::normal_distribution<double> dist(0.0, sd);
    for (Index i = 0; i < n; ++i) out[i] = dist(*this);
    return out;
  }

  std::uint64_t counter() const { return counter_; }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

enum class Schedule { Constant, Cosine, InverseTime };

/// Learning-rate multiplier for `epoch` out of `total`.
inline double schedule_lr(Schedule schedule, int epoch, int total, double rate = 0.0) {
  switch (schedule) {
    case Schedule::Constant: return 1.0;
    case Schedule::Cosine:
      return 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(epoch) / static_cast<double>(total)));
    case Schedule::InverseTime: return 1.0 / (1.0 + rate * static_cast<double>(epoch));
  }
  return 1.0;
}

struct OptimConfig {
  double learning_rate = 0.01;
  double momentum = 0.0;
  Schedule schedule = Schedule::Constant;
  double decay_rate = 0.0;  // inverse-time rate r
  int epochs = 100;
  Index batch_size = 0;     // 0 means full batch
  std::optional<int> patience;
  std::uint64_t seed = 0;
  std::map<std::string, double> factor_lr_scale;
  double psi_lr_scale = 1.0;
  double warmup_scale = 1.0;  // learning-rate multiplier during the first warmup_epochs
  int warmup_epochs = 0;
  double grad_tol = 0.0;      // full batch only: stop once max |grad| <= grad_tol

  bool full_batch() const { return batch_size <= 0; }

  void validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("OptimConfig: learning_rate must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("OptimConfig: momentum must lie in [0, 1)");
    if (epochs < 1) throw std::invalid_argument("OptimConfig: epochs must be positive");
    if (patience && *patience < 1) throw std::invalid_argument("OptimConfig: patience must be >= 1");
    if (!(decay_rate >= 0.0)) throw std::invalid_argument("OptimConfig: decay_rate must be non-negative");
    if (!(warmup_scale > 0.0) || warmup_epochs < 0) throw std::invalid_argument("OptimConfig: invalid warmup");
    if (!(psi_lr_scale > 0.0)) throw std::invalid_argument("OptimConfig: psi_lr_scale must be positive");
    for (const auto& [name, s] : factor_lr_scale)
      if (!(s > 0.0)) throw std::invalid_argument("OptimConfig: factor scale for '" + name + "' must be positive");
  }
};

struct TraceRecord {
  int epoch = 0;
  double train_loss = 0.0;  // mean objective over the epoch's batches
  double val_loss = std::numeric_limits<double>::quiet_NaN();
  double l1 = 0.0;
  Index nnz = 0;  // |beta_i| > 1e-6
  double lr = 0.0;

  bool operator==(const TraceRecord& o) const {
    auto same = [](double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); };
    return epoch == o.epoch && same(train_loss, o.train_loss) && same(val_loss, o.val_loss) && same(l1, o.l1) &&
           nnz == o.nnz && same(lr, o.lr);
  }
};

using Trace = std::vector<TraceRecord>;

struct RunResult {
  ModelParams params;
  Trace trace;
  int best_epoch = -1;   // epoch restored by early stopping, -1 when unused
  bool converged = false;  // grad_tol reached
};

// ---------------------------------------------------------------------------
// Initialization

enum class InitKind { SvfBalanced, RandomScaled, OnesTail };

struct InitScheme {
  InitKind kind = InitKind::SvfBalanced;
  double jitter = 1e-4;  // svf_balanced: value placed on exactly-zero factors of zero coordinates
  double sigma = 1.0;    // random_scaled: target sd of the entry-wise product

  static InitScheme svf(double jitter = 1e-4) { return {InitKind::SvfBalanced, jitter, 1.0}; }
  static InitScheme random_scaled(double sigma) { return {InitKind::RandomScaled, 0.0, sigma}; }
  static InitScheme ones_tail() { return {InitKind::OnesTail, 0.0, 1.0}; }
};

namespace detail {

inline FactorSet ones_tail(const ParamSpec& spec, const Eigen::Ref<const Vector>& b) {
  FactorSet xi = make_factors(spec, 1.0);
  auto pos = [](double x) { return std::max(x, 0.0); };
  auto neg = [](double x) { return std::max(-x, 0.0); };
  switch (spec.kind) {
    case ParamKind::HDP:
      xi[0] = b.unaryExpr([&](double x) { return std::sqrt(pos(x)); });
      xi[1] = b.unaryExpr([&](double x) { return std::sqrt(neg(x)); });
      break;
    case ParamKind::HDPk: {
      const auto k = static_cast<std::size_t>(spec.depth());
      xi[0] = b.unaryExpr(pos);
      xi[k] = b.unaryExpr(neg);
      break;
    }
    case ParamKind::HDPkShared: {
      const double k = spec.k;
      xi[0] = b.unaryExpr([&](double x) { return abs_pow(pos(x), 1.0 / k); });
      xi[1] = b.unaryExpr([&](double x) { return abs_pow(neg(x), 1.0 / k); });
      break;
    }
    case ParamKind::Powerprop: {
      const double k = spec.k;
      xi[0] = b.unaryExpr([&](double x) { return sign(x) * abs_pow(x, 1.0 / k); });
      break;
    }
    case ParamKind::GHPowPk1k: {
      const double k1 = spec.k1;
      xi[0] = b.unaryExpr([&](double x) { return sign(x) * abs_pow(x, 1.0 / k1); });
      break;
    }
    default: xi[0] = b; break;
  }
  return xi;
}

/// Factors left at zero by the jitter: the first factor of every product
/// term. A symmetric start such as u = v = eps lies on the decaying
/// eigendirection for coordinates that need a negative sign; leaving u = 0 keeps
/// beta exactly zero while both signs stay reachable. Single-factor terms
/// (HDP, HDPkShared, Powerprop) are jittered in full.
inline bool is_sign_factor(const ParamSpec& spec, std::size_t f) {
  switch (spec.kind) {
    case ParamKind::HDP:
    case ParamKind::HDPkShared:
    case ParamKind::Powerprop: return false;
    case ParamKind::HDPk: return f == 0 || f == static_cast<std::size_t>(spec.depth());
    default: return f == 0;
  }
}

}  // namespace detail

/// Surrogate starting point for a target beta0.
///   svf_balanced: solution_map(beta0); exactly-zero factor entries of zero
///     coordinates (groups) are set to `jitter` (0 disables), except on the
///     sign-carrying first factor.
///   ones_tail: first factor carries beta0, the remaining factors are ones.
///   random_scaled: i.i.d. N(0, s^2) factors with s = sigma^(1/k); beta0 only
///     fixes the dimension.
inline FactorSet init_surrogate(const ParamSpec& spec, const Eigen::Ref<const Vector>& beta0, const InitScheme& scheme,
                                CounterRng* rng = nullptr) {
  if (beta0.size() != spec.dim()) throw std::invalid_argument("init_surrogate: beta0 has wrong length");
  switch (scheme.kind) {
    case InitKind::SvfBalanced: {
      FactorSet xi = solution_map(spec, beta0);
      if (scheme.jitter != 0.0) {
        const auto shapes = factor_shapes(spec);
        const Vector gn = group_norms(beta0, spec.partition);
        for (std::size_t f = 0; f < xi.size(); ++f) {
          if (detail::is_sign_factor(spec, f)) continue;
          for (Index i = 0; i < xi[f].size(); ++i) {
            const bool zero_slot = shapes[f].per_group ? gn[i] == 0.0 : beta0[i] == 0.0;
            if (zero_slot && xi[f][i] == 0.0) xi[f][i] = scheme.jitter;
          }
        }
      }
      return xi;
    }
    case InitKind::OnesTail: return detail::ones_tail(spec, beta0);
    case InitKind::RandomScaled: {
      if (!rng) throw std::invalid_argument("init_surrogate: random_scaled needs a generator");
      if (!(scheme.sigma > 0.0)) throw std::invalid_argument("init_surrogate: sigma must be positive");
      FactorSet xi = make_factors(spec);
      const double s = std::pow(scheme.sigma, 1.0 / spec.k);
      for (auto& f : xi.factors) f = rng->normal_vector(f.size(), s);
      return xi;
    }
  }
  throw std::invalid_argument("init_surrogate: unknown scheme");
}

// ---------------------------------------------------------------------------
// Optimization loop

namespace detail {

inline bool all_finite(const ModelParams& p) {
  if (!p.psi.allFinite()) return false;
  for (const auto& f : p.xi.factors)
    if (!f.allFinite()) return false;
  return true;
}

inline double max_abs(const ModelParams& g) {
  double m = g.psi.size() ? g.psi.cwiseAbs().maxCoeff() : 0.0;
  for (const auto& f : g.xi.factors)
    if (f.size()) m = std::max(m, f.cwiseAbs().maxCoeff());
  return m;
}

}  // namespace detail

/// Heavy-ball (S)GD: v <- m v + g; theta <- theta - lr * scale * v.
/// Objective must provide num_samples(), evaluate(params, batch, grad),
/// validation_loss(params) and beta(params); an empty batch means all samples.
template <class Objective>
RunResult run(const Objective& objective, ModelParams params, const OptimConfig& config) {
  config.validate();
  const Index n = objective.num_samples();
  const Index bs = config.full_batch() ? n : std::min(config.batch_size, n);
  const bool full = bs >= n;

  std::vector<double> factor_scale(params.xi.size(), 1.0);
  for (const auto& [name, s] : config.factor_lr_scale) {
    const auto idx = params.xi.index_of(name);
    if (!idx) throw std::invalid_argument("run: unknown factor '" + name + "' in factor_lr_scale");
    factor_scale[*idx] = s;
  }

  ModelParams vel{Vector::Zero(params.psi.size()), params.xi.zeros_like()};
  ModelParams grad;
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});

  RunResult out;
  ModelParams best;
  double best_val = std::numeric_limits<double>::infinity();
  int since_best = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double lr = config.learning_rate * schedule_lr(config.schedule, epoch, config.epochs, config.decay_rate);
    if (epoch < config.warmup_epochs) lr *= config.warmup_scale;
    if (!full) {
      CounterRng rng(config.seed, static_cast<std::uint64_t>(epoch));
      std::shuffle(order.begin(), order.end(), rng);
    }
    double loss_sum = 0.0;
    int batches = 0;
    bool converged = false;
    for (Index start = 0; start < n; start += bs) {
      const std::span<const Index> batch =
          full ? std::span<const Index>() : std::span<const Index>(order.data() + start, static_cast<std::size_t>(std::min(bs, n - start)));
      const double value = objective.evaluate(params, batch, grad);
      if (!std::isfinite(value))
        throw NumericalError("run: non-finite objective at epoch " + std::to_string(epoch));
      loss_sum += value;
      ++batches;
      if (full && config.grad_tol > 0.0 && detail::max_abs(grad) <= config.grad_tol) {
        converged = true;
        break;
      }
      vel.psi = config.momentum * vel.psi + grad.psi;
      params.psi -= (lr * config.psi_lr_scale) * vel.psi;
      for (std::size_t f = 0; f < params.xi.size(); ++f) {
        vel.xi[f] = config.momentum * vel.xi[f] + grad.xi[f];
        params.xi[f] -= (lr * factor_scale[f]) * vel.xi[f];
      }
      if (!detail::all_finite(params))
        throw NumericalError("run: parameters diverged at epoch " + std::to_string(epoch));
    }

    TraceRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / batches;
    rec.lr = lr;
    const Vector beta = objective.beta(params);
    rec.l1 = beta.lpNorm<1>();
    rec.nnz = (beta.array().abs() > 1e-6).count();
    if (const auto v = objective.validation_loss(params)) rec.val_loss = *v;
    out.trace.push_back(rec);

    if (converged) {
      out.converged = true;
      break;
    }
    if (config.patience && !std::isnan(rec.val_loss)) {
      if (rec.val_loss < best_val) {
        best_val = rec.val_loss;
        best = params;
        out.best_epoch = epoch;
        since_best = 0;
      } else if (++since_best >= *config.patience) {
        break;
      }
    }
  }
  if (config.patience && out.best_epoch >= 0) params = std::move(best);
  out.params = std::move(params);
  return out;
}

// ---------------------------------------------------------------------------
// Thresholding

/// Zeroes entries with |beta_i| <= tau.
inline Vector threshold(const Eigen::Ref<const Vector>& beta, double tau) {
  if (!(tau >= 0.0)) throw std::invalid_argument("threshold: tau must be non-negative");
  return beta.unaryExpr([tau](double x) { return std::abs(x) <= tau ? 0.0 : x; });
}

/// Zeroes groups with ||beta_j||_2 <= tau.
inline Vector threshold_groups(const Eigen::Ref<const Vector>& beta, double tau, const GroupPartition& partition) {
  if (!(tau >= 0.0)) throw std::invalid_argument("threshold_groups: tau must be non-negative");
  if (beta.size() != partition.dim()) throw std::invalid_argument("threshold_groups: dimension mismatch");
  Vector out = beta;
  for (Index j = 0; j < partition.num_groups(); ++j) {
    const GroupRange r = partition.range(j);
    if (beta.segment(r.begin, r.size).norm() <= tau) out.segment(r.begin, r.size).setZero();
  }
  return out;
}

struct ThresholdChoice {
  double tau = 0.0;
  double val_loss = 0.0;
};

/// Picks tau from `taus` minimizing the validation MSE of the thresholded
/// beta (no refit). Ties go to the larger tau.
inline ThresholdChoice select_threshold(const Eigen::Ref<const Vector>& beta, std::vector<double> taus,
                                        const Dataset& val, const Vector& psi = Vector(),
                                        const GroupPartition* groups = nullptr) {
  if (taus.empty()) throw std::invalid_argument("select_threshold: empty threshold grid");
  std::sort(taus.begin(), taus.end());
  const LinearModel model{psi.size() > 0};
  ThresholdChoice best{taus.front(), std::numeric_limits<double>::infinity()};
  for (double tau : taus) {
    const Vector b = groups ? threshold_groups(beta, tau, *groups) : threshold(beta, tau);
    const double loss = model.loss(val, b, psi);
    if (loss <= best.val_loss) best = {tau, loss};
  }
  return best;
}

/// Default threshold grid: 0, 1e-6 and the sorted magnitudes of beta.
inline std::vector<double> threshold_grid(const Eigen::Ref<const Vector>& beta) {
  std::vector<double> taus{0.0, 1e-6};
  for (Index i = 0; i < beta.size(); ++i)
    if (std::abs(beta[i]) > 1e-6) taus.push_back(std::abs(beta[i]));
  std::sort(taus.begin(), taus.end());
  taus.erase(std::unique(taus.begin(), taus.end()), taus.end());
  return taus;
}

}  // namespace smoothsparse
