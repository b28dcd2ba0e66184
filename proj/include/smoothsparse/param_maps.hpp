#pragma once

// Catalogue of Hadamard product / difference / power parametrizations
// beta = K(xi), their vector-Jacobian products, weighted squared-l2
// surrogate penalties, induced base regularizers and closed-form minimizers
// of the penalty over a fiber K^{-1}(beta).

#include "smoothsparse/spaces.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace smoothsparse {

enum class ParamKind {
  HPP,
  HDP,
  GHPP,
  AdjGHPP,
  HPPk,
  GHPPk,
  GHPPk1k,
  HPPkShared,
  HDPk,
  HDPkShared,
  HPowP,
  Powerprop,
  GHPowP,
  GHPowPk1k,
};

inline constexpr std::array<ParamKind, 14> kAllParamKinds = {
    ParamKind::HPP,        ParamKind::HDP,   ParamKind::GHPP,      ParamKind::AdjGHPP, ParamKind::HPPk,
    ParamKind::GHPPk,      ParamKind::GHPPk1k, ParamKind::HPPkShared, ParamKind::HDPk,  ParamKind::HDPkShared,
    ParamKind::HPowP,      ParamKind::Powerprop, ParamKind::GHPowP,  ParamKind::GHPowPk1k,
};

inline std::string_view to_string(ParamKind kind) {
  switch (kind) {
    case ParamKind::HPP: return "hpp";
    case ParamKind::HDP: return "hdp";
    case ParamKind::GHPP: return "ghpp";
    case ParamKind::AdjGHPP: return "adj_ghpp";
    case ParamKind::HPPk: return "hppk";
    case ParamKind::GHPPk: return "ghppk";
    case ParamKind::GHPPk1k: return "ghppk1k";
    case ParamKind::HPPkShared: return "hppk_shared";
    case ParamKind::HDPk: return "hdpk";
    case ParamKind::HDPkShared: return "hdpk_shared";
    case ParamKind::HPowP: return "hpowp";
    case ParamKind::Powerprop: return "powerprop";
    case ParamKind::GHPowP: return "ghpowp";
    case ParamKind::GHPowPk1k: return "ghpowpk1k";
  }
  return "?";
}

inline std::optional<ParamKind> parse_param_kind(std::string_view name) {
  for (ParamKind kind : kAllParamKinds)
    if (to_string(kind) == name) return kind;
  return std::nullopt;
}

/// True for kinds whose second factor is shared within groups.
inline bool is_grouped(ParamKind kind) {
  switch (kind) {
    case ParamKind::GHPP:
    case ParamKind::AdjGHPP:
    case ParamKind::GHPPk:
    case ParamKind::GHPPk1k:
    case ParamKind::GHPowP:
    case ParamKind::GHPowPk1k: return true;
    default: return false;
  }
}

inline bool is_power_kind(ParamKind kind) {
  return kind == ParamKind::HPowP || kind == ParamKind::Powerprop || kind == ParamKind::GHPowP ||
         kind == ParamKind::GHPowPk1k;
}

/// Kinds whose depth is fixed at two.
inline bool is_fixed_depth(ParamKind kind) {
  return kind == ParamKind::HPP || kind == ParamKind::HDP || kind == ParamKind::GHPP || kind == ParamKind::AdjGHPP;
}

/// Kinds built from a difference of two products (no zero-product property).
inline bool is_difference_kind(ParamKind kind) {
  return kind == ParamKind::HDP || kind == ParamKind::HDPk || kind == ParamKind::HDPkShared;
}

/// A parametrization: kind, depth parameters and the group partition of beta.
struct ParamSpec {
  ParamKind kind = ParamKind::HPP;
  double k = 2.0;
  double k1 = 1.0;
  GroupPartition partition;

  /// Builds and validates a spec. Ungrouped kinds replace `partition` by the
  /// trivial partition of the same dimension.
  static ParamSpec make(ParamKind kind, const GroupPartition& partition, double k = 2.0, double k1 = 1.0) {
    ParamSpec s;
    s.kind = kind;
    s.k = is_fixed_depth(kind) ? 2.0 : k;
    s.k1 = k1;
    s.partition = is_grouped(kind) ? partition : GroupPartition::trivial(partition.dim());
    s.validate();
    return s;
  }
  static ParamSpec make(ParamKind kind, Index d, double k = 2.0, double k1 = 1.0) {
    return make(kind, GroupPartition::trivial(d), k, k1);
  }

  Index dim() const { return partition.dim(); }
  Index num_groups() const { return partition.num_groups(); }
  double k2() const { return k - k1; }
  int depth() const { return static_cast<int>(std::lround(k)); }
  int depth1() const { return static_cast<int>(std::lround(k1)); }
  int depth2() const { return depth() - depth1(); }

  void validate() const {
    if (partition.dim() < 1) throw std::invalid_argument("ParamSpec: empty partition");
    if (!is_grouped(kind) && !partition.is_trivial())
      throw std::invalid_argument("ParamSpec: ungrouped kind requires the trivial partition");
    auto integral = [](double x) { return x == std::round(x); };
    switch (kind) {
      case ParamKind::HPP:
      case ParamKind::HDP:
      case ParamKind::GHPP:
      case ParamKind::AdjGHPP:
        if (k != 2.0) throw std::invalid_argument("ParamSpec: depth-two kind requires k = 2");
        break;
      case ParamKind::HPPk:
      case ParamKind::GHPPk:
      case ParamKind::HPPkShared:
      case ParamKind::HDPk:
      case ParamKind::HDPkShared:
        if (!integral(k) || k < 2.0) throw std::invalid_argument("ParamSpec: k must be an integer >= 2");
        break;
      case ParamKind::GHPPk1k:
        if (!integral(k) || !integral(k1) || k1 < 1.0 || k - k1 < 1.0)
          throw std::invalid_argument("ParamSpec: GHPPk1k requires integers k1 >= 1, k - k1 >= 1");
        break;
      case ParamKind::HPowP:
      case ParamKind::Powerprop:
      case ParamKind::GHPowP:
        if (!(k > 1.0)) throw std::invalid_argument("ParamSpec: power kinds require k > 1");
        break;
      case ParamKind::GHPowPk1k:
        if (!(k1 >= 1.0) || !(k - k1 > 0.0))
          throw std::invalid_argument("ParamSpec: GHPowPk1k requires k1 >= 1 and k - k1 > 0");
        break;
    }
  }
};

/// Surrogate parameter xi: ordered, named factor vectors.
struct FactorSet {
  std::vector<std::string> names;
  std::vector<Vector> factors;

  std::size_t size() const { return factors.size(); }
  Vector& operator[](std::size_t i) { return factors[i]; }
  const Vector& operator[](std::size_t i) const { return factors[i]; }

  Index total_dim() const {
    Index n = 0;
    for (const auto& f : factors) n += f.size();
    return n;
  }

  std::optional<std::size_t> index_of(std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return i;
    return std::nullopt;
  }

  bool same_shape(const FactorSet& o) const {
    if (factors.size() != o.factors.size()) return false;
    for (std::size_t i = 0; i < factors.size(); ++i)
      if (factors[i].size() != o.factors[i].size()) return false;
    return true;
  }

  Vector flatten() const {
    Vector out(total_dim());
    Index off = 0;
    for (const auto& f : factors) {
      out.segment(off, f.size()) = f;
      off += f.size();
    }
    return out;
  }

  void assign_flat(const Eigen::Ref<const Vector>& flat) {
    if (flat.size() != total_dim()) throw std::invalid_argument("FactorSet: flat size mismatch");
    Index off = 0;
    for (auto& f : factors) {
      f = flat.segment(off, f.size());
      off += f.size();
    }
  }

  FactorSet zeros_like() const {
    FactorSet out = *this;
    for (auto& f : out.factors) f.setZero();
    return out;
  }

  FactorSet& operator+=(const FactorSet& o) {
    for (std::size_t i = 0; i < factors.size(); ++i) factors[i] += o.factors[i];
    return *this;
  }
  FactorSet& operator*=(double c) {
    for (auto& f : factors) f *= c;
    return *this;
  }
  friend FactorSet operator*(double c, FactorSet x) { return x *= c; }

  double squared_norm() const {
    double s = 0.0;
    for (const auto& f : factors) s += f.squaredNorm();
    return s;
  }
};

struct FactorShape {
  std::string name;
  Index length = 0;
  bool per_group = false;  // length L rather than d
};

/// Names and lengths of the factors of a spec, in storage order.
inline std::vector<FactorShape> factor_shapes(const ParamSpec& spec) {
  const Index d = spec.dim();
  const Index L = spec.num_groups();
  std::vector<FactorShape> out;
  auto coef = [&](std::string name) { out.push_back({std::move(name), d, false}); };
  auto grp = [&](std::string name) { out.push_back({std::move(name), L, true}); };
  switch (spec.kind) {
    case ParamKind::HPP:
    case ParamKind::HPPkShared:
    case ParamKind::HDPkShared:
    case ParamKind::HPowP: coef("u"); coef("v"); break;
    case ParamKind::HDP: coef("gamma"); coef("delta"); break;
    case ParamKind::GHPP:
    case ParamKind::AdjGHPP:
    case ParamKind::GHPowP: coef("u"); grp("nu"); break;
    case ParamKind::HPPk:
      for (int l = 1; l <= spec.depth(); ++l) coef("u" + std::to_string(l));
      break;
    case ParamKind::GHPPk:
      coef("u");
      for (int r = 1; r < spec.depth(); ++r) grp("nu" + std::to_string(r));
      break;
    case ParamKind::GHPPk1k:
      for (int t = 1; t <= spec.depth1(); ++t) coef("mu" + std::to_string(t));
      for (int r = 1; r <= spec.depth2(); ++r) grp("nu" + std::to_string(r));
      break;
    case ParamKind::HDPk:
      for (int l = 1; l <= spec.depth(); ++l) coef("u" + std::to_string(l));
      for (int l = 1; l <= spec.depth(); ++l) coef("v" + std::to_string(l));
      break;
    case ParamKind::Powerprop: coef("v"); break;
    case ParamKind::GHPowPk1k: coef("mu"); grp("nu"); break;
  }
  return out;
}

inline FactorSet make_factors(const ParamSpec& spec, double fill = 0.0) {
  FactorSet xi;
  for (const auto& s : factor_shapes(spec)) {
    xi.names.push_back(s.name);
    xi.factors.push_back(Vector::Constant(s.length, fill));
  }
  return xi;
}

namespace detail {

inline void check_shape(const ParamSpec& spec, const FactorSet& xi) {
  const auto shapes = factor_shapes(spec);
  if (xi.factors.size() != shapes.size()) throw std::invalid_argument("FactorSet: wrong number of factors");
  for (std::size_t i = 0; i < shapes.size(); ++i)
    if (xi.factors[i].size() != shapes[i].length) throw std::invalid_argument("FactorSet: wrong factor length");
}

/// Repeats the L group values over the d coordinates.
inline Vector expand(const Vector& per_group, const GroupPartition& p) {
  Vector out(p.dim());
  for (Index j = 0; j < p.num_groups(); ++j) {
    const GroupRange r = p.range(j);
    out.segment(r.begin, r.size).setConstant(per_group[j]);
  }
  return out;
}

/// Sums the d coordinates within each group.
inline Vector group_sum(const Vector& x, const GroupPartition& p) {
  Vector out(p.num_groups());
  for (Index j = 0; j < p.num_groups(); ++j) {
    const GroupRange r = p.range(j);
    out[j] = x.segment(r.begin, r.size).sum();
  }
  return out;
}

inline double ipow(double x, int n) {
  double r = 1.0;
  for (int i = 0; i < n; ++i) r *= x;
  return r;
}

/// Element-wise product of factors [first, last) skipping index `skip`.
inline Vector product_except(const FactorSet& xi, std::size_t first, std::size_t last, std::size_t skip) {
  Vector out = Vector::Ones(xi[first].size());
  for (std::size_t l = first; l < last; ++l)
    if (l != skip) out.array() *= xi[l].array();
  return out;
}

/// d/dx |x|^e with the value at x = 0 defined as 0.
inline double abs_pow_deriv(double x, double e) {
  if (x == 0.0) return 0.0;
  return e * abs_pow(x, e - 1.0) * sign(x);
}

/// x |x|^(e-1): sign-preserving power.
inline double signed_pow(double x, double e) { return sign(x) * abs_pow(x, e); }

}  // namespace detail

/// beta = K(xi).
inline Vector forward(const ParamSpec& spec, const FactorSet& xi) {
  detail::check_shape(spec, xi);
  const auto& P = spec.partition;
  const double k = spec.k;
  switch (spec.kind) {
    case ParamKind::HPP: return xi[0].cwiseProduct(xi[1]);
    case ParamKind::HDP: return xi[0].cwiseAbs2() - xi[1].cwiseAbs2();
    case ParamKind::GHPP:
    case ParamKind::AdjGHPP: return xi[0].cwiseProduct(detail::expand(xi[1], P));
    case ParamKind::HPPk: return detail::product_except(xi, 0, xi.size(), xi.size());
    case ParamKind::GHPPk: {
      const Vector nu = detail::product_except(xi, 1, xi.size(), xi.size());
      return xi[0].cwiseProduct(detail::expand(nu, P));
    }
    case ParamKind::GHPPk1k: {
      const auto k1 = static_cast<std::size_t>(spec.depth1());
      const Vector u = detail::product_except(xi, 0, k1, k1);
      const Vector nu = detail::product_except(xi, k1, xi.size(), xi.size());
      return u.cwiseProduct(detail::expand(nu, P));
    }
    case ParamKind::HPPkShared: {
      const int m = spec.depth() - 1;
      return xi[0].binaryExpr(xi[1], [m](double u, double v) { return u * detail::ipow(v, m); });
    }
    case ParamKind::HDPk: {
      const auto kk = static_cast<std::size_t>(spec.depth());
      return detail::product_except(xi, 0, kk, kk) - detail::product_except(xi, kk, 2 * kk, 2 * kk);
    }
    case ParamKind::HDPkShared: {
      const int m = spec.depth();
      return xi[0].unaryExpr([m](double u) { return detail::ipow(u, m); }) -
             xi[1].unaryExpr([m](double v) { return detail::ipow(v, m); });
    }
    case ParamKind::HPowP:
      return xi[0].binaryExpr(xi[1], [k](double u, double v) { return u * abs_pow(v, k - 1.0); });
    case ParamKind::Powerprop: return xi[0].unaryExpr([k](double v) { return detail::signed_pow(v, k); });
    case ParamKind::GHPowP: {
      const Vector s = xi[1].unaryExpr([k](double nu) { return abs_pow(nu, k - 1.0); });
      return xi[0].cwiseProduct(detail::expand(s, P));
    }
    case ParamKind::GHPowPk1k: {
      const double k1 = spec.k1, k2 = spec.k2();
      const Vector u = xi[0].unaryExpr([k1](double mu) { return detail::signed_pow(mu, k1); });
      const Vector s = xi[1].unaryExpr([k2](double nu) { return abs_pow(nu, k2); });
      return u.cwiseProduct(detail::expand(s, P));
    }
  }
  return {};
}

/// J_K(xi)^T g, factor by factor. For power kinds the derivative of |v|^e at
/// v = 0 is taken as 0.
inline FactorSet vjp(const ParamSpec& spec, const FactorSet& xi, const Eigen::Ref<const Vector>& g) {
  detail::check_shape(spec, xi);
  if (g.size() != spec.dim()) throw std::invalid_argument("vjp: cotangent has wrong length");
  const auto& P = spec.partition;
  const double k = spec.k;
  FactorSet out = xi.zeros_like();
  switch (spec.kind) {
    case ParamKind::HPP:
      out[0] = g.cwiseProduct(xi[1]);
      out[1] = g.cwiseProduct(xi[0]);
      break;
    case ParamKind::HDP:
      out[0] = 2.0 * g.cwiseProduct(xi[0]);
      out[1] = -2.0 * g.cwiseProduct(xi[1]);
      break;
    case ParamKind::GHPP:
    case ParamKind::AdjGHPP:
      out[0] = g.cwiseProduct(detail::expand(xi[1], P));
      out[1] = detail::group_sum(g.cwiseProduct(xi[0]), P);
      break;
    case ParamKind::HPPk:
      for (std::size_t l = 0; l < xi.size(); ++l) out[l] = g.cwiseProduct(detail::product_except(xi, 0, xi.size(), l));
      break;
    case ParamKind::GHPPk: {
      const Vector nu = detail::product_except(xi, 1, xi.size(), xi.size());
      out[0] = g.cwiseProduct(detail::expand(nu, P));
      const Vector gu = detail::group_sum(g.cwiseProduct(xi[0]), P);
      for (std::size_t r = 1; r < xi.size(); ++r) out[r] = gu.cwiseProduct(detail::product_except(xi, 1, xi.size(), r));
      break;
    }
    case ParamKind::GHPPk1k: {
      const auto k1 = static_cast<std::size_t>(spec.depth1());
      const Vector u = detail::product_except(xi, 0, k1, k1);
      const Vector nu = detail::product_except(xi, k1, xi.size(), xi.size());
      const Vector g_nu = g.cwiseProduct(detail::expand(nu, P));
      for (std::size_t t = 0; t < k1; ++t) out[t] = g_nu.cwiseProduct(detail::product_except(xi, 0, k1, t));
      const Vector gu = detail::group_sum(g.cwiseProduct(u), P);
      for (std::size_t r = k1; r < xi.size(); ++r) out[r] = gu.cwiseProduct(detail::product_except(xi, k1, xi.size(), r));
      break;
    }
    case ParamKind::HPPkShared: {
      const int m = spec.depth() - 1;
      for (Index i = 0; i < g.size(); ++i) {
        const double u = xi[0][i], v = xi[1][i];
        out[0][i] = g[i] * detail::ipow(v, m);
        out[1][i] = g[i] * u * m * detail::ipow(v, m - 1);
      }
      break;
    }
    case ParamKind::HDPk: {
      const auto kk = static_cast<std::size_t>(spec.depth());
      for (std::size_t l = 0; l < kk; ++l) out[l] = g.cwiseProduct(detail::product_except(xi, 0, kk, l));
      for (std::size_t l = kk; l < 2 * kk; ++l) out[l] = -g.cwiseProduct(detail::product_except(xi, kk, 2 * kk, l));
      break;
    }
    case ParamKind::HDPkShared: {
      const int m = spec.depth();
      for (Index i = 0; i < g.size(); ++i) {
        out[0][i] = g[i] * m * detail::ipow(xi[0][i], m - 1);
        out[1][i] = -g[i] * m * detail::ipow(xi[1][i], m - 1);
      }
      break;
    }
    case ParamKind::HPowP:
      for (Index i = 0; i < g.size(); ++i) {
        const double u = xi[0][i], v = xi[1][i];
        out[0][i] = g[i] * abs_pow(v, k - 1.0);
        out[1][i] = g[i] * u * detail::abs_pow_deriv(v, k - 1.0);
      }
      break;
    case ParamKind::Powerprop:
      for (Index i = 0; i < g.size(); ++i) out[0][i] = g[i] * k * abs_pow(xi[0][i], k - 1.0);
      break;
    case ParamKind::GHPowP: {
      const Vector s = xi[1].unaryExpr([k](double nu) { return abs_pow(nu, k - 1.0); });
      out[0] = g.cwiseProduct(detail::expand(s, P));
      const Vector gu = detail::group_sum(g.cwiseProduct(xi[0]), P);
      for (Index j = 0; j < gu.size(); ++j) out[1][j] = gu[j] * detail::abs_pow_deriv(xi[1][j], k - 1.0);
      break;
    }
    case ParamKind::GHPowPk1k: {
      const double k1 = spec.k1, k2 = spec.k2();
      const Vector s = xi[1].unaryExpr([k2](double nu) { return abs_pow(nu, k2); });
      const Vector se = detail::expand(s, P);
      Vector u(g.size());
      for (Index i = 0; i < g.size(); ++i) {
        const double mu = xi[0][i];
        u[i] = detail::signed_pow(mu, k1);
        out[0][i] = g[i] * se[i] * k1 * abs_pow(mu, k1 - 1.0);
      }
      const Vector gu = detail::group_sum(g.cwiseProduct(u), P);
      for (Index j = 0; j < gu.size(); ++j) out[1][j] = gu[j] * detail::abs_pow_deriv(xi[1][j], k2);
      break;
    }
  }
  return out;
}

/// Per-entry weights w such that R_xi(xi) = sum_f sum_i w_fi xi_fi^2.
inline std::vector<Vector> penalty_weights(const ParamSpec& spec) {
  std::vector<Vector> w;
  for (const auto& s : factor_shapes(spec)) w.push_back(Vector::Ones(s.length));
  switch (spec.kind) {
    case ParamKind::AdjGHPP:
      for (Index j = 0; j < spec.num_groups(); ++j) w[1][j] = static_cast<double>(spec.partition.size(j));
      break;
    case ParamKind::HPPkShared:
    case ParamKind::HPowP:
    case ParamKind::GHPowP: w[1].setConstant(spec.k - 1.0); break;
    case ParamKind::GHPowPk1k:
      w[0].setConstant(spec.k1);
      w[1].setConstant(spec.k2());
      break;
    default: break;
  }
  return w;
}

/// Weighted squared-l2 surrogate penalty R_xi.
inline double surrogate_penalty(const ParamSpec& spec, const FactorSet& xi) {
  detail::check_shape(spec, xi);
  const auto w = penalty_weights(spec);
  double s = 0.0;
  for (std::size_t f = 0; f < xi.size(); ++f) s += (w[f].array() * xi[f].array().square()).sum();
  return s;
}

/// Gradient of R_xi.
inline FactorSet surrogate_penalty_grad(const ParamSpec& spec, const FactorSet& xi) {
  detail::check_shape(spec, xi);
  const auto w = penalty_weights(spec);
  FactorSet out = xi;
  for (std::size_t f = 0; f < xi.size(); ++f) out[f] = 2.0 * w[f].cwiseProduct(xi[f]);
  return out;
}

/// Leading constant c of the induced regularizer R_beta = c * sum_j w_j ||beta_j||_p^q.
///
/// Note: HDPk carries c = k while HDPkShared carries c = 1. Both are the exact
/// constrained minima for their unit-weight penalties; the shared variant sees
/// each of u, v only once in the penalty.
inline double induced_constant(const ParamSpec& spec) {
  switch (spec.kind) {
    case ParamKind::HPP:
    case ParamKind::GHPP:
    case ParamKind::AdjGHPP: return 2.0;
    case ParamKind::HDP:
    case ParamKind::HDPkShared:
    case ParamKind::Powerprop: return 1.0;
    default: return spec.k;
  }
}

/// The base regularizer without its leading constant: exponents, partition and
/// group weights (sqrt|G_j| for AdjGHPP, otherwise 1), lambda = 1.
inline RegSpec base_regularizer(const ParamSpec& spec) {
  RegSpec r;
  r.partition = spec.partition;
  r.lambda = 1.0;
  const double q = 2.0 / spec.k;
  switch (spec.kind) {
    case ParamKind::HPP:
    case ParamKind::HDP: r.p = r.q = 1.0; break;
    case ParamKind::GHPP: r.p = 2.0; r.q = 1.0; break;
    case ParamKind::AdjGHPP:
      r.p = 2.0;
      r.q = 1.0;
      for (Index j = 0; j < spec.num_groups(); ++j) r.weights.push_back(std::sqrt(static_cast<double>(spec.partition.size(j))));
      break;
    case ParamKind::GHPPk:
    case ParamKind::GHPowP: r.p = 2.0; r.q = q; break;
    case ParamKind::GHPPk1k:
    case ParamKind::GHPowPk1k: r.p = 2.0 / spec.k1; r.q = q; break;
    default: r.p = r.q = q; break;
  }
  return r;
}

struct InducedReg {
  RegSpec reg;   // weights include the leading constant
  double value;  // min of R_xi over the fiber of beta
};

/// Closed-form constrained minimum of the surrogate penalty over K^{-1}(beta).
inline InducedReg induced_reg(const ParamSpec& spec, const Eigen::Ref<const Vector>& beta) {
  if (beta.size() != spec.dim()) throw std::invalid_argument("induced_reg: dimension mismatch");
  RegSpec r = base_regularizer(spec);
  const double c = induced_constant(spec);
  std::vector<double> w(static_cast<std::size_t>(spec.num_groups()));
  for (Index j = 0; j < spec.num_groups(); ++j) w[static_cast<std::size_t>(j)] = c * r.weight(j);
  r.weights = std::move(w);
  const double value = lpq_reg(beta, r);
  return {std::move(r), value};
}

/// One canonical minimizer of R_xi over K^{-1}(beta): factor magnitudes are
/// balanced, sign(beta) sits on the first factor, all other factors are
/// non-negative, and zero coordinates (groups) map to zero factors.
inline FactorSet solution_map(const ParamSpec& spec, const Eigen::Ref<const Vector>& beta) {
  if (beta.size() != spec.dim()) throw std::invalid_argument("solution_map: dimension mismatch");
  const auto& P = spec.partition;
  const double k = spec.k;
  FactorSet xi = make_factors(spec);
  const Index d = spec.dim();

  // Group-level: per-group scale a_j for the shared factors, first factor = beta_j / a_j^m.
  auto fill_grouped = [&](const Vector& a, double tail_power, std::size_t first_tail, std::size_t last_tail) {
    for (Index j = 0; j < P.num_groups(); ++j) {
      const GroupRange r = P.range(j);
      for (std::size_t f = first_tail; f < last_tail; ++f) xi[f][j] = a[j];
      if (a[j] == 0.0) continue;
      const double denom = abs_pow(a[j], tail_power);
      for (Index i = r.begin; i < r.end(); ++i) xi[0][i] = beta[i] / denom;
    }
  };

  switch (spec.kind) {
    case ParamKind::HPP:
      for (Index i = 0; i < d; ++i) {
        const double m = std::sqrt(std::abs(beta[i]));
        xi[0][i] = sign(beta[i]) * m;
        xi[1][i] = m;
      }
      break;
    case ParamKind::HDP:
      for (Index i = 0; i < d; ++i) {
        xi[0][i] = std::sqrt(std::max(beta[i], 0.0));
        xi[1][i] = std::sqrt(std::max(-beta[i], 0.0));
      }
      break;
    case ParamKind::GHPP: {
      const Vector a = group_norms(beta, P).cwiseSqrt();
      fill_grouped(a, 1.0, 1, 2);
      break;
    }
    case ParamKind::AdjGHPP: {
      Vector a = group_norms(beta, P);
      for (Index j = 0; j < a.size(); ++j) a[j] = std::sqrt(a[j] / std::sqrt(static_cast<double>(P.size(j))));
      fill_grouped(a, 1.0, 1, 2);
      break;
    }
    case ParamKind::GHPPk:
    case ParamKind::GHPowP: {
      const Vector a = group_norms(beta, P).unaryExpr([k](double n) { return abs_pow(n, 1.0 / k); });
      fill_grouped(a, k - 1.0, 1, xi.size());
      break;
    }
    case ParamKind::GHPPk1k: {
      // nu_r = ||beta_j||_{2/k1}^{1/k}; u_j = beta_j / a^{k2}; mu_t = |u|^{1/k1}, sign on mu_1.
      const auto k1 = static_cast<std::size_t>(spec.depth1());
      const double kk1 = spec.k1, kk2 = spec.k2();
      for (Index j = 0; j < P.num_groups(); ++j) {
        const GroupRange r = P.range(j);
        double s = 0.0;
        for (Index i = r.begin; i < r.end(); ++i) s += abs_pow(beta[i], 2.0 / kk1);
        const double a = abs_pow(s, kk1 / (2.0 * k));
        for (std::size_t f = k1; f < xi.size(); ++f) xi[f][j] = a;
        if (a == 0.0) continue;
        const double denom = abs_pow(a, kk2);
        for (Index i = r.begin; i < r.end(); ++i) {
          const double u = beta[i] / denom;
          const double m = abs_pow(u, 1.0 / kk1);
          for (std::size_t t = 0; t < k1; ++t) xi[t][i] = m;
          xi[0][i] = sign(u) * m;
        }
      }
      break;
    }
    case ParamKind::HPPk:
    case ParamKind::HPPkShared:
    case ParamKind::HPowP:
      for (Index i = 0; i < d; ++i) {
        const double m = abs_pow(beta[i], 1.0 / k);
        for (std::size_t f = 0; f < xi.size(); ++f) xi[f][i] = m;
        xi[0][i] = sign(beta[i]) * m;
      }
      break;
    case ParamKind::HDPk: {
      const auto kk = static_cast<std::size_t>(spec.depth());
      for (Index i = 0; i < d; ++i) {
        const double m = abs_pow(beta[i], 1.0 / k);
        const std::size_t first = beta[i] > 0.0 ? 0 : kk;
        if (beta[i] == 0.0) continue;
        for (std::size_t f = first; f < first + kk; ++f) xi[f][i] = m;
      }
      break;
    }
    case ParamKind::HDPkShared:
      for (Index i = 0; i < d; ++i) {
        const double m = abs_pow(beta[i], 1.0 / k);
        if (beta[i] > 0.0) xi[0][i] = m;
        if (beta[i] < 0.0) xi[1][i] = m;
      }
      break;
    case ParamKind::Powerprop:
      for (Index i = 0; i < d; ++i) xi[0][i] = sign(beta[i]) * abs_pow(beta[i], 1.0 / k);
      break;
    case ParamKind::GHPowPk1k: {
      // a_j = ||beta_j||_{2/k1}^{1/k}; mu_i = sign(beta_i) (|beta_i| / a^{k2})^{1/k1}.
      const double kk1 = spec.k1, kk2 = spec.k2();
      for (Index j = 0; j < P.num_groups(); ++j) {
        const GroupRange r = P.range(j);
        double s = 0.0;
        for (Index i = r.begin; i < r.end(); ++i) s += abs_pow(beta[i], 2.0 / kk1);
        const double a = abs_pow(s, kk1 / (2.0 * k));
        xi[1][j] = a;
        if (a == 0.0) continue;
        const double denom = abs_pow(a, kk2);
        for (Index i = r.begin; i < r.end(); ++i) xi[0][i] = sign(beta[i]) * abs_pow(beta[i] / denom, 1.0 / kk1);
      }
      break;
    }
  }
  return xi;
}

/// AM-GM balance residual. For each group, every factor contributes
/// w_f ||xi_f restricted to the group||^2 / e_f, where e_f is the power with
/// which the factor enters K. At a fiber minimizer all contributions of a
/// group coincide; for difference kinds the inactive side must vanish instead.
/// Returns the worst (max - min) / max(1, max) over groups.
inline double balance_residual(const ParamSpec& spec, const FactorSet& xi) {
  detail::check_shape(spec, xi);
  const auto shapes = factor_shapes(spec);
  const auto w = penalty_weights(spec);
  const auto& P = spec.partition;
  std::vector<double> expo(xi.size(), 1.0);
  if (spec.kind == ParamKind::HPPkShared || spec.kind == ParamKind::HPowP || spec.kind == ParamKind::GHPowP)
    expo[1] = spec.k - 1.0;
  if (spec.kind == ParamKind::GHPowPk1k) {
    expo[0] = spec.k1;
    expo[1] = spec.k2();
  }

  double worst = 0.0;
  for (Index j = 0; j < P.num_groups(); ++j) {
    const GroupRange r = P.range(j);
    std::vector<double> c(xi.size());
    for (std::size_t f = 0; f < xi.size(); ++f) {
      const double sq = shapes[f].per_group ? w[f][j] * xi[f][j] * xi[f][j]
                                            : (w[f].segment(r.begin, r.size).array() *
                                               xi[f].segment(r.begin, r.size).array().square()).sum();
      c[f] = sq / expo[f];
    }
    if (is_difference_kind(spec.kind)) {
      const std::size_t half = xi.size() / 2;
      double plus = 0.0, minus = 0.0;
      for (std::size_t f = 0; f < half; ++f) plus += c[f];
      for (std::size_t f = half; f < xi.size(); ++f) minus += c[f];
      const std::size_t act = plus >= minus ? 0 : half;
      const std::size_t idle = half - act;
      const auto [lo, hi] = std::minmax_element(c.begin() + act, c.begin() + act + half);
      const double idle_max = *std::max_element(c.begin() + idle, c.begin() + idle + half);
      worst = std::max(worst, std::max(*hi - *lo, idle_max) / std::max(1.0, *hi));
    } else {
      const auto [lo, hi] = std::minmax_element(c.begin(), c.end());
      worst = std::max(worst, (*hi - *lo) / std::max(1.0, *hi));
    }
  }
  return worst;
}

}  // namespace smoothsparse
