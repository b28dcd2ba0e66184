#pragma once

// Index partitions and the (quasi-)norm calculus used by every regularizer
// and metric in the library.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace smoothsparse {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Raised when a numerical routine produces a non-finite value.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// |x|^e computed as exp(e log|x|); exact zero maps to 0 (or 1 for e == 0).
inline double abs_pow(double x, double e) {
  if (x == 0.0) return e == 0.0 ? 1.0 : 0.0;
  return std::exp(e * std::log(std::abs(x)));
}

inline double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

/// Half-open range [begin, begin + size) of parameter indices forming a group.
struct GroupRange {
  Index begin = 0;
  Index size = 0;
  Index end() const { return begin + size; }
  bool operator==(const GroupRange&) const = default;
};

/// Partition of {0..d-1} into L contiguous groups, described by group sizes.
class GroupPartition {
 public:
  GroupPartition() = default;

  explicit GroupPartition(std::vector<Index> sizes) : sizes_(std::move(sizes)) {
    if (sizes_.empty()) throw std::invalid_argument("GroupPartition: at least one group required");
    offsets_.reserve(sizes_.size() + 1);
    offsets_.push_back(0);
    for (Index s : sizes_) {
      if (s < 1) throw std::invalid_argument("GroupPartition: group sizes must be positive");
      offsets_.push_back(offsets_.back() + s);
    }
    group_of_.resize(static_cast<std::size_t>(offsets_.back()));
    for (std::size_t j = 0; j < sizes_.size(); ++j) {
      for (Index i = offsets_[j]; i < offsets_[j + 1]; ++i) group_of_[static_cast<std::size_t>(i)] = static_cast<Index>(j);
    }
  }

  /// L = d singleton groups.
  static GroupPartition trivial(Index d) { return GroupPartition(std::vector<Index>(static_cast<std::size_t>(d), 1)); }

  /// `groups` groups of (as close as possible to) equal size.
  static GroupPartition equal(Index d, Index groups) {
    if (groups < 1 || groups > d) throw std::invalid_argument("GroupPartition::equal: need 1 <= groups <= d");
    std::vector<Index> sizes(static_cast<std::size_t>(groups), d / groups);
    for (Index j = 0; j < d % groups; ++j) ++sizes[static_cast<std::size_t>(j)];
    return GroupPartition(std::move(sizes));
  }

  Index dim() const { return offsets_.empty() ? 0 : offsets_.back(); }
  Index num_groups() const { return static_cast<Index>(sizes_.size()); }
  Index size(Index j) const { return sizes_[static_cast<std::size_t>(j)]; }
  Index group_of(Index i) const { return group_of_[static_cast<std::size_t>(i)]; }
  const std::vector<Index>& sizes() const { return sizes_; }
  bool is_trivial() const { return num_groups() == dim(); }

  GroupRange range(Index j) const {
    return {offsets_[static_cast<std::size_t>(j)], sizes_[static_cast<std::size_t>(j)]};
  }

  bool operator==(const GroupPartition& o) const { return sizes_ == o.sizes_; }

 private:
  std::vector<Index> sizes_;
  std::vector<Index> offsets_;
  std::vector<Index> group_of_;
};

/// The L group index ranges, in order.
inline std::vector<GroupRange> group_slices(const GroupPartition& partition) {
  std::vector<GroupRange> out;
  out.reserve(static_cast<std::size_t>(partition.num_groups()));
  for (Index j = 0; j < partition.num_groups(); ++j) out.push_back(partition.range(j));
  return out;
}

/// Base regularizer  sum_j w_j ||beta_j||_p^q  with strength lambda.
struct RegSpec {
  double p = 1.0;
  double q = 1.0;
  std::vector<double> weights;  // empty means all ones
  double lambda = 1.0;
  GroupPartition partition;

  double weight(Index j) const { return weights.empty() ? 1.0 : weights[static_cast<std::size_t>(j)]; }

  void validate() const {
    if (!(q > 0.0 && q <= p && p <= 2.0)) throw std::invalid_argument("RegSpec: require 0 < q <= p <= 2");
    if (!weights.empty() && static_cast<Index>(weights.size()) != partition.num_groups())
      throw std::invalid_argument("RegSpec: one weight per group required");
    for (double w : weights)
      if (!(w > 0.0)) throw std::invalid_argument("RegSpec: weights must be positive");
    if (!(lambda >= 0.0)) throw std::invalid_argument("RegSpec: lambda must be non-negative");
  }
};

/// ||beta||_q^q = sum_i |beta_i|^q.
inline double lq_norm_pow(const Eigen::Ref<const Vector>& beta, double q) {
  if (!(q > 0.0)) throw std::invalid_argument("lq_norm_pow: q must be positive");
  double s = 0.0;
  for (Index i = 0; i < beta.size(); ++i) s += abs_pow(beta[i], q);
  return s;
}

/// sum_j w_j (sum_{i in G_j} |beta_i|^p)^{q/p}. Does not apply lambda.
inline double lpq_reg(const Eigen::Ref<const Vector>& beta, const RegSpec& spec) {
  if (beta.size() != spec.partition.dim()) throw std::invalid_argument("lpq_reg: dimension mismatch");
  double total = 0.0;
  for (Index j = 0; j < spec.partition.num_groups(); ++j) {
    const GroupRange r = spec.partition.range(j);
    double inner = 0.0;
    for (Index i = r.begin; i < r.end(); ++i) inner += abs_pow(beta[i], spec.p);
    total += spec.weight(j) * (spec.p == spec.q ? inner : abs_pow(inner, spec.q / spec.p));
  }
  return total;
}

/// Euclidean norm of every group.
inline Vector group_norms(const Eigen::Ref<const Vector>& beta, const GroupPartition& partition) {
  Vector out(partition.num_groups());
  for (Index j = 0; j < partition.num_groups(); ++j) {
    const GroupRange r = partition.range(j);
    out[j] = beta.segment(r.begin, r.size).norm();
  }
  return out;
}

}  // namespace smoothsparse
