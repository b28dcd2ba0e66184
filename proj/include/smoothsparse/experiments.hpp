#pragma once

// Synthetic data, evaluation metrics, the lambda-path runner and the
// desk-scale experiments, with CSV output.

#include "smoothsparse/oracle.hpp"

#include <atomic>
#include <chrono>
#include <functional>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace smoothsparse {

// ---------------------------------------------------------------------------
// Data

struct SimDesign {
  Index n = 500;
  Index d = 100;
  Index s = 10;
  double rho = 0.0;
  double sigma = 1.0;
  std::optional<double> signal_sigma;  // sigma used for the signal range; defaults to sigma
  std::uint64_t seed = 0;

  double signal_scale() const { return signal_sigma.value_or(sigma); }
  double unit() const {
    return signal_scale() * std::sqrt((2.0 / static_cast<double>(n)) * std::log(static_cast<double>(d)));
  }
  double min_signal() const { return 0.5 * unit(); }
  double max_signal() const { return 2.0 * std::log(static_cast<double>(d)) * unit(); }

  void validate() const {
    if (n < 1 || d < 1) throw std::invalid_argument("SimDesign: n and d must be positive");
    if (s < 0 || s > d) throw std::invalid_argument("SimDesign: need 0 <= s <= d");
    if (!(rho >= 0.0 && rho < 1.0)) throw std::invalid_argument("SimDesign: rho must lie in [0, 1)");
    if (!(sigma >= 0.0)) throw std::invalid_argument("SimDesign: sigma must be non-negative");
    if (s > 0 && !(signal_scale() > 0.0))
      throw std::invalid_argument("SimDesign: sigma = 0 requires a positive signal_sigma");
  }
};

struct SyntheticData {
  Dataset train, val, test;
  Vector beta_star;
};

/// Sigma_ij = rho^|i - j|.
inline Matrix toeplitz_covariance(Index d, double rho) {
  Matrix S(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) S(i, j) = std::pow(rho, static_cast<double>(std::abs(i - j)));
  return S;
}

namespace detail {

inline Dataset draw_split(const Matrix& chol_upper, const Vector& beta, double sigma, Index n, CounterRng rng) {
  const Index d = beta.size();
  Dataset out;
  Matrix Z(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j) Z(i, j) = rng.normal();
  out.X = Z * chol_upper;  // rows ~ N(0, U^T U)
  out.y = out.X * beta;
  for (Index i = 0; i < n; ++i) out.y[i] += sigma * rng.normal();
  return out;
}

}  // namespace detail

/// Sparse linear model with Toeplitz-correlated Gaussian features. Support is
/// uniform without replacement; magnitudes are equally spaced between
/// min_signal() and max_signal() with random signs.
inline SyntheticData gen_synthetic(const SimDesign& design) {
  design.validate();
  const Index d = design.d;
  SyntheticData out;
  out.beta_star = Vector::Zero(d);
  CounterRng rng(design.seed, 0);
  std::vector<Index> idx(static_cast<std::size_t>(d));
  std::iota(idx.begin(), idx.end(), Index{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  const double lo = design.min_signal(), hi = design.max_signal();
  for (Index t = 0; t < design.s; ++t) {
    const double mag = design.s == 1 ? lo : lo + (hi - lo) * static_cast<double>(t) / static_cast<double>(design.s - 1);
    out.beta_star[idx[static_cast<std::size_t>(t)]] = (rng.uniform() < 0.5 ? -1.0 : 1.0) * mag;
  }
  Matrix U = Matrix::Identity(d, d);
  if (design.rho != 0.0) {
    Eigen::LLT<Matrix> llt(toeplitz_covariance(d, design.rho));
    if (llt.info() != Eigen::Success) throw NumericalError("gen_synthetic: covariance is not positive definite");
    U = llt.matrixU();
  }
  out.train = detail::draw_split(U, out.beta_star, design.sigma, design.n, CounterRng(design.seed, 1));
  out.val = detail::draw_split(U, out.beta_star, design.sigma, design.n, CounterRng(design.seed, 2));
  out.test = detail::draw_split(U, out.beta_star, design.sigma, design.n, CounterRng(design.seed, 3));
  return out;
}

/// Dense instance: X, beta and noise all i.i.d. standard normal.
inline SyntheticData gen_gaussian_instance(Index n, Index d, std::uint64_t seed, double sigma = 1.0) {
  if (n < 1 || d < 1) throw std::invalid_argument("gen_gaussian_instance: n and d must be positive");
  SyntheticData out;
  CounterRng rng(seed, 0);
  out.beta_star = rng.normal_vector(d);
  const Matrix I = Matrix::Identity(d, d);
  out.train = detail::draw_split(I, out.beta_star, sigma, n, CounterRng(seed, 1));
  out.val = detail::draw_split(I, out.beta_star, sigma, n, CounterRng(seed, 2));
  out.test = detail::draw_split(I, out.beta_star, sigma, n, CounterRng(seed, 3));
  return out;
}

// ---------------------------------------------------------------------------
// Metrics

struct Metrics {
  std::optional<double> est_err;  // ||b - b*||^2 / ||b*||^2, missing when b* = 0
  double rmse = 0.0;
  double support_accuracy = 0.0;  // (TP + TN) / d
  Index true_positives = 0;
  Index false_positives = 0;
  Index true_negatives = 0;
  Index false_negatives = 0;
};

/// Metrics of an (already thresholded) estimate against the truth.
inline Metrics metrics(const Eigen::Ref<const Vector>& beta_hat, const Eigen::Ref<const Vector>& beta_star,
                       const Dataset& test) {
  if (beta_hat.size() != beta_star.size() || beta_hat.size() != test.features())
    throw std::invalid_argument("metrics: shape mismatch");
  Metrics m;
  const double ns = beta_star.squaredNorm();
  if (ns > 0.0) m.est_err = (beta_hat - beta_star).squaredNorm() / ns;
  m.rmse = std::sqrt((test.y - test.X * beta_hat).squaredNorm() / static_cast<double>(test.n()));
  for (Index i = 0; i < beta_hat.size(); ++i) {
    const bool est = beta_hat[i] != 0.0, truth = beta_star[i] != 0.0;
    if (est && truth) ++m.true_positives;
    else if (est) ++m.false_positives;
    else if (truth) ++m.false_negatives;
    else ++m.true_negatives;
  }
  m.support_accuracy = static_cast<double>(m.true_positives + m.true_negatives) / static_cast<double>(beta_hat.size());
  return m;
}

// ---------------------------------------------------------------------------
// Lambda paths

/// `num` log-spaced values from min_ratio * lambda_max to lambda_max, increasing.
inline std::vector<double> lambda_grid(double lambda_max, int num, double min_ratio) {
  if (!(lambda_max > 0.0) || num < 1 || !(min_ratio > 0.0 && min_ratio <= 1.0))
    throw std::invalid_argument("lambda_grid: invalid arguments");
  std::vector<double> grid(static_cast<std::size_t>(num));
  if (num == 1) {
    grid[0] = lambda_max;
    return grid;
  }
  const double lo = std::log(min_ratio * lambda_max), hi = std::log(lambda_max);
  for (int i = 0; i < num; ++i) grid[static_cast<std::size_t>(i)] = std::exp(lo + (hi - lo) * i / (num - 1));
  grid.back() = lambda_max;
  return grid;
}

struct PathConfig {
  std::vector<double> lambdas;  // strictly increasing
  OptimConfig optim;
  bool warm_start = true;
  InitScheme init = InitScheme::svf();
  double init_scale = 0.0;  // sd of the He-normal draw for beta0 when not warm (0: beta0 = 0)
  double threshold = 1e-6;
  bool group_threshold = false;  // zero whole groups instead of entries

  void validate() const {
    if (lambdas.empty()) throw std::invalid_argument("PathConfig: empty lambda grid");
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
      if (!(lambdas[i] >= 0.0)) throw std::invalid_argument("PathConfig: lambdas must be non-negative");
      if (i > 0 && !(lambdas[i] > lambdas[i - 1])) throw std::invalid_argument("PathConfig: lambda grid must increase");
    }
    if (!(threshold >= 0.0)) throw std::invalid_argument("PathConfig: threshold must be non-negative");
    optim.validate();
  }
};

struct PathRecord {
  double lambda = 0.0;
  Vector beta_raw;    // K(xi_hat)
  Vector beta;        // thresholded
  FactorSet xi;
  double P = 0.0;     // base objective at beta_raw
  double Q = 0.0;     // surrogate objective at xi_hat
  Index nnz = 0;      // post-threshold non-zeros (groups when group_threshold)
  double train_loss = 0.0;
  double val_loss = std::numeric_limits<double>::quiet_NaN();
  double test_loss = std::numeric_limits<double>::quiet_NaN();
  int epochs = 0;
  double balance = 0.0;
  double wall_seconds = 0.0;
  bool failed = false;
  std::string message;
};

struct PathResult {
  std::vector<PathRecord> records;  // aligned with the increasing lambda grid
};

inline Index count_nonzero_groups(const Eigen::Ref<const Vector>& beta, const GroupPartition& p) {
  Index c = 0;
  for (Index j = 0; j < p.num_groups(); ++j) {
    const GroupRange r = p.range(j);
    if (beta.segment(r.begin, r.size).squaredNorm() > 0.0) ++c;
  }
  return c;
}

/// One optimized run per lambda of a linear model with parametrization `spec`.
/// With warm_start the grid is traversed from the largest lambda down, and each
/// run starts from the previous solution mapped back through the solution map
/// (thresholded, zeros jittered) so that coordinates entering the model are
/// not stuck at the origin.
inline PathResult run_path(const Dataset& train, const Dataset* val, const Dataset* test, const ParamSpec& spec,
                           const PathConfig& cfg) {
  cfg.validate();
  train.validate();
  if (train.features() != spec.dim()) throw std::invalid_argument("run_path: spec does not match the data");
  const LinearModel model;
  PathResult out;
  out.records.resize(cfg.lambdas.size());
  Vector prev_beta;
  auto cut = [&](const Vector& b) {
    return cfg.group_threshold ? threshold_groups(b, cfg.threshold, spec.partition) : threshold(b, cfg.threshold);
  };
  for (std::size_t step = 0; step < cfg.lambdas.size(); ++step) {
    const std::size_t i = cfg.warm_start ? cfg.lambdas.size() - 1 - step : step;
    PathRecord& rec = out.records[i];
    rec.lambda = cfg.lambdas[i];
    const auto t0 = std::chrono::steady_clock::now();
    try {
      ModelParams p0;
      CounterRng rng(cfg.optim.seed, 1000 + i);
      if (cfg.warm_start && prev_beta.size()) {
        p0.xi = init_surrogate(spec, cut(prev_beta), InitScheme::svf(cfg.init.jitter));
      } else {
        const Vector beta0 = cfg.init_scale > 0.0 ? rng.normal_vector(spec.dim(), cfg.init_scale) : Vector::Zero(spec.dim());
        p0.xi = init_surrogate(spec, beta0, cfg.init, &rng);
      }
      LinearSurrogate obj{&train, val, spec, rec.lambda, model};
      RunResult res = run(obj, std::move(p0), cfg.optim);
      rec.xi = res.params.xi;
      rec.beta_raw = forward(spec, rec.xi);
      rec.beta = cut(rec.beta_raw);
      rec.P = base_objective(model, train, rec.beta_raw, Vector(), spec, rec.lambda);
      rec.Q = surrogate_objective(model, train, rec.xi, Vector(), spec, rec.lambda).value;
      rec.nnz = cfg.group_threshold ? count_nonzero_groups(rec.beta, spec.partition) : (rec.beta.array() != 0.0).count();
      rec.train_loss = model.loss(train, rec.beta, Vector());
      if (val) rec.val_loss = model.loss(*val, rec.beta, Vector());
      if (test) rec.test_loss = model.loss(*test, rec.beta, Vector());
      rec.epochs = static_cast<int>(res.trace.size());
      rec.balance = balance_residual(spec, rec.xi);
      prev_beta = rec.beta_raw;
    } catch (const std::exception& e) {
      rec.failed = true;
      rec.message = e.what();
      prev_beta.resize(0);
    }
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parallel cells and CSV

/// Runs fn(0..count-1) on up to `threads` workers. Results must be written to
/// per-index slots by fn, which keeps output order independent of scheduling.
inline void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

/// Formats a double with 17 significant digits ("nan" for NaN).
inline std::string fmt_num(double x) {
  if (std::isnan(x)) return "nan";
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

class CsvWriter {
 public:
  CsvWriter(std::ostream& os, const std::vector<std::string>& header) : os_(os), columns_(header.size()) { row(header); }

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_) throw std::invalid_argument("CsvWriter: wrong number of cells");
    for (std::size_t i = 0; i < cells.size(); ++i) os_ << (i ? "," : "") << cells[i];
    os_ << '\n';
  }

 private:
  std::ostream& os_;
  std::size_t columns_;
};

inline const std::vector<std::string>& path_csv_header() {
  static const std::vector<std::string> h{"lambda", "nnz", "l1_norm", "P", "Q", "train_loss",
                                          "val_loss", "test_loss", "epochs", "balance", "failed"};
  return h;
}

inline void write_path_csv(std::ostream& os, const PathResult& res) {
  CsvWriter w(os, path_csv_header());
  for (const auto& r : res.records) {
    const double l1 = r.beta.size() ? r.beta.lpNorm<1>() : std::numeric_limits<double>::quiet_NaN();
    w.row({fmt_num(r.lambda), std::to_string(r.nnz), fmt_num(l1), fmt_num(r.P), fmt_num(r.Q), fmt_num(r.train_loss),
           fmt_num(r.val_loss), fmt_num(r.test_loss), std::to_string(r.epochs), fmt_num(r.balance),
           r.failed ? "1" : "0"});
  }
}

// ---------------------------------------------------------------------------
// Experiment: direct subgradient GD versus smooth transfer versus oracle

struct GdFailureConfig {
  Index n = 1000;
  Index d = 100;
  Index groups = 20;
  std::uint64_t seed = 0;
  int num_lambdas = 30;
  double min_ratio = 0.01;
  OptimConfig l1_optim;   // lasso: HPP and subgradient GD
  OptimConfig l21_optim;  // group lasso: GHPP and subgradient GD
  double jitter = 1e-4;

  GdFailureConfig() {
    l1_optim.learning_rate = 0.18;
    l1_optim.momentum = 0.9;
    l1_optim.schedule = Schedule::Cosine;
    l1_optim.epochs = 3000;
    l21_optim.learning_rate = 0.1;
    l21_optim.momentum = 0.9;
    l21_optim.schedule = Schedule::Cosine;
    l21_optim.epochs = 2000;
  }
};

struct GdFailureRow {
  double lambda;
  std::string method;
  Index nnz;  // entries (lasso methods) or groups (group methods) above 1e-6
  double l1_norm;
  double objective;
};

inline const std::vector<std::string>& gd_failure_header() {
  static const std::vector<std::string> h{"lambda", "method", "nnz", "l1_norm", "objective"};
  return h;
}

/// Rows ordered by lambda (increasing), then method.
inline std::vector<GdFailureRow> experiment_gd_failure(const GdFailureConfig& cfg, int threads = 1) {
  const SyntheticData data = gen_gaussian_instance(cfg.n, cfg.d, cfg.seed);
  const Matrix& X = data.train.X;
  const Vector& y = data.train.y;
  const GroupPartition groups = GroupPartition::equal(cfg.d, cfg.groups);
  const double tau = 1e-6;

  const auto l1_grid = lambda_grid(lasso_lambda_max(X, y), cfg.num_lambdas, cfg.min_ratio);
  const auto l21_grid = lambda_grid(group_lasso_lambda_max(X, y, groups), cfg.num_lambdas, cfg.min_ratio);

  // He-normal start for direct subgradient GD, one stream per run
  auto subgd_start = [&](std::size_t run) {
    CounterRng rng(cfg.seed, 5000 + run);
    return rng.normal_vector(cfg.d, std::sqrt(2.0 / static_cast<double>(cfg.d)));
  };
  PathResult hpp, ghpp;
  std::vector<OracleResult> cd(l1_grid.size()), prox(l21_grid.size()), sub1(l1_grid.size()), sub21(l21_grid.size());
  parallel_for(4, threads, [&](std::size_t task) {
    if (task == 0) {
      PathConfig pc;
      pc.lambdas = l1_grid;
      pc.optim = cfg.l1_optim;
      pc.init = InitScheme::svf(cfg.jitter);
      hpp = run_path(data.train, nullptr, nullptr, ParamSpec::make(ParamKind::HPP, cfg.d), pc);
    } else if (task == 1) {
      PathConfig pc;
      pc.lambdas = l21_grid;
      pc.optim = cfg.l21_optim;
      pc.init = InitScheme::svf(cfg.jitter);
      pc.group_threshold = true;
      ghpp = run_path(data.train, nullptr, nullptr, ParamSpec::make(ParamKind::GHPP, groups), pc);
    } else if (task == 2) {
      for (std::size_t i = 0; i < l1_grid.size(); ++i) {
        cd[i] = cd_lasso(X, y, l1_grid[i]);
        const Vector b0 = subgd_start(i);
        sub1[i] = subgradient_gd(X, y, l1_grid[i], cfg.l1_optim, nullptr, &b0);
      }
    } else {
      for (std::size_t i = 0; i < l21_grid.size(); ++i) {
        prox[i] = prox_group_lasso(X, y, l21_grid[i], groups);
        const Vector b0 = subgd_start(l1_grid.size() + i);
        sub21[i] = subgradient_gd(X, y, l21_grid[i], cfg.l21_optim, &groups, &b0);
      }
    }
  });

  std::vector<GdFailureRow> rows;
  auto entries = [&](const Vector& b) { return static_cast<Index>((b.array().abs() > tau).count()); };
  auto grps = [&](const Vector& b) { return count_nonzero_groups(threshold_groups(b, tau, groups), groups); };
  for (std::size_t i = 0; i < l1_grid.size(); ++i) {
    const double lam = l1_grid[i];
    const Vector& bh = hpp.records[i].beta_raw;
    rows.push_back({lam, "cd_lasso", entries(cd[i].beta), cd[i].beta.lpNorm<1>(), cd[i].objective});
    rows.push_back({lam, "hpp", entries(bh), bh.lpNorm<1>(), lasso_objective(X, y, bh, lam)});
    rows.push_back({lam, "subgd_l1", entries(sub1[i].beta), sub1[i].beta.lpNorm<1>(), sub1[i].objective});
  }
  for (std::size_t i = 0; i < l21_grid.size(); ++i) {
    const double lam = l21_grid[i];
    const Vector& bg = ghpp.records[i].beta_raw;
    rows.push_back({lam, "prox_group_lasso", grps(prox[i].beta), prox[i].beta.lpNorm<1>(), prox[i].objective});
    rows.push_back({lam, "ghpp", grps(bg), bg.lpNorm<1>(), group_lasso_objective(X, y, bg, lam, groups)});
    rows.push_back({lam, "subgd_l21", grps(sub21[i].beta), sub21[i].beta.lpNorm<1>(), sub21[i].objective});
  }
  return rows;
}

inline void write_gd_failure_csv(std::ostream& os, const std::vector<GdFailureRow>& rows) {
  CsvWriter w(os, gd_failure_header());
  for (const auto& r : rows)
    w.row({fmt_num(r.lambda), r.method, std::to_string(r.nnz), fmt_num(r.l1_norm), fmt_num(r.objective)});
}

// ---------------------------------------------------------------------------
// Experiment: high-dimensional sparse regression across depths

struct HighdimConfig {
  SimDesign base;  // n, d, s, sigma; rho and seed are set per cell
  std::vector<double> rhos{0.0, 0.5};
  std::vector<int> depths{2, 3, 4, 6};
  int repetitions = 10;
  std::uint64_t seed = 0;
  int num_lambdas = 20;
  double min_ratio = 1e-3;
  OptimConfig optim;
  double init_scale = 0.0;  // He-normal sd for the first factor; 0 selects sqrt(2 / d)

  HighdimConfig() {
    base.n = 200;
    base.d = 400;
    base.s = 10;
    base.sigma = 1.0;
    optim.learning_rate = 0.005;
    optim.momentum = 0.0;
    optim.schedule = Schedule::InverseTime;
    optim.decay_rate = 1e-6;
    optim.epochs = 2000;
    optim.batch_size = 32;
    optim.patience = 200;
  }
};

struct HighdimRow {
  double rho = 0.0;
  int rep = 0;
  int k = 0;
  double lambda = 0.0;
  double tau = 0.0;
  Metrics m;
  double lasso_est_err = 0.0;  // cd_lasso on the same instance, selected the same way
  double lasso_lambda = 0.0;
};

inline const std::vector<std::string>& highdim_header() {
  static const std::vector<std::string> h{"rho",  "rep",  "k",    "lambda",           "tau",
                                          "est_err", "rmse", "support_accuracy", "false_positives",
                                          "lasso_est_err", "lasso_lambda"};
  return h;
}

namespace detail {

struct Selection {
  double lambda = 0.0;
  double tau = 0.0;
  double val_loss = std::numeric_limits<double>::infinity();
  Vector beta;
};

/// Among (lambda, tau) pairs, the one with the lowest validation loss.
inline void consider(Selection& best, double lambda, const Vector& beta_raw, const Dataset& val) {
  const ThresholdChoice t = select_threshold(beta_raw, threshold_grid(beta_raw), val);
  if (t.val_loss < best.val_loss) best = {lambda, t.tau, t.val_loss, threshold(beta_raw, t.tau)};
}

}  // namespace detail

/// For each (rho, repetition) instance: fits the HPP_k path for every depth and
/// the cd_lasso path; lambda and threshold are chosen on the validation split
/// and metrics are computed on the test split. One row per (rho, rep, k).
inline std::vector<HighdimRow> experiment_highdim(const HighdimConfig& cfg, int threads = 1) {
  const std::size_t cells = cfg.rhos.size() * static_cast<std::size_t>(cfg.repetitions);
  std::vector<std::vector<HighdimRow>> per_cell(cells);
  parallel_for(cells, threads, [&](std::size_t c) {
    const double rho = cfg.rhos[c / static_cast<std::size_t>(cfg.repetitions)];
    const int rep = static_cast<int>(c % static_cast<std::size_t>(cfg.repetitions));
    SimDesign design = cfg.base;
    design.rho = rho;
    design.seed = cfg.seed * 1000003ULL + c;
    const SyntheticData data = gen_synthetic(design);
    const Matrix& X = data.train.X;
    const Vector& y = data.train.y;
    const double lmax = std::max(lasso_lambda_max(X, y), 1e-12);
    const auto grid = lambda_grid(lmax, cfg.num_lambdas, cfg.min_ratio);

    detail::Selection lasso;
    Vector warm = Vector::Zero(design.d);
    for (auto it = grid.rbegin(); it != grid.rend(); ++it) {
      const OracleResult r = cd_lasso(X, y, *it, 1e-10, 100000, &warm);
      warm = r.beta;
      detail::consider(lasso, *it, r.beta, data.val);
    }
    const Metrics lasso_m = metrics(lasso.beta, data.beta_star, data.test);

    for (int k : cfg.depths) {
      PathConfig pc;
      pc.lambdas = grid;
      pc.optim = cfg.optim;
      pc.optim.seed = design.seed * 31ULL + static_cast<std::uint64_t>(k);
      pc.warm_start = false;
      pc.init = InitScheme::ones_tail();
      pc.init_scale = cfg.init_scale > 0.0 ? cfg.init_scale : std::sqrt(2.0 / static_cast<double>(design.d));
      pc.threshold = 0.0;
      const ParamSpec spec = ParamSpec::make(k == 2 ? ParamKind::HPP : ParamKind::HPPk, design.d, k);
      const PathResult path = run_path(data.train, &data.val, nullptr, spec, pc);
      detail::Selection best;
      for (const auto& r : path.records)
        if (!r.failed) detail::consider(best, r.lambda, r.beta_raw, data.val);
      HighdimRow row;
      row.rho = rho;
      row.rep = rep;
      row.k = k;
      row.lambda = best.lambda;
      row.tau = best.tau;
      row.m = best.beta.size() ? metrics(best.beta, data.beta_star, data.test) : Metrics{};
      row.lasso_est_err = lasso_m.est_err.value_or(std::numeric_limits<double>::quiet_NaN());
      row.lasso_lambda = lasso.lambda;
      per_cell[c].push_back(row);
    }
  });
  std::vector<HighdimRow> rows;
  for (auto& cell : per_cell) rows.insert(rows.end(), cell.begin(), cell.end());
  return rows;
}

inline void write_highdim_csv(std::ostream& os, const std::vector<HighdimRow>& rows) {
  CsvWriter w(os, highdim_header());
  for (const auto& r : rows)
    w.row({fmt_num(r.rho), std::to_string(r.rep), std::to_string(r.k), fmt_num(r.lambda), fmt_num(r.tau),
           fmt_num(r.m.est_err.value_or(std::numeric_limits<double>::quiet_NaN())), fmt_num(r.m.rmse),
           fmt_num(r.m.support_accuracy), std::to_string(r.m.false_positives), fmt_num(r.lasso_est_err),
           fmt_num(r.lasso_lambda)});
}

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

// ---------------------------------------------------------------------------
// Experiment: sparsity of an overparametrized MLP layer

struct MlpDemoConfig {
  Index n = 500;
  Index inputs = 10;
  Index informative = 3;
  double separation = 1.0;
  Index width = 16;
  int k = 2;
  std::vector<double> lambdas{0.0, 0.001, 0.003, 0.01, 0.03};
  std::uint64_t seed = 0;
  OptimConfig optim;
  double zero_tol = 1.1920928955078125e-07;  // float32 machine epsilon

  MlpDemoConfig() {
    optim.learning_rate = 0.1;
    optim.momentum = 0.9;
    optim.schedule = Schedule::Cosine;
    optim.epochs = 1000;
  }
};

struct MlpDemoRow {
  double lambda = 0.0;
  double test_accuracy = 0.0;
  double majority_accuracy = 0.0;
  double sparsity = 0.0;  // fraction of designated-layer weights with |w| <= zero_tol
};

/// Two Gaussian classes in R^inputs whose means differ on the first
/// `informative` coordinates only.
inline SyntheticData gen_two_gaussians(Index n, Index inputs, Index informative, double separation,
                                       std::uint64_t seed) {
  SyntheticData out;
  auto split = [&](std::uint64_t stream) {
    CounterRng rng(seed, stream);
    Dataset ds;
    ds.X.resize(n, inputs);
    ds.y.resize(n);
    for (Index i = 0; i < n; ++i) {
      const double c = rng.uniform() < 0.5 ? 0.0 : 1.0;
      ds.y[i] = c;
      for (Index j = 0; j < inputs; ++j)
        ds.X(i, j) = rng.normal() + (j < informative ? (2.0 * c - 1.0) * separation : 0.0);
    }
    return ds;
  };
  out.train = split(1);
  out.val = split(2);
  out.test = split(3);
  out.beta_star = Vector::Zero(inputs);
  return out;
}

inline const std::vector<std::string>& mlp_demo_header() {
  static const std::vector<std::string> h{"lambda", "test_accuracy", "majority_accuracy", "sparsity"};
  return h;
}

/// Trains the MLP with its hidden layer replaced by an HPP_k per lambda.
inline std::vector<MlpDemoRow> experiment_mlp_sparsity(const MlpDemoConfig& cfg, int threads = 1) {
  const SyntheticData data = gen_two_gaussians(cfg.n, cfg.inputs, cfg.informative, cfg.separation, cfg.seed);
  MlpSpec net{cfg.inputs, cfg.width, 2, MlpLayer::Hidden};
  const ParamSpec spec = ParamSpec::make(cfg.k == 2 ? ParamKind::HPP : ParamKind::HPPk, net.beta_dim(), cfg.k);
  std::vector<MlpDemoRow> rows(cfg.lambdas.size());
  const double ones = data.test.y.sum();
  const double majority = std::max(ones, static_cast<double>(data.test.n()) - ones) / static_cast<double>(data.test.n());
  parallel_for(cfg.lambdas.size(), threads, [&](std::size_t i) {
    CounterRng rng(cfg.seed, 100 + i);
    const Vector beta0 = rng.normal_vector(net.beta_dim(), std::sqrt(2.0 / static_cast<double>(net.inputs)));
    ModelParams p0;
    p0.xi = init_surrogate(spec, beta0, InitScheme::svf(0.0));
    p0.psi = Vector::Zero(net.psi_dim());
    p0.psi.head(net.w2_size()) = rng.normal_vector(net.w2_size(), std::sqrt(2.0 / static_cast<double>(net.hidden)));
    MlpSurrogate obj{&data.train, &data.val, net, spec, cfg.lambdas[i]};
    OptimConfig oc = cfg.optim;
    oc.seed = cfg.seed * 7919ULL + i;
    const RunResult res = run(obj, std::move(p0), oc);
    const MlpWeights w = reconstruct(res.params, spec, net);
    const Vector pred = mlp_predict_class(w, data.test.X);
    MlpDemoRow row;
    row.lambda = cfg.lambdas[i];
    row.test_accuracy = (pred.array() == data.test.y.array()).cast<double>().mean();
    row.majority_accuracy = majority;
    row.sparsity = (w.W1.array().abs() <= cfg.zero_tol).cast<double>().mean();
    rows[i] = row;
  });
  return rows;
}

inline void write_mlp_demo_csv(std::ostream& os, const std::vector<MlpDemoRow>& rows) {
  CsvWriter w(os, mlp_demo_header());
  for (const auto& r : rows)
    w.row({fmt_num(r.lambda), fmt_num(r.test_accuracy), fmt_num(r.majority_accuracy), fmt_num(r.sparsity)});
}

// ---------------------------------------------------------------------------
// Certificate and gradient sweeps over parametrization kinds

/// Depth parameters used when a sweep covers every kind: k = 3 for integer
/// depths, non-integer powers for the power kinds, (4, 2) and (3, 1.5) for the
/// split-depth kinds.
inline ParamSpec sweep_spec(ParamKind kind, const GroupPartition& partition) {
  switch (kind) {
    case ParamKind::GHPPk1k: return ParamSpec::make(kind, partition, 4.0, 2.0);
    case ParamKind::HPowP:
    case ParamKind::GHPowP: return ParamSpec::make(kind, partition, 2.5);
    case ParamKind::GHPowPk1k: return ParamSpec::make(kind, partition, 3.0, 1.5);
    default: return ParamSpec::make(kind, partition, 3.0);
  }
}

/// Partition of {0..d-1} used by grouped kinds in the sweeps: a singleton
/// followed by one block of the remaining d - 1 coordinates.
inline GroupPartition sweep_partition(Index d) {
  if (d < 1) throw std::invalid_argument("sweep_partition: d must be positive");
  return d == 1 ? GroupPartition::trivial(1) : GroupPartition(std::vector<Index>{1, d - 1});
}

struct SvfCheckRow {
  ParamKind kind = ParamKind::HPP;
  double k = 2.0;
  double k1 = 1.0;
  int trials = 0;
  double max_rel_err = 0.0;
  int failures = 0;  // trials above the tolerance
  double seconds = 0.0;
};

/// Random coefficient vector with entries U[-3, 3] and planted zeros (single
/// entries and, for grouped specs, whole groups).
inline Vector svf_trial_beta(const ParamSpec& spec, CounterRng& rng) {
  const Index d = spec.dim();
  Vector b(d);
  for (Index i = 0; i < d; ++i) b[i] = -3.0 + 6.0 * rng.uniform();
  if (rng.uniform() < 0.5) b[static_cast<Index>(rng() % static_cast<std::uint64_t>(d))] = 0.0;
  if (!spec.partition.is_trivial() && rng.uniform() < 0.3) {
    const auto g = spec.partition.range(static_cast<Index>(rng() % static_cast<std::uint64_t>(spec.num_groups())));
    b.segment(g.begin, g.size).setZero();
  }
  if (rng.uniform() < 0.05) b.setZero();
  return b;
}

/// Compares svf_numeric_min against the closed-form induced regularizer on
/// random coefficient vectors; error relative to max(1, closed form).
inline SvfCheckRow svf_check(const ParamSpec& spec, int trials, std::uint64_t seed, double tol = 1e-6) {
  if (trials < 1) throw std::invalid_argument("svf_check: trials must be positive");
  const auto t0 = std::chrono::steady_clock::now();
  SvfCheckRow row;
  row.kind = spec.kind;
  row.k = spec.k;
  row.k1 = spec.k1;
  row.trials = trials;
  CounterRng rng(seed, 0x5f0 + static_cast<std::uint64_t>(spec.kind));
  for (int t = 0; t < trials; ++t) {
    const Vector b = svf_trial_beta(spec, rng);
    const double closed = induced_reg(spec, b).value;
    SvfOptions opt;
    opt.seed = seed * 1000003ULL + static_cast<std::uint64_t>(t);
    const SvfResult r = svf_numeric_min(spec, b, opt);
    const double err = std::abs(r.value - closed) / std::max(1.0, closed);
    row.max_rel_err = std::max(row.max_rel_err, std::isfinite(err) ? err : std::numeric_limits<double>::infinity());
    if (!(err <= tol)) ++row.failures;
  }
  row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return row;
}

/// Random point with every entry at least `floor` away from zero.
inline Vector nondegenerate_point(Index n, CounterRng& rng, double floor = 0.1) {
  Vector x = rng.normal_vector(n);
  for (Index i = 0; i < n; ++i) x[i] = (x[i] < 0.0 ? -1.0 : 1.0) * (floor + std::abs(x[i]));
  return x;
}

/// Worst finite-difference error of the linear-model surrogate gradient over
/// `points` random non-degenerate parameter vectors.
inline double gradcheck_surrogate(const ParamSpec& spec, int points, std::uint64_t seed, double lambda = 0.7) {
  CounterRng rng(seed, 0x9c0 + static_cast<std::uint64_t>(spec.kind));
  Dataset data;
  data.X = rng.normal_vector(30 * spec.dim()).reshaped(30, spec.dim());
  data.y = rng.normal_vector(30);
  const LinearModel model;
  FactorSet xi = make_factors(spec);
  const ScalarField f = [&](const Vector& x, Vector* g) {
    FactorSet z = xi;
    z.assign_flat(x);
    const SurrogateEval e = surrogate_objective(model, data, z, Vector(), spec, lambda);
    if (g) *g = e.grad_xi.flatten();
    return e.value;
  };
  double worst = 0.0;
  for (int t = 0; t < points; ++t) worst = std::max(worst, fd_gradient_check(f, nondegenerate_point(xi.total_dim(), rng)));
  return worst;
}

/// Same for the overparametrized MLP objective, over (xi, psi).
inline double gradcheck_mlp(const MlpSpec& net, int k, int points, std::uint64_t seed, double lambda = 0.05) {
  const ParamSpec spec = ParamSpec::make(k == 2 ? ParamKind::HPP : ParamKind::HPPk, net.beta_dim(), k);
  const SyntheticData data = gen_two_gaussians(40, net.inputs, std::min<Index>(2, net.inputs), 1.0, seed);
  Dataset train = data.train;
  for (Index i = 0; i < train.n(); ++i) train.y[i] = static_cast<double>(i % net.classes);
  FactorSet xi = make_factors(spec);
  const Index nx = xi.total_dim();
  const ScalarField f = [&](const Vector& x, Vector* g) {
    ModelParams p;
    p.xi = xi;
    p.xi.assign_flat(x.head(nx));
    p.psi = x.tail(net.psi_dim());
    const SurrogateEval e = mlp_forward_backward(net, spec, p, train, lambda);
    if (g) {
      g->resize(x.size());
      g->head(nx) = e.grad_xi.flatten();
      g->tail(net.psi_dim()) = e.grad_psi;
    }
    return e.value;
  };
  CounterRng rng(seed, 0xa11);
  double worst = 0.0;
  for (int t = 0; t < points; ++t)
    worst = std::max(worst, fd_gradient_check(f, 0.7 * nondegenerate_point(nx + net.psi_dim(), rng)));
  return worst;
}

}  // namespace smoothsparse
