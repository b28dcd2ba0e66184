// Sectioned key=value run configuration for the path command.
#pragma once

#include "smoothsparse/experiments.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace smoothsparse {

enum class DataSource { Synthetic, Gaussian };

struct RunConfig {
  DataSource source = DataSource::Synthetic;
  SimDesign design;

  ParamKind kind = ParamKind::HPP;
  double k = 2.0;
  double k1 = 1.0;
  std::vector<Index> group_sizes;  // empty: one group per coordinate
  Index num_groups = 0;            // > 0: equal partition into this many groups

  PathConfig path;
  int num_lambdas = 50;
  double lambda_min_ratio = 1e-3;
  bool explicit_lambdas = false;

  GroupPartition partition() const {
    if (!group_sizes.empty()) return GroupPartition(group_sizes);
    if (num_groups > 0) return GroupPartition::equal(design.d, num_groups);
    return GroupPartition::trivial(design.d);
  }

  ParamSpec param_spec() const { return ParamSpec::make(kind, partition(), k, k1); }

  SyntheticData make_data() const {
    design.validate();
    if (source == DataSource::Gaussian) return gen_gaussian_instance(design.n, design.d, design.seed, design.sigma);
    return gen_synthetic(design);
  }

  /// The lambda grid: explicit values, or log-spaced from the data's null threshold.
  std::vector<double> lambdas(const ParamSpec& spec, const Dataset& train) const {
    if (explicit_lambdas) return path.lambdas;
    const double lmax = spec.partition.is_trivial()
                            ? lasso_lambda_max(train.X, train.y)
                            : group_lasso_lambda_max(train.X, train.y, spec.partition);
    return lambda_grid(std::max(lmax, 1e-12), num_lambdas, lambda_min_ratio);
  }
};

namespace detail {

using boost::property_tree::ptree;

template <class T>
T parse_value(const std::string& section, const std::string& key, const std::string& text) {
  std::istringstream is(text);
  T value{};
  is >> value;
  if (is.fail() || !(is >> std::ws).eof())
    throw std::invalid_argument("config: [" + section + "] " + key + ": cannot parse '" + text + "'");
  return value;
}

inline bool parse_bool(const std::string& section, const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw std::invalid_argument("config: [" + section + "] " + key + ": expected a boolean, got '" + text + "'");
}

inline std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(text);
  while (std::getline(is, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

inline Schedule parse_schedule(const std::string& text) {
  if (text == "constant") return Schedule::Constant;
  if (text == "cosine") return Schedule::Cosine;
  if (text == "inverse_time") return Schedule::InverseTime;
  throw std::invalid_argument("config: [optim] schedule: unknown value '" + text + "'");
}

}  // namespace detail

/// Parses a configuration from text. Unknown sections or keys are errors.
inline RunConfig parse_run_config(std::istream& in) {
  using detail::parse_value;
  detail::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  RunConfig cfg;
  std::string init_kind = "svf";
  double jitter = cfg.path.init.jitter;
  double sigma = cfg.path.init.sigma;

  for (const auto& [section, body] : tree) {
    if (body.data().size() && body.empty())
      throw std::invalid_argument("config: key '" + section + "' outside any section");
    std::set<std::string> seen;
    for (const auto& [key, node] : body) {
      if (!seen.insert(key).second) throw std::invalid_argument("config: [" + section + "] duplicate key " + key);
      const std::string v = node.data();
      auto num = [&]<class T>(T& out) { out = parse_value<T>(section, key, v); };
      auto unknown = [&] { throw std::invalid_argument("config: [" + section + "] unknown key " + key); };
      if (section == "data") {
        if (key == "source") {
          if (v == "synthetic") cfg.source = DataSource::Synthetic;
          else if (v == "gaussian") cfg.source = DataSource::Gaussian;
          else throw std::invalid_argument("config: [data] source: unknown value '" + v + "'");
        } else if (key == "n") num(cfg.design.n);
        else if (key == "d") num(cfg.design.d);
        else if (key == "s") num(cfg.design.s);
        else if (key == "rho") num(cfg.design.rho);
        else if (key == "sigma") num(cfg.design.sigma);
        else if (key == "signal_sigma") cfg.design.signal_sigma = parse_value<double>(section, key, v);
        else if (key == "seed") num(cfg.design.seed);
        else unknown();
      } else if (section == "param") {
        if (key == "kind") {
          const auto kind = parse_param_kind(v);
          if (!kind) throw std::invalid_argument("config: [param] kind: unknown value '" + v + "'");
          cfg.kind = *kind;
        } else if (key == "k") num(cfg.k);
        else if (key == "k1") num(cfg.k1);
        else if (key == "groups") num(cfg.num_groups);
        else if (key == "group_sizes") {
          for (const auto& s : detail::split_list(v)) cfg.group_sizes.push_back(parse_value<Index>(section, key, s));
        } else unknown();
      } else if (section == "optim") {
        OptimConfig& o = cfg.path.optim;
        if (key == "learning_rate") num(o.learning_rate);
        else if (key == "momentum") num(o.momentum);
        else if (key == "schedule") o.schedule = detail::parse_schedule(v);
        else if (key == "decay_rate") num(o.decay_rate);
        else if (key == "epochs") num(o.epochs);
        else if (key == "batch_size") o.batch_size = v == "full" ? 0 : parse_value<Index>(section, key, v);
        else if (key == "patience") o.patience = parse_value<int>(section, key, v);
        else if (key == "seed") num(o.seed);
        else if (key == "init") init_kind = v;
        else if (key == "jitter") num(jitter);
        else if (key == "sigma") num(sigma);
        else if (key == "init_scale") num(cfg.path.init_scale);
        else if (key == "warmup_scale") num(o.warmup_scale);
        else if (key == "warmup_epochs") num(o.warmup_epochs);
        else if (key == "grad_tol") num(o.grad_tol);
        else if (key == "psi_lr_scale") num(o.psi_lr_scale);
        else if (key == "factor_lr_scale") {
          for (const auto& item : detail::split_list(v)) {
            const auto colon = item.find(':');
            if (colon == std::string::npos)
              throw std::invalid_argument("config: [optim] factor_lr_scale: expected name:value, got '" + item + "'");
            o.factor_lr_scale[item.substr(0, colon)] = parse_value<double>(section, key, item.substr(colon + 1));
          }
        } else unknown();
      } else if (section == "path") {
        if (key == "lambdas") {
          for (const auto& s : detail::split_list(v)) cfg.path.lambdas.push_back(parse_value<double>(section, key, s));
          cfg.explicit_lambdas = true;
        } else if (key == "num_lambdas") num(cfg.num_lambdas);
        else if (key == "lambda_min_ratio") num(cfg.lambda_min_ratio);
        else if (key == "warm_start") cfg.path.warm_start = detail::parse_bool(section, key, v);
        else if (key == "threshold") num(cfg.path.threshold);
        else if (key == "group_threshold") cfg.path.group_threshold = detail::parse_bool(section, key, v);
        else unknown();
      } else {
        throw std::invalid_argument("config: unknown section [" + section + "]");
      }
    }
  }

  if (init_kind == "svf") cfg.path.init = InitScheme::svf(jitter);
  else if (init_kind == "random_scaled") cfg.path.init = InitScheme::random_scaled(sigma);
  else if (init_kind == "ones_tail") cfg.path.init = InitScheme::ones_tail();
  else throw std::invalid_argument("config: [optim] init: unknown value '" + init_kind + "'");

  if (cfg.num_lambdas < 1) throw std::invalid_argument("config: [path] num_lambdas must be positive");
  if (!(cfg.lambda_min_ratio > 0.0 && cfg.lambda_min_ratio <= 1.0))
    throw std::invalid_argument("config: [path] lambda_min_ratio must lie in (0, 1]");
  if (!cfg.group_sizes.empty() && cfg.num_groups > 0)
    throw std::invalid_argument("config: [param] groups and group_sizes are exclusive");
  cfg.design.validate();
  cfg.param_spec().validate();
  cfg.path.optim.validate();
  if (cfg.explicit_lambdas) cfg.path.validate();
  return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::invalid_argument("cannot open config file: " + file.string());
  return parse_run_config(in);
}

}  // namespace smoothsparse
