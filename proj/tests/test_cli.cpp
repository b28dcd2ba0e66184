#include "smoothsparse/cli.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace smoothsparse;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun cli(std::vector<std::string> args) {
  args.insert(args.begin(), "smoothsparse");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("smoothsparse_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig parse(const std::string& text) {
  std::istringstream is(text);
  return parse_run_config(is);
}

}  // namespace

TEST(Cli, SvfCheckTable) {
  const CliRun r = cli({"svf-check", "--kinds", "hpp,hppk", "--k", "3", "--dims", "3", "--trials", "50"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("max_rel_err"), std::string::npos);
  EXPECT_NE(r.out.find("hpp "), std::string::npos);
  EXPECT_NE(r.out.find("hppk "), std::string::npos);
}

TEST(Cli, SvfCheckUnknownKind) { EXPECT_EQ(cli({"svf-check", "--kinds", "bogus"}).code, 1); }

TEST(Cli, PathWritesCsv) {
  const fs::path out = temp_dir("path");
  const std::string cfg = std::string(SMOOTHSPARSE_SOURCE_DIR) + "/configs/lasso.cfg";
  const CliRun r = cli({"path", "--config", cfg, "--out", out.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string csv = slurp(out / "path.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "lambda,nnz,l1_norm,P,Q,train_loss,val_loss,test_loss,epochs,balance,failed");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 21);
  // identical config and seed give identical bytes
  const fs::path again = temp_dir("path_again");
  ASSERT_EQ(cli({"path", "--config", cfg, "--out", again.string()}).code, 0);
  EXPECT_EQ(slurp(again / "path.csv"), csv);
}

TEST(Cli, MissingConfigNamesPath) {
  const CliRun r = cli({"path", "--config", "/nonexistent/dir/run.cfg"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("/nonexistent/dir/run.cfg"), std::string::npos);
  EXPECT_EQ(cli({"path"}).code, 1);
}

TEST(Cli, UnknownSubcommandPrintsUsage) {
  const CliRun r = cli({"frobnicate"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("svf-check"), std::string::npos);
  EXPECT_EQ(cli({}).code, 1);
}

TEST(Cli, NumericalFailureExitCode) {
  const fs::path dir = temp_dir("diverge");
  std::ofstream(dir / "bad.cfg") << "[data]\nn = 50\nd = 5\ns = 2\n[optim]\nlearning_rate = 100\nepochs = 50\n"
                                    "[path]\nlambdas = 0.1\n";
  const CliRun r = cli({"path", "--config", (dir / "bad.cfg").string(), "--out", dir.string()});
  EXPECT_EQ(r.code, 2);
}

TEST(Cli, GradcheckPasses) {
  const CliRun r = cli({"gradcheck", "--points", "3"});
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("mlp"), std::string::npos);
}

TEST(Config, ParsesAllSections) {
  const RunConfig c = parse(
      "[data]\nsource = gaussian\nn = 30\nd = 6\ns = 2\nrho = 0.3\nsigma = 0.5\nseed = 7\n"
      "[param]\nkind = ghppk\nk = 3\ngroup_sizes = 2, 4\n"
      "[optim]\nlearning_rate = 0.2\nmomentum = 0.9\nschedule = inverse_time\ndecay_rate = 0.01\nepochs = 10\n"
      "batch_size = 8\npatience = 3\nseed = 5\ninit = ones_tail\nfactor_lr_scale = nu1:0.5, nu2:2\n"
      "[path]\nlambdas = 0.1, 0.2\nwarm_start = false\nthreshold = 1e-5\n");
  EXPECT_EQ(c.source, DataSource::Gaussian);
  EXPECT_EQ(c.design.n, 30);
  EXPECT_EQ(c.design.seed, 7u);
  EXPECT_EQ(c.kind, ParamKind::GHPPk);
  EXPECT_EQ(c.param_spec().partition.sizes(), (std::vector<Index>{2, 4}));
  EXPECT_EQ(c.path.optim.schedule, Schedule::InverseTime);
  EXPECT_EQ(c.path.optim.batch_size, 8);
  EXPECT_EQ(*c.path.optim.patience, 3);
  EXPECT_EQ(c.path.optim.factor_lr_scale.at("nu2"), 2.0);
  EXPECT_EQ(c.path.init.kind, InitKind::OnesTail);
  EXPECT_EQ(c.path.lambdas, (std::vector<double>{0.1, 0.2}));
  EXPECT_FALSE(c.path.warm_start);
  EXPECT_EQ(c.path.threshold, 1e-5);
}

TEST(Config, DefaultsAndFullBatch) {
  const RunConfig c = parse("[optim]\nbatch_size = full\n");
  EXPECT_TRUE(c.path.optim.full_batch());
  EXPECT_EQ(c.kind, ParamKind::HPP);
  EXPECT_FALSE(c.explicit_lambdas);
}

TEST(Config, RejectsUnknownAndMalformed) {
  EXPECT_THROW(parse("[data]\nfoo = 1\n"), std::invalid_argument);
  EXPECT_THROW(parse("[extra]\nn = 1\n"), std::invalid_argument);
  EXPECT_THROW(parse("[data]\nn = ten\n"), std::invalid_argument);
  EXPECT_THROW(parse("[param]\nkind = nope\n"), std::invalid_argument);
  EXPECT_THROW(parse("[optim]\nschedule = step\n"), std::invalid_argument);
  EXPECT_THROW(parse("[optim]\nlearning_rate = -1\n"), std::invalid_argument);
  EXPECT_THROW(parse("[path]\nlambdas = 0.2, 0.1\n"), std::invalid_argument);
  EXPECT_THROW(parse("[data]\nn = 5\nn = 6\n"), std::invalid_argument);
  EXPECT_THROW(parse("[param]\nkind = hppk\nk = 2.5\n"), std::invalid_argument);
}
