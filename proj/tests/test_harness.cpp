#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "tangent_kit/tangent_kit.hpp"

namespace tk = tangent_kit;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("tangent_kit_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

std::string config_error_path(const tk::Json& j) {
  try {
    tk::config_from_json(j);
  } catch (const tk::ConfigError& e) {
    return e.what();
  }
  return "";
}

tk::ExperimentConfig tiny_train(const std::string& optimizer) {
  tk::ExperimentConfig c;
  c.kind = "train";
  c.pde.name = "poisson_toy_linear";
  c.network.hidden = {6};
  c.data.n_r = 12;
  c.data.n_b = 2;
  c.optimizer.name = optimizer;
  c.optimizer.iterations = 15;
  c.optimizer.eval_every = 5;
  return c;
}

}  // namespace

TEST(Config, EmptyObjectGivesValidDefaults) {
  const tk::ExperimentConfig c = tk::config_from_json(tk::Json::object());
  EXPECT_EQ(c.kind, "train");
  EXPECT_EQ(c.optimizer.name, "lm");
  EXPECT_EQ(c.optimizer.iterations, 1000);
  EXPECT_DOUBLE_EQ(c.optimizer.tol, 1e-3);
  EXPECT_EQ(c.network.hidden, (std::vector<int>{20, 20, 20, 20, 20}));
  EXPECT_EQ(c.study.seeds.size(), 10u);
}

TEST(Config, RoundTripsThroughJson) {
  tk::ExperimentConfig c = tk::config_from_json(tk::Json::object());
  c.pde.name = "convection";
  c.pde.parameters = {{"beta", 30.0}};
  c.curriculum.schedule = {10, 20, 30};
  tk::validate(c);
  const tk::ExperimentConfig d = tk::config_from_json(tk::to_json(c));
  EXPECT_EQ(tk::to_json(c).dump(), tk::to_json(d).dump());
}

TEST(Config, OverridesTakePrecedenceOverFile) {
  tk::Json j = {{"pde", {{"name", "poisson_toy_linear"}}}, {"optimizer", {{"name", "adam"}, {"iterations", 5}}}};
  tk::set_path(j, "pde.name", "burgers");
  tk::apply_override(j, "optimizer.name=lm");
  tk::apply_override(j, "optimizer.iterations=1000");
  const tk::ExperimentConfig c = tk::config_from_json(j);
  EXPECT_EQ(c.pde.name, "burgers");
  EXPECT_EQ(c.optimizer.name, "lm");
  EXPECT_EQ(c.optimizer.iterations, 1000);
}

TEST(Config, NegativeBetaNamesTheField) {
  tk::Json j = tk::Json::object();
  tk::set_path(j, "pde.name", "convection");
  tk::set_path(j, "pde.parameters.beta", -1.0);
  EXPECT_NE(config_error_path(j).find("pde.parameters.beta"), std::string::npos);
}

TEST(Config, UnknownKeyIsRejected) {
  const std::string msg = config_error_path({{"optimizer", {{"lamda", 1.0}}}});
  EXPECT_NE(msg.find("optimizer.lamda"), std::string::npos) << msg;
}

TEST(Config, TypeMismatchIsRejected) {
  const std::string msg = config_error_path({{"data", {{"n_r", "many"}}}});
  EXPECT_NE(msg.find("data.n_r"), std::string::npos) << msg;
}

TEST(Config, OutOfRangeIsRejected) {
  EXPECT_FALSE(config_error_path({{"data", {{"n_r", 0}}}}).empty());
  EXPECT_FALSE(config_error_path({{"kind", "nope"}}).empty());
  EXPECT_FALSE(config_error_path({{"optimizer", {{"name", "sgd"}}}}).empty());
}

TEST(Artifacts, RealsUseSeventeenDigits) {
  EXPECT_EQ(tk::format_real(0.1), "0.10000000000000001");
  EXPECT_EQ(std::stod(tk::format_real(1.0 / 3.0)), 1.0 / 3.0);
  EXPECT_EQ(tk::format_real(tk::kNaN), "");
}

TEST(Artifacts, CsvRoundTrip) {
  const fs::path dir = scratch("csv");
  tk::Table t({"a", "b"});
  t.add(1, 0.25);
  t.add(2, tk::kNaN);
  tk::write_csv(dir / "t.csv", t);
  const tk::Table r = tk::read_csv(dir / "t.csv");
  EXPECT_EQ(r.header, t.header);
  const auto b = tk::column(r, "b");
  ASSERT_EQ(b.size(), 2u);
  EXPECT_EQ(b[0], 0.25);
  EXPECT_TRUE(std::isnan(b[1]));
  EXPECT_THROW(tk::column(r, "c"), std::invalid_argument);
  fs::remove_all(dir);
}

TEST(Artifacts, ParamsRoundTripBitExact) {
  const fs::path dir = scratch("params");
  tk::MlpParams p = tk::init_xavier({2, 5, 3, 1}, 7, tk::make_fourier_embedding(2, 4, 10.0, 3));
  tk::save_params(dir / "params.bin", p);
  const tk::MlpParams q = tk::load_params(dir / "params.bin");
  EXPECT_EQ(q.widths, p.widths);
  ASSERT_EQ(q.theta.size(), p.theta.size());
  for (Eigen::Index k = 0; k < p.theta.size(); ++k) EXPECT_EQ(q.theta[k], p.theta[k]);
  ASSERT_TRUE(q.embedding.has_value());
  EXPECT_EQ(q.embedding->B, p.embedding->B);
  const double pt[2] = {0.3, -0.7};
  EXPECT_EQ(tk::evaluate(p, pt), tk::evaluate(q, pt));
  fs::remove_all(dir);
}

TEST(Harness, NtkInitExampleHasOneHundredRows) {
  tk::ExperimentConfig c;
  c.kind = "ntk-init";
  c.pde.name = "poisson_toy_linear";
  c.data.n_r = 4;
  c.data.n_b = 2;
  c.study.widths = {16, 32, 64, 128, 256, 512, 1024, 2048, 4096, 8192};
  const fs::path dir = scratch("init");
  tk::run(c, dir);
  EXPECT_EQ(tk::read_csv(dir / "ntk_init.csv").rows.size(), 100u);
  fs::remove_all(dir);
}

TEST(Harness, ManifestRowCountsMatchFiles) {
  const fs::path dir = scratch("manifest");
  tk::run(tiny_train("lm"), dir);
  const auto entries = tk::read_manifest(dir);
  bool saw_train = false;
  for (const auto& [rel, rows] : entries) {
    const fs::path p = dir / rel;
    ASSERT_TRUE(fs::exists(p)) << rel;
    if (p.extension() == ".csv") EXPECT_EQ(rows, static_cast<long>(tk::read_csv(p).rows.size())) << rel;
    if (p.extension() == ".bin") EXPECT_EQ(rows * 8, static_cast<long>(fs::file_size(p))) << rel;
    saw_train = saw_train || rel == "train.csv";
  }
  EXPECT_TRUE(saw_train);
  EXPECT_EQ(tk::read_csv(dir / "train.csv").rows.size(), 15u);
  EXPECT_EQ(tk::read_csv(dir / "lm_trace.csv").rows.size(), 15u);
  fs::remove_all(dir);
}

TEST(Harness, SerialRerunsAreBitIdentical) {
  for (const char* opt : {"lm", "adam", "lbfgs"}) {
    const fs::path a = scratch(std::string("rerun_a_") + opt), b = scratch(std::string("rerun_b_") + opt);
    tk::run(tiny_train(opt), a, 1);
    tk::run(tiny_train(opt), b, 1);
    EXPECT_EQ(slurp(a / "params.bin"), slurp(b / "params.bin")) << opt;
    const tk::Table ta = tk::read_csv(a / "train.csv"), tb = tk::read_csv(b / "train.csv");
    ASSERT_EQ(ta.rows.size(), tb.rows.size());
    for (const auto& col : {"iter", "loss", "loss_b", "loss_r", "rel_l2", "lambda"}) {
      const auto x = tk::column(ta, col), y = tk::column(tb, col);
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (std::isnan(x[i])) {
          EXPECT_TRUE(std::isnan(y[i]));
        } else {
          EXPECT_EQ(x[i], y[i]) << opt << " " << col << " row " << i;
        }
      }
    }
    fs::remove_all(a);
    fs::remove_all(b);
  }
}

TEST(Harness, ThreadedStudyMatchesSerial) {
  tk::ExperimentConfig c;
  c.kind = "ntk-init";
  c.pde.name = "burgers_toy_nonlinear";
  c.data.n_r = 4;
  c.data.n_b = 2;
  c.study.widths = {16, 64};
  c.study.seeds = {0, 1, 2};
  const auto s = tk::ntk_init_study(c, 1), p = tk::ntk_init_study(c, 3);
  ASSERT_EQ(s.size(), p.size());
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(s[i].k_norm, p[i].k_norm);
}

TEST(Harness, UnwritableOutputIsReported) {
  const fs::path file = scratch("blocker");
  tk::write_text(file, "x");
  EXPECT_THROW(tk::run(tiny_train("gd"), file / "sub"), std::runtime_error);
  fs::remove_all(file);
}

TEST(Harness, UnknownFigureIsRejected) {
  EXPECT_THROW(tk::canned_figure("fig9z"), std::invalid_argument);
  for (const auto& id : tk::figure_ids()) {
    const tk::Figure f = tk::canned_figure(id);
    EXPECT_FALSE(f.runs.empty()) << id;
    EXPECT_FALSE(f.feeds.empty()) << id;
  }
}

TEST(Harness, SparsityWritesOneMapPerSpec) {
  const fs::path dir = scratch("sparsity");
  for (const char* pde : {"poisson_toy_linear", "burgers_toy_nonlinear"}) {
    tk::ExperimentConfig c;
    c.kind = "hessian-sparsity";
    c.pde.name = pde;
    c.study.width = 8;
    tk::run(c, dir / pde);
    const tk::Table t = tk::read_csv(dir / pde / (std::string("sparsity_") + pde + ".csv"));
    const long n = 8 + 8 + 8 + 1;  // W0, b0, W1, b1 of a {1, 8, 1} net
    EXPECT_EQ(static_cast<long>(t.rows.size()), n * n);
  }
  fs::remove_all(dir);
}
