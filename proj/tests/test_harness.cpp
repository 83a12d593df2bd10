#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "profilelab/harness.hpp"

using namespace profilelab;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.preset = "bst";
  c.n = {200, 2000};
  c.reps = 6;
  c.c_grid = {{1.6}, {2.4}};
  c.pool_size = 2000;
  c.pool_iters = 6;
  c.seed = 5;
  return c;
}

std::size_t count_fields(const std::string& line) {
  std::size_t n = 1;
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') quoted = !quoted;
    if (ch == ',' && !quoted) ++n;
  }
  return n;
}

}  // namespace

TEST(Stats, KsStatistic) {
  const std::vector<double> a{0.1, 0.4, 0.7};
  EXPECT_EQ(ks_statistic(a, a), 0.0);
  EXPECT_EQ(ks_statistic(a, std::vector<double>{2.0, 3.0}), 1.0);
  Stream rng(1);
  std::vector<double> u(5000);
  for (auto& v : u) v = rng.uniform();
  const double d = ks_statistic(u, [](double x) { return std::clamp(x, 0.0, 1.0); });
  EXPECT_GT(ks_pvalue(d, 5000), 0.01);
  EXPECT_LT(ks_pvalue(0.1, 5000), 1e-10);
  EXPECT_NEAR(ks_pvalue(0.0, 100), 1.0, 1e-12);
}

TEST(Stats, MomentsAndCdfs) {
  EXPECT_DOUBLE_EQ(sample_mean({1.0, 2.0, 3.0}), 2.0);
  EXPECT_DOUBLE_EQ(sample_variance({1.0, 2.0, 3.0}), 1.0);
  EXPECT_NEAR(gamma_cdf(1.0, 1.0, 1.0), 1.0 - std::exp(-1.0), 1e-15);
  EXPECT_NEAR(beta_cdf(0.25, 0.5, 1.0), 0.5, 1e-15);
}

TEST(Harness, ConfigFromJson) {
  const auto j = nlohmann::json::parse(R"({
    "preset": "port", "params": {"beta": 2}, "n": [1000, 10000], "reps": 7,
    "c_grid": [1.5, [2.5]], "seed": 9, "pool": {"M": 2000, "K": 4},
    "thresholds": {"ratio_mean": 0.2}, "sizes": {"oracle_n": 3}
  })");
  const auto c = config_from_json(j);
  EXPECT_EQ(c.preset, "port");
  EXPECT_EQ(c.params.at("beta"), "2");
  EXPECT_EQ(c.n, (std::vector<std::int64_t>{1000, 10000}));
  EXPECT_EQ(c.reps, 7);
  ASSERT_EQ(c.c_grid.size(), 2u);
  EXPECT_EQ(c.c_grid[1][0], 2.5);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.pool_size, 2000u);
  EXPECT_EQ(c.pool_iters, 4);
  EXPECT_EQ(c.thresholds.ratio_mean, 0.2);
  EXPECT_EQ(c.thresholds.ks_alpha, Thresholds{}.ks_alpha);
  EXPECT_EQ(c.sizes.oracle_n, 3);
  EXPECT_EQ(config_model(c).b, 4);
  EXPECT_EQ(config_from_json(nlohmann::json::parse(R"({"n": 500})")).n, (std::vector<std::int64_t>{500}));
}

TEST(Harness, ValidateConfig) {
  auto c = small_config();
  const auto m = config_model(c);
  EXPECT_NO_THROW(validate_config(m, c));
  c.c_grid = {{4.311}};
  EXPECT_THROW(validate_config(m, c), DomainError);
  c.c_grid = {{0.2}};
  EXPECT_THROW(validate_config(m, c), DomainError);
  c = small_config();
  c.reps = 0;
  EXPECT_THROW(validate_config(m, c), DomainError);
  c = small_config();
  c.l_grid = {{3}};
  EXPECT_THROW(validate_config(m, c), DomainError);
  c.c_grid.clear();
  EXPECT_NO_THROW(validate_config(m, c));
  c.format = "xml";
  EXPECT_THROW(validate_config(m, c), DomainError);
}

TEST(Harness, CorruptedModelFailsValidationGateOnly) {
  auto m = preset("bst");
  m.atoms[0].p = 0.9;
  m.atoms[0].exact_p.reset();
  const auto r = run_identity_suite(m, small_config());
  ASSERT_EQ(r.gates.size(), 1u);
  EXPECT_EQ(r.gates[0].name, "validation");
  EXPECT_FALSE(r.gates[0].pass);
  EXPECT_FALSE(r.pass);
}

TEST(Harness, InteriorThetasAreAdmissible) {
  for (const auto& name : preset_names()) {
    const auto m = preset(name);
    for (const auto& t : interior_thetas(m)) EXPECT_TRUE(in_lambda_tilde(m, t)) << name;
  }
}

TEST(Harness, ConvergenceReportShapeAndRoundTrip) {
  const auto c = small_config();
  const auto r = run_convergence(c);
  ASSERT_EQ(r.points.size(), 4u);
  ASSERT_EQ(r.trend.size(), 2u);
  for (const auto& p : r.points) {
    EXPECT_GT(p.mean, 0.0);
    EXPECT_GT(p.boundary_margin, 0.0);
  }
  EXPECT_EQ(convergence_from_json(nlohmann::json::parse(to_json(r).dump())), r);

  const auto csv = to_csv(r);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  const auto fields = count_fields(line);
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    EXPECT_EQ(count_fields(line), fields);
    ++rows;
  }
  EXPECT_EQ(rows, r.points.size());
}

TEST(Harness, EmptyReportsHaveHeaderOnly) {
  EXPECT_EQ(to_csv(ConvergenceReport{}), "n,c,level,theta,log_A,mean,std,min,max,pool_mean,ks,boundary_margin,mean_pass,ks_pass\n");
  EXPECT_EQ(to_csv(IdentityReport{}), "gate,hard,pass,statistic,threshold,detail\n");
}

TEST(Harness, IdentityCsvQuotesDetail) {
  IdentityReport r;
  r.gates.push_back({"g", true, true, 0.5, 1.0, "a,b \"c\""});
  const auto csv = to_csv(r);
  EXPECT_NE(csv.find("\"a,b \"\"c\"\"\""), std::string::npos);
  EXPECT_EQ(identity_from_json(nlohmann::json::parse(to_json(r).dump())), r);
}

TEST(Harness, ConvergenceIsDeterministic) {
  const auto c = small_config();
  setenv("PROFILELAB_THREADS", "1", 1);
  const auto a = to_json(run_convergence(c)).dump();
  setenv("PROFILELAB_THREADS", "4", 1);
  const auto b = to_json(run_convergence(c)).dump();
  unsetenv("PROFILELAB_THREADS");
  EXPECT_EQ(a, b);
}

TEST(Harness, LevelGrid) {
  auto c = small_config();
  c.c_grid.clear();
  c.l_grid = {{9}, {12}};
  c.n = {2000};
  const auto r = run_convergence(c);
  ASSERT_EQ(r.points.size(), 2u);
  EXPECT_EQ(r.points[0].level, Level{9});
}
