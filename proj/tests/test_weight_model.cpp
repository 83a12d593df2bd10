#include <gtest/gtest.h>

#include <cmath>

#include "profilelab/weight_model.hpp"

using namespace profilelab;

namespace {

WeightModel two_atom(double p0, std::vector<std::int64_t> w0, double p1, std::vector<std::int64_t> w1) {
  WeightModel m;
  m.b = 2;
  m.atoms = {{p0, std::nullopt, {Level{w0[0]}, Level{w0[1]}}}, {p1, std::nullopt, {Level{w1[0]}, Level{w1[1]}}}};
  return m;
}

}  // namespace

TEST(WeightModel, BstIsValid) {
  const auto m = preset("bst");
  EXPECT_TRUE(validate(m).ok());
  EXPECT_EQ(m.b, 2);
  EXPECT_EQ(m.d, 1);
  const auto law = marginal(m);
  ASSERT_EQ(law.atoms.size(), 1u);
  EXPECT_EQ(law.atoms[0].value, Level{1});
  EXPECT_EQ(law.atoms[0].p, 1.0);
}

TEST(WeightModel, MassDeficitIsReported) {
  const auto m = two_atom(0.45, {0, 1}, 0.45, {1, 0});
  const auto r = validate(m);
  ASSERT_FALSE(r.ok());
  EXPECT_NE(r.issues.front().find("probability mass 0.9"), std::string::npos) << r.issues.front();
}

TEST(WeightModel, DifferingMarginalsAreReported) {
  const auto m = two_atom(0.5, {0, 1}, 0.5, {1, 1});
  const auto r = validate(m);
  ASSERT_EQ(r.issues.size(), 1u);
  EXPECT_NE(r.issues[0].find("marginals differ"), std::string::npos);
  EXPECT_THROW(marginal(m), DomainError);
}

TEST(WeightModel, MarginalsOfPresets) {
  const auto rrt = marginal(preset("rrt"));
  EXPECT_EQ(rrt.prob({0}), 0.5);
  EXPECT_EQ(rrt.prob({1}), 0.5);

  const auto lop = marginal(preset("lopsided", {{"c", "1,2"}}));
  EXPECT_EQ(lop.prob({1}), 0.5);
  EXPECT_EQ(lop.prob({2}), 0.5);

  const auto lmr = marginal(preset("lmr"));
  EXPECT_EQ(lmr.prob({-1}), 0.5);
  EXPECT_EQ(lmr.prob({1}), 0.5);

  const auto port = preset("port", {{"beta", "1"}});
  EXPECT_EQ(port.b, 3);
  EXPECT_EQ(port.root_level(), Level{1});
  const auto pl = marginal(port);
  EXPECT_NEAR(pl.prob({1}), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(pl.prob({0}), 2.0 / 3.0, 1e-15);
  for (const auto& a : port.atoms) {
    std::int64_t ones = 0;
    for (const auto& w : a.weights) ones += w[0];
    EXPECT_EQ(ones, 1);
  }

  const auto p4 = preset("port", {{"beta", "2"}});
  EXPECT_EQ(p4.b, 4);
  EXPECT_NEAR(marginal(p4).prob({1}), 0.25, 1e-15);
}

TEST(WeightModel, EveryPresetValidatesWithExactMass) {
  for (const auto& name : preset_names()) {
    const auto m = preset(name);
    EXPECT_TRUE(validate(m).ok()) << name;
    EXPECT_TRUE(m.exact()) << name;
    Rational total(0);
    for (const auto& a : marginal(m).atoms) {
      ASSERT_TRUE(a.exact_p.has_value()) << name;
      total += *a.exact_p;
    }
    EXPECT_EQ(total, Rational(1)) << name;
  }
}

TEST(WeightModel, CouplingOfRrtAtoms) {
  for (const auto* name : {"rrt", "dirchange"})
    for (const auto& a : preset(name).atoms) EXPECT_EQ(a.weights[0][0] + a.weights[1][0], 1) << name;
}

TEST(WeightModel, WebgraphSecondWeightVanishesWhenFirstIsOne) {
  const auto m = preset("webgraph", {{"alpha", "0.4"}});
  Stream rng(11);
  for (int i = 0; i < 10000; ++i) {
    const auto& w = sample_weights(m, rng);
    if (w[0][0] == 1) {
      EXPECT_EQ(w[1][0], 0);
    }
  }
  EXPECT_NEAR(marginal(m).prob({1}), 0.2, 1e-15);
}

TEST(WeightModel, BstDrawIsDeterministic) {
  const auto m = preset("bst");
  Stream rng(5);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(sample_weights(m, rng), (std::vector<Level>{{1}, {1}}));
}

TEST(WeightModel, RrtDrawFrequency) {
  const auto m = preset("rrt");
  Stream rng(2024);
  const int draws = 100000;
  int first = 0;
  for (int i = 0; i < draws; ++i) first += sample_weights(m, rng)[0][0] == 0 ? 1 : 0;
  const double sigma = std::sqrt(draws * 0.25);
  EXPECT_LT(std::abs(first - draws / 2.0), 3.0 * sigma);
}

TEST(WeightModel, SameStreamSameDraws) {
  const auto m = preset("colored");
  Stream a(9, {1, 2}), b(9, {1, 2});
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(sample_atom(m, a), sample_atom(m, b));
}

TEST(WeightModel, PresetErrors) {
  EXPECT_THROW(preset("nope"), DomainError);
  EXPECT_THROW(preset("bst", {{"beta", "1"}}), DomainError);
  EXPECT_THROW(preset("port", {{"beta", "0"}}), DomainError);
  EXPECT_THROW(preset("port", {{"beta", "x"}}), DomainError);
  EXPECT_THROW(preset("colored", {{"p", "1"}}), DomainError);
  EXPECT_THROW(preset("webgraph", {{"alpha", "-0.1"}}), DomainError);
  EXPECT_THROW(preset("lopsided", {{"c", "2,1"}}), DomainError);
  EXPECT_THROW(preset("lopsided", {{"c", "0,1"}}), DomainError);
}

TEST(WeightModel, LopsidedThreeWay) {
  const auto m = preset("lopsided", {{"c", "1,1,3"}});
  EXPECT_EQ(m.b, 3);
  const auto law = marginal(m);
  EXPECT_NEAR(law.prob({1}), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(law.prob({3}), 1.0 / 3.0, 1e-15);
}

TEST(WeightModel, Combo2dSupport) {
  const auto law = marginal(preset("combo2d"));
  ASSERT_EQ(law.atoms.size(), 2u);
  EXPECT_EQ(law.atoms[0].value, (Level{1, 0}));
  EXPECT_EQ(law.atoms[1].value, (Level{1, 1}));
}

TEST(WeightModel, JsonRoundTrip) {
  const auto m = preset("port", {{"beta", "2"}});
  const auto back = model_from_json(model_to_json(m));
  EXPECT_EQ(back.b, m.b);
  EXPECT_EQ(back.root_level(), m.root_level());
  ASSERT_EQ(back.atoms.size(), m.atoms.size());
  for (std::size_t i = 0; i < m.atoms.size(); ++i) {
    EXPECT_EQ(back.atoms[i].p, m.atoms[i].p);
    EXPECT_EQ(back.atoms[i].weights, m.atoms[i].weights);
  }
  EXPECT_TRUE(validate(back).ok());
  EXPECT_THROW(model_from_json(nlohmann::json{{"b", 2}}), DomainError);
}

TEST(Rational, ParseAndArithmetic) {
  EXPECT_EQ(Rational::parse("0.3"), Rational(3, 10));
  EXPECT_EQ(Rational::parse("2/4"), Rational(1, 2));
  EXPECT_EQ(Rational(1, 3) + Rational(1, 6), Rational(1, 2));
  EXPECT_EQ(Rational(2, 3) * Rational(3, 4), Rational(1, 2));
  EXPECT_TRUE(Rational(1, 3) < Rational(1, 2));
  EXPECT_THROW(Rational::parse("abc"), std::exception);
}
