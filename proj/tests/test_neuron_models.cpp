#include <cmath>
#include <complex>
#include <vector>

#include <gtest/gtest.h>

#include "psnn/neuron_models.hpp"
#include "psnn/physics_oracles.hpp"
#include "oracles.hpp"

using namespace psnn;

namespace {

std::vector<double> grid(double lo, double hi, int n) {
  std::vector<double> g;
  for (int i = 0; i < n; ++i) g.push_back(lo + (hi - lo) * i / (n - 1));
  return g;
}

const NeuronModel kModels[] = {NeuronModel::spd(), NeuronModel::set(), NeuronModel::tsp()};

double range_of(const NeuronModel& m) {
  switch (m.kind()) {
    case NeuronKind::spd: return 3.0;
    case NeuronKind::set: return 5.0;
    case NeuronKind::tsp: return 50.0;
  }
  return 1.0;
}

}  // namespace

TEST(SpdProbability, Examples) {
  EXPECT_EQ(spd_probability(0.0), 0.0);
  EXPECT_NEAR(spd_probability(std::sqrt(std::log(2.0))), 0.5, 1e-15);
  EXPECT_NEAR(spd_probability(1.0), 0.6321205588285577, 1e-15);
}

TEST(SpdProbability, RejectsNonFinite) {
  EXPECT_THROW(spd_probability(NAN), DomainError);
  EXPECT_THROW(spd_probability(INFINITY), DomainError);
}

TEST(SetProbability, Examples) {
  EXPECT_EQ(set_probability(0.0), 0.5);
  EXPECT_NEAR(set_probability(50.0), 1.0, 1e-15);
  EXPECT_NEAR(set_probability(1.0), 0.7310585786300049, 1e-15);
  EXPECT_THROW(set_probability(-INFINITY), DomainError);
}

TEST(SetProbability, MatchesLongDoubleSigmoid) {
  for (double z : grid(-40, 40, 161)) {
    const long double ref = 1.0L / (1.0L + std::exp(-static_cast<long double>(z)));
    EXPECT_NEAR(set_probability(z), static_cast<double>(ref), 4e-16 * std::max(1.0, static_cast<double>(ref))) << z;
  }
}

TEST(SetProbability, StableForLargeMagnitude) {
  EXPECT_GT(set_probability(-700.0), 0.0);
  EXPECT_EQ(set_probability(800.0), 1.0);
  EXPECT_GE(set_probability(-800.0), 0.0);
}

TEST(TspProbability, ZeroAtOrigin) { EXPECT_EQ(tsp_probability(TspParams{}, 0.0), 0.0); }

TEST(TspProbability, MatchesIndependentRk4AtAlpha10) {
  const TspParams p;
  const double oracle = test_oracles::tsp_rk4(p, 10.0, 1e-5);
  EXPECT_NEAR(tsp_probability(p, 10.0), oracle, 1e-6);
  EXPECT_NEAR(fsme_occupation(p, 10.0, 1e-5), oracle, 1e-12);
}

TEST(TspProbability, VariantsDisagreeAndOnlyNegativeMatchesOracle) {
  const TspParams p;
  for (double a : {0.5, 3.0, 10.0, 25.0}) {
    const double oracle = test_oracles::tsp_rk4(p, a, 1e-5);
    const auto neg = tsp_occupation_raw(p, a, TspExponentVariant::negative);
    EXPECT_NEAR(neg.real(), oracle, 1e-9) << a;
    EXPECT_LT(std::abs(neg.imag()), 1e-12) << a;
    const auto pos = tsp_occupation_raw(p, a, TspExponentVariant::positive);
    const bool pos_ok = std::isfinite(pos.real()) && std::abs(pos.real() - oracle) < 1e-3;
    EXPECT_FALSE(pos_ok) << a;
  }
}

TEST(TspProbability, NearRealImaginaryBoundary) {
  // 16 alpha^2 = (gamma - kappa)^2 makes Delta vanish.
  const TspParams p;
  const double a0 = std::abs(p.gamma - p.kappa) / 4.0;
  for (double a : {a0 - 1e-6, a0, a0 + 1e-6, a0 + 1e-3}) {
    const double oracle = test_oracles::tsp_rk4(p, a, 1e-5);
    EXPECT_NEAR(tsp_probability(p, a), oracle, 1e-9) << a;
  }
}

TEST(TspProbability, DegenerateDenominatorSeries) {
  // zeta = gamma gives Delta(0) = u, so Delta - u vanishes as alpha -> 0.
  TspParams p;
  p.zeta = p.gamma;
  for (double a : {1e-6, 1e-3, 0.5}) {
    const double oracle = test_oracles::tsp_rk4(p, a, 1e-5);
    EXPECT_NEAR(tsp_probability(p, a), oracle, 1e-7 * oracle + 1e-15) << a;
  }
  // zeta = 20 gives u < 0 and Delta + u = 0 at a finite coupling.
  TspParams q;
  q.zeta = 20.0;
  const double d = q.gamma - q.kappa;
  const double a = std::sqrt((d * d - q.u() * q.u()) / 16.0);
  EXPECT_LT(std::abs(q.delta(a) + q.u()), 1e-10);
  const double oracle = test_oracles::tsp_rk4(q, a, 1e-5);
  EXPECT_NEAR(tsp_probability(q, a), oracle, 1e-9);
}

TEST(TspProbability, ThrowsOnInvalidParams) {
  TspParams p;
  p.kappa = 0.0;
  EXPECT_THROW(tsp_probability(p, 1.0), DomainError);
  EXPECT_THROW(NeuronModel::tsp(p), DomainError);
}

TEST(NeuronModel, ProbabilitiesBoundedAndFinite) {
  for (const auto& m : kModels)
    for (double z : grid(-60, 60, 1201)) {
      const double p = m.probability(z);
      EXPECT_TRUE(std::isfinite(p));
      EXPECT_GE(p, 0.0);
      EXPECT_LE(p, 1.0);
    }
}

TEST(NeuronModel, Symmetries) {
  for (double z : grid(-20, 20, 401)) {
    EXPECT_NEAR(set_probability(-z), 1.0 - set_probability(z), 2e-16) << z;
    EXPECT_EQ(spd_probability(-z), spd_probability(z)) << z;
    EXPECT_EQ(tsp_probability(TspParams{}, -z), tsp_probability(TspParams{}, z)) << z;
  }
}

TEST(NeuronModel, SetStrictlyIncreasing) {
  double prev = -1.0;
  for (double z : grid(-30, 30, 601)) {
    const double p = set_probability(z);
    EXPECT_GT(p, prev);
    prev = p;
  }
}

TEST(ProbabilityDerivative, Examples) {
  EXPECT_EQ(probability_derivative(NeuronModel::set(), 0.0), 0.25);
  EXPECT_EQ(probability_derivative(NeuronModel::spd(), 0.0), 0.0);
  EXPECT_NEAR(probability_derivative(NeuronModel::tsp(), 0.0), 0.0, 1e-15);
  EXPECT_THROW(probability_derivative(NeuronModel::set(), NAN), DomainError);
}

TEST(ProbabilityDerivative, MatchesCentralDifference) {
  for (const auto& m : kModels) {
    const double r = range_of(m);
    for (double z : grid(-r, r, 301)) {
      const double h = 1e-5 * std::max(1.0, std::abs(z) / 10.0);
      const double fd = (m.probability(z + h) - m.probability(z - h)) / (2 * h);
      const double d = m.derivative(z);
      EXPECT_LE(std::abs(d - fd), std::max(1e-9, 1e-6 * std::abs(fd))) << m.name() << " z=" << z;
    }
  }
}

TEST(SampleActivation, DegenerateProbabilities) {
  RandomStream rng(7);
  for (std::uint32_t k : {1u, 3u, 100u}) {
    EXPECT_EQ(sample_activation(NeuronModel::set(), 800.0, k, rng).mean(), 1.0);
    EXPECT_EQ(sample_activation(NeuronModel::spd(), 0.0, k, rng).mean(), 0.0);
  }
}

TEST(SampleActivation, RejectsZeroTrials) {
  RandomStream rng(1);
  EXPECT_THROW(sample_activation(NeuronModel::set(), 0.0, 0, rng), DomainError);
}

TEST(SampleActivation, SetAtZeroMillionTrials) {
  RandomStream rng = derive_stream(42, StreamPurpose::oracle);
  const auto a = sample_activation(NeuronModel::set(), 0.0, 1'000'000, rng);
  EXPECT_EQ(a.trials, 1'000'000u);
  EXPECT_NEAR(a.mean(), 0.5, 0.002);
}

TEST(SampleActivation, LatticeAndUnbiasedOnGrid) {
  const std::uint32_t k = 100'000;
  for (const auto& m : kModels) {
    const double r = range_of(m);
    int idx = 0;
    for (double z : grid(-r, r, 50)) {
      RandomStream rng = derive_stream(3, StreamPurpose::oracle, {static_cast<std::uint64_t>(m.kind()),
                                                                 static_cast<std::uint64_t>(idx++)});
      const auto a = sample_activation(m, z, k, rng);
      EXPECT_LE(a.clicks, a.trials);
      const double p = m.probability(z);
      EXPECT_LE(std::abs(a.mean() - p), 4 * std::sqrt(p * (1 - p) / k) + 1e-12) << m.name() << " z=" << z;
    }
  }
}

TEST(NeuronKind, ParseRoundTrip) {
  for (auto k : {NeuronKind::spd, NeuronKind::set, NeuronKind::tsp}) EXPECT_EQ(parse_neuron_kind(to_string(k)), k);
  EXPECT_THROW(parse_neuron_kind("sigmoid"), ConfigError);
}
