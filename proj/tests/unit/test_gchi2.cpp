#include "sflqg/errors.hpp"
#include "sflqg/experiment.hpp"
#include "sflqg/gchi2.hpp"
#include "sflqg/stats.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace sflqg;
using sflqg::testing::random_pd;

namespace {

struct SampleMoments {
    double mean;
    double variance;
};

SampleMoments draw_moments(const GChi2Params& params, int draws, std::uint64_t seed) {
    Rng rng(seed);
    CompensatedSum s;
    CompensatedSum s2;
    for (int i = 0; i < draws; ++i) {
        const double y = sample(params, rng);
        s.add(y);
        s2.add(y * y);
    }
    const double mean = s.value() / draws;
    return {mean, s2.value() / draws - mean * mean};
}

}  // namespace

TEST(GChi2, ConstantCase) {
    const GChi2Params params{Matrix::Zero(2, 2), Vector::Zero(2), 3.5};
    Rng rng(1);
    EXPECT_EQ(sample(params, rng), 3.5);
    const Moments m = moments(params);
    EXPECT_EQ(m.mean, 3.5);
    EXPECT_EQ(m.variance, 0.0);
}

TEST(GChi2, AnalyticMoments) {
    const Moments chi = moments({Matrix::Identity(4, 4), Vector::Zero(4), 0.0});
    EXPECT_EQ(chi.mean, 4.0);
    EXPECT_EQ(chi.variance, 8.0);
    const Moments shifted = moments({Matrix::Zero(3, 3), (Vector(3) << 1, 0, 0).finished(), 5.0});
    EXPECT_EQ(shifted.mean, 5.0);
    EXPECT_EQ(shifted.variance, 1.0);
}

TEST(GChi2, Validation) {
    EXPECT_THROW(moments({Matrix::Identity(2, 2), Vector::Zero(3), 0.0}), DimensionError);
    EXPECT_THROW(moments({-Matrix::Identity(2, 2), Vector::Zero(2), 0.0}), PositivityError);
    Matrix asym = Matrix::Identity(2, 2);
    asym(0, 1) = 1;
    EXPECT_THROW(moments({asym, Vector::Zero(2), 0.0}), SymmetryError);
}

TEST(GChi2, ChiSquaredOneDofMean) {
    const int draws = 1000000;
    const SampleMoments s = draw_moments({Matrix::Identity(1, 1), Vector::Zero(1), 0.0}, draws, 2);
    EXPECT_NEAR(s.mean, 1.0, 3.0 * std::sqrt(2.0 / draws));
}

TEST(GChi2, RandomParamsMatchMonteCarlo) {
    Rng gen(3);
    const int draws = 1000000;
    for (int trial = 0; trial < 3; ++trial) {
        const Index n = 1 + trial;
        const GChi2Params params{random_pd(n, gen), gen.normal_vector(n), gen.normal()};
        const Moments m = moments(params);
        const SampleMoments s = draw_moments(params, draws, 100 + trial);
        EXPECT_NEAR(s.mean, m.mean, 4.0 * std::sqrt(m.variance / draws));
        // Var of the sample variance ~ (mu4 - sigma^4) / n; bound mu4 by the
        // Gaussian-chaos estimate 15 sigma^4 for a conservative band.
        EXPECT_NEAR(s.variance, m.variance, 4.0 * std::sqrt(14.0 / draws) * m.variance);
    }
}

TEST(Epsilon, MeanIsExactlyZero) {
    Rng rng(4);
    for (int trial = 0; trial < 1000; ++trial) {
        const Index n = 1 + trial % 4;
        const Index m = 1 + trial % 3;
        const SystemModel model(sflqg::testing::random_with_radius(n, 0.8, rng),
                                sflqg::testing::random_matrix(n, m, rng), random_pd(n, rng));
        const GChi2Params params = epsilon_params(model, random_pd(n, rng), rng.normal_vector(n + m));
        EXPECT_EQ(moments(params).mean, 0.0);
    }
}

TEST(Epsilon, OffsetIsMinusTraceSigmaP) {
    const Preset p = preset("hagen1998");
    const DareSolution sol = solve_dare(p.system.a(), p.system.b(), p.cost);
    const GChi2Params params = epsilon_params(p.system, sol.p, Vector::Ones(3));
    EXPECT_NEAR(params.c, -(p.system.sigma() * sol.p).trace(), 1e-15);
}

TEST(Epsilon, VarianceFormula) {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        const Index n = 1 + trial % 4;
        const SystemModel model(sflqg::testing::random_with_radius(n, 0.8, rng),
                                sflqg::testing::random_matrix(n, 1, rng), random_pd(n, rng));
        const Matrix pm = random_pd(n, rng);
        const Vector xi = rng.normal_vector(n + 1);
        const double analytic = moments(epsilon_params(model, pm, xi)).variance;
        EXPECT_NEAR(analytic, epsilon_variance(model, pm, xi), 1e-10 * analytic);
    }
    const Preset p = preset("hagen1998");
    const Matrix pm = Matrix::Identity(2, 2);
    const Matrix ps = pm * p.system.sigma();
    EXPECT_NEAR(moments(epsilon_params(p.system, pm, Vector::Zero(3))).variance, 2.0 * (ps * ps).trace(), 1e-15);
}

TEST(Epsilon, SimulatedVarianceMatches) {
    const Preset p = preset("hagen1998");
    const DareSolution sol = solve_dare(p.system.a(), p.system.b(), p.cost);
    const Vector xi = (Vector(3) << 0.4, -0.2, 0.3).finished();
    const Vector x = xi.head(2);
    const Vector u = xi.tail(1);
    const double var = epsilon_variance(p.system, sol.p, xi);
    Rng rng(6);
    const int draws = 1000000;
    CompensatedSum s;
    CompensatedSum s2;
    for (int i = 0; i < draws; ++i) {
        const double e = epsilon_realized(p.system, sol.p, xi, step(x, u, p.system, rng));
        s.add(e);
        s2.add(e * e);
    }
    const double mean = s.value() / draws;
    EXPECT_NEAR(mean, 0.0, 4.0 * std::sqrt(var / draws));
    EXPECT_NEAR(s2.value() / draws - mean * mean, var, 4.0 * std::sqrt(14.0 / draws) * var);
}

TEST(Epsilon, KolmogorovSmirnovAgainstSampler) {
    const Preset p = preset("hagen1998");
    const DareSolution sol = solve_dare(p.system.a(), p.system.b(), p.cost);
    const Vector xi = (Vector(3) << 0.1, 0.05, -0.08).finished();
    const GChi2Params params = epsilon_params(p.system, sol.p, xi);
    Rng sim(7);
    Rng gen(8);
    const int draws = 100000;
    std::vector<double> simulated;
    std::vector<double> sampled;
    for (int i = 0; i < draws; ++i) {
        simulated.push_back(epsilon_realized(p.system, sol.p, xi, step(xi.head(2), xi.tail(1), p.system, sim)));
        sampled.push_back(sample(params, gen));
    }
    EXPECT_GT(ks_two_sample(simulated, sampled).p_value, 0.001);
}
