#include "sflqg/errors.hpp"
#include "sflqg/experiment.hpp"
#include "sflqg/sim.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace sflqg;

namespace {

Matrix scalar(double v) { return (Matrix(1, 1) << v).finished(); }

SystemModel hagen() { return preset("hagen1998").system; }

}  // namespace

TEST(SystemModelType, Validation) {
    EXPECT_THROW(SystemModel(Matrix::Zero(2, 2), Matrix::Ones(2, 1), Matrix::Identity(2, 2)), SingularMatrixError);
    EXPECT_THROW(SystemModel(Matrix::Identity(2, 2), Matrix::Ones(3, 1), Matrix::Identity(2, 2)), DimensionError);
    EXPECT_THROW(SystemModel(Matrix::Identity(2, 2), Matrix::Ones(2, 1), Matrix::Zero(2, 2)), PositivityError);
    EXPECT_NO_THROW(SystemModel::with_psd_noise(Matrix::Identity(2, 2), Matrix::Ones(2, 1), Matrix::Zero(2, 2)));
}

TEST(Step, NoiseFreeIsDeterministic) {
    const SystemModel m = SystemModel::with_psd_noise(hagen().a(), hagen().b(), Matrix::Zero(2, 2));
    Rng rng(1);
    const Vector x = (Vector(2) << 0.3, -1.2).finished();
    const Vector u = scalar(0.7);
    EXPECT_TRUE(step(x, u, m, rng).isApprox(m.a() * x + m.b() * u, 1e-15));
}

TEST(Step, NoiseCovarianceMatchesSigma) {
    Matrix sigma(2, 2);
    sigma << 0.04, 0.01, 0.01, 0.02;
    const SystemModel m(hagen().a(), hagen().b(), sigma);
    Rng rng(2);
    const int draws = 100000;
    Matrix acc = Matrix::Zero(2, 2);
    for (int i = 0; i < draws; ++i) {
        const Vector w = step(Vector::Zero(2), Vector::Zero(1), m, rng);
        acc += w * w.transpose();
    }
    acc /= draws;
    // Standard error of a sample second moment: sqrt((s_ii s_jj + s_ij^2) / n).
    for (Index i = 0; i < 2; ++i) {
        for (Index j = 0; j < 2; ++j) {
            const double se = std::sqrt((sigma(i, i) * sigma(j, j) + sigma(i, j) * sigma(i, j)) / draws);
            EXPECT_NEAR(acc(i, j), sigma(i, j), 3.0 * se);
        }
    }
}

TEST(ExplorationCovariance, Examples) {
    const SystemModel m(scalar(0.5), scalar(1), scalar(1));
    EXPECT_EQ(exploration_covariance(scalar(0), m)(0, 0), 0.0);
    EXPECT_NEAR(exploration_covariance(scalar(0.25), m)(0, 0), 0.0625 * 16.0 / 15.0, 1e-14);
    EXPECT_THROW(exploration_covariance(scalar(-2.0), m), InstabilityError);
}

TEST(ExplorationCovariance, TestSystem) {
    const Preset p = preset("hagen1998");
    const DareSolution sol = solve_dare(p.system.a(), p.system.b(), p.cost);
    const Matrix f = p.system.a() - p.system.b() * sol.gain;
    const Matrix c = discrete_lyapunov(f, p.system.sigma());
    EXPECT_LE((c - f * c * f.transpose() - p.system.sigma()).norm(), 1e-10 * c.norm());
    const Matrix cov = exploration_covariance(sol.gain, p.system);
    ASSERT_EQ(cov.rows(), 1);
    EXPECT_GT(cov(0, 0), 0.0);
    EXPECT_NEAR(cov(0, 0), 0.00373916, 1e-8);
}

TEST(Simulate, ShapesAndDeterminism) {
    const SystemModel m = hagen();
    const Trajectory one = simulate(m, RandomGaussian{scalar(1)}, 1, 5);
    EXPECT_EQ(one.horizon(), 1u);
    EXPECT_EQ(one.states.size(), 2u);
    EXPECT_EQ(one.states[0], Vector::Zero(2));

    const Trajectory a = simulate(m, RandomGaussian{scalar(1)}, 300, 17);
    const Trajectory b = simulate(m, RandomGaussian{scalar(1)}, 300, 17);
    const Trajectory c = simulate(m, RandomGaussian{scalar(1)}, 300, 18);
    for (std::size_t t = 0; t <= 300; ++t) {
        EXPECT_EQ(a.states[t], b.states[t]);
    }
    EXPECT_NE(a.states[300], c.states[300]);
    EXPECT_THROW(simulate(m, RandomGaussian{scalar(1)}, 0, 1), DimensionError);
}

TEST(Simulate, PoliciesShareNoise) {
    // Input normals are drawn first whatever the policy, so zero feedback and
    // zero-covariance random input see the same process noise.
    const SystemModel m = hagen();
    const Trajectory fb = simulate(m, LinearFeedback{Matrix::Zero(1, 2)}, 50, 3);
    const Trajectory rnd = simulate(m, RandomGaussian{scalar(0)}, 50, 3);
    EXPECT_EQ(fb.states.back(), rnd.states.back());
}

TEST(Simulate, SwitchedSchedule) {
    const SystemModel m = hagen();
    const Matrix l = (Matrix(1, 2) << 0.4, -0.1).finished();
    std::size_t queries = 0;
    const Switched policy{scalar(1), 200, [&]() -> std::optional<Matrix> {
                              ++queries;
                              return l;
                          }};
    const Trajectory traj = simulate(m, policy, 400, 9);
    EXPECT_EQ(queries, 200u);
    for (std::size_t t = 200; t < 400; ++t) {
        EXPECT_TRUE(traj.inputs[t].isApprox(-l * traj.states[t], 1e-15));
    }
    bool random_before = false;
    for (std::size_t t = 0; t < 200; ++t) {
        random_before |= !traj.inputs[t].isApprox(-l * traj.states[t], 1e-6);
    }
    EXPECT_TRUE(random_before);
}

TEST(Simulate, SwitchedWithoutEstimateKeepsRandomInput) {
    const SystemModel m = hagen();
    const Switched policy{scalar(1), 0, []() -> std::optional<Matrix> { return std::nullopt; }};
    const Trajectory a = simulate(m, policy, 100, 4);
    const Trajectory b = simulate(m, RandomGaussian{scalar(1)}, 100, 4);
    EXPECT_EQ(a.states.back(), b.states.back());
}

TEST(Simulate, NonFiniteGainPropagates) {
    const Switched policy{scalar(1), 0, []() -> std::optional<Matrix> {
                              return Matrix::Constant(1, 2, std::nan(""));
                          }};
    EXPECT_THROW(simulate(hagen(), policy, 10, 1), NumericError);
}

TEST(Simulate, StationaryCovarianceUnderOptimalGain) {
    const Preset p = preset("hagen1998");
    const DareSolution sol = solve_dare(p.system.a(), p.system.b(), p.cost);
    const Matrix c = discrete_lyapunov(p.system.a() - p.system.b() * sol.gain, p.system.sigma());
    Rng rng(77);
    Matrix acc = Matrix::Zero(2, 2);
    std::size_t t = 0;
    run_closed_loop(p.system, LinearFeedback{sol.gain}, 100000, rng, [&](const Vector&, const Vector&, const Vector& xn) {
        ++t;
        acc += xn * xn.transpose();
    });
    acc /= static_cast<double>(t);
    EXPECT_LT((acc - c).norm() / c.norm(), 0.05);
}

TEST(Rng, StreamsAreIndependentAndReproducible) {
    Rng a = Rng::stream(1, 0);
    Rng b = Rng::stream(1, 0);
    Rng c = Rng::stream(1, 1);
    Rng d = Rng::stream(2, 0);
    const double va = a.normal();
    EXPECT_EQ(va, b.normal());
    EXPECT_NE(va, c.normal());
    EXPECT_NE(va, d.normal());
}

TEST(TrajectoryCsv, RoundTrip) {
    const Trajectory traj = simulate(hagen(), RandomGaussian{scalar(1)}, 25, 8);
    std::stringstream io;
    write_trajectory_csv(io, traj);
    const std::string text = io.str();
    EXPECT_EQ(text.substr(0, text.find('\n')), "t,x_1,x_2,u_1");
    const Trajectory back = read_trajectory_csv(io);
    ASSERT_EQ(back.horizon(), traj.horizon());
    for (std::size_t t = 0; t <= traj.horizon(); ++t) {
        EXPECT_EQ(back.states[t], traj.states[t]);
    }
    for (std::size_t t = 0; t < traj.horizon(); ++t) {
        EXPECT_EQ(back.inputs[t], traj.inputs[t]);
    }
}

TEST(TrajectoryCsv, Malformed) {
    std::istringstream no_header("0,1,2,3\n");
    EXPECT_THROW(read_trajectory_csv(no_header), ParseError);
    std::istringstream missing_last("t,x_1,u_1\n0,1,2\n1,2,3\n");
    EXPECT_THROW(read_trajectory_csv(missing_last), ParseError);
    std::istringstream bad("t,x_1,u_1\n0,1,zz\n1,2,\n");
    EXPECT_THROW(read_trajectory_csv(bad), ParseError);
    std::istringstream ok("t,x_1,u_1\n0,1,2\n1,2,\n");
    EXPECT_EQ(read_trajectory_csv(ok).horizon(), 1u);
}
