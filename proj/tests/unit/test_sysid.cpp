#include "sflqg/errors.hpp"
#include "sflqg/experiment.hpp"
#include "sflqg/stats.hpp"
#include "sflqg/sysid.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace sflqg;
using sflqg::testing::rel_diff;

namespace {

Matrix scalar(double v) { return (Matrix(1, 1) << v).finished(); }

SystemModel hagen() { return preset("hagen1998").system; }

Trajectory random_run(const SystemModel& m, std::size_t horizon, std::uint64_t seed) {
    return simulate(m, RandomGaussian{Matrix::Identity(m.input_dim(), m.input_dim())}, horizon, seed);
}

Matrix gram_of(const Trajectory& traj, std::size_t upto) {
    const Index d = traj.state_dim() + traj.input_dim();
    Matrix u = Matrix::Zero(d, d);
    for (std::size_t t = 0; t < upto; ++t) {
        const Vector xi = traj.regressor(t);
        u += xi * xi.transpose();
    }
    return u;
}

}  // namespace

TEST(MlBatch, NoiseFreeRecoversModel) {
    const SystemModel noiseless = SystemModel::with_psd_noise(hagen().a(), hagen().b(), Matrix::Zero(2, 2));
    const Trajectory traj = random_run(noiseless, 10, 3);
    const MlEstimate est = ml_batch(traj);
    EXPECT_LT((est.a - noiseless.a()).norm(), 1e-10);
    EXPECT_LT((est.b - noiseless.b()).norm(), 1e-10);
    EXPECT_LT(est.sigma.norm(), 1e-10);
}

TEST(MlBatch, RankDeficientSingleSample) {
    Trajectory traj;
    traj.states = {(Vector(1) << 1.0).finished(), (Vector(1) << 0.5).finished()};
    traj.inputs = {Vector::Zero(1)};
    const MlEstimate est = ml_batch(traj);
    // Minimum-norm solution: all weight on the excited regressor.
    EXPECT_NEAR(est.a(0, 0), 0.5, 1e-14);
    EXPECT_NEAR(est.b(0, 0), 0.0, 1e-14);
    EXPECT_TRUE(est.sigma.allFinite());
}

TEST(MlBatch, NormalEquations) {
    const Trajectory traj = random_run(hagen(), 200, 4);
    const MlEstimate est = ml_batch(traj);
    Matrix v = Matrix::Zero(3, 2);
    for (std::size_t t = 0; t < traj.horizon(); ++t) {
        v += traj.regressor(t) * traj.states[t + 1].transpose();
    }
    Matrix stacked(3, 2);
    stacked << est.a.transpose(), est.b.transpose();
    EXPECT_LT(rel_diff(gram_of(traj, traj.horizon()) * stacked, v), 1e-9);
}

TEST(MlBatch, ErrorShrinksWithHorizon) {
    const SystemModel m = hagen();
    Matrix ab(2, 3);
    ab << m.a(), m.b();
    std::vector<double> short_err;
    std::vector<double> long_err;
    for (std::uint64_t s = 0; s < 100; ++s) {
        const Trajectory traj = random_run(m, 10000, 1000 + s);
        for (auto [len, out] : {std::pair{std::size_t{100}, &short_err}, std::pair{std::size_t{10000}, &long_err}}) {
            const MlEstimate est = ml_batch(traj.prefix(len));
            Matrix hat(2, 3);
            hat << est.a, est.b;
            out->push_back((hat - ab).norm());
        }
    }
    EXPECT_LT(median(long_err), median(short_err));
}

TEST(SigmaHat, ZeroResidualsAndConsistency) {
    const SystemModel noiseless = SystemModel::with_psd_noise(hagen().a(), hagen().b(), Matrix::Zero(2, 2));
    const Trajectory clean = random_run(noiseless, 20, 5);
    EXPECT_LT(sigma_hat(noiseless.a(), noiseless.b(), clean).norm(), 1e-28);

    const SystemModel m = hagen();
    const Trajectory traj = random_run(m, 100000, 6);
    const Matrix s = sigma_hat(m.a(), m.b(), traj);
    EXPECT_LT((s - m.sigma()).norm() / m.sigma().norm(), 0.05);
    EXPECT_GE(min_eigenvalue(s), 0.0);
}

TEST(SigmaHat, DependsOnlyOnResiduals) {
    // Same noise draws under two different input policies give the same
    // residuals at the true model.
    const SystemModel m = hagen();
    const Trajectory a = simulate(m, RandomGaussian{scalar(1)}, 500, 12);
    const Trajectory b = simulate(m, LinearFeedback{(Matrix(1, 2) << 0.3, 0.1).finished()}, 500, 12);
    EXPECT_LT(rel_diff(sigma_hat(m.a(), m.b(), a), sigma_hat(m.a(), m.b(), b)), 1e-12);
}

TEST(NegLoglik, IdentitySigmaAndPositivity) {
    const SystemModel m = hagen();
    const Trajectory traj = random_run(m, 50, 7);
    EXPECT_NEAR(neg_loglik(m.a(), m.b(), Matrix::Identity(2, 2), traj), sigma_hat(m.a(), m.b(), traj).trace(), 1e-14);
    EXPECT_THROW(neg_loglik(m.a(), m.b(), Matrix::Zero(2, 2), traj), PositivityError);
}

TEST(NegLoglik, StationaryAndOptimalAtEstimate) {
    const SystemModel m = hagen();
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Trajectory traj = random_run(m, 2000, 70 + seed);
        const MlEstimate est = ml_batch(traj);
        EXPECT_LE(neg_loglik(est.a, est.b, est.sigma, traj), neg_loglik(m.a(), m.b(), m.sigma(), traj));

        const double scale = std::abs(neg_loglik(est.a, est.b, est.sigma, traj));
        const auto f = [&](const Matrix& a, const Matrix& b, const Matrix& s) { return neg_loglik(a, b, s, traj); };
        const double h = 1e-6;
        for (Index i = 0; i < 4; ++i) {
            Matrix ap = est.a;
            Matrix am = est.a;
            ap.data()[i] += h;
            am.data()[i] -= h;
            EXPECT_LE(std::abs(f(ap, est.b, est.sigma) - f(am, est.b, est.sigma)) / (2 * h), 1e-5 * scale);
        }
        for (Index i = 0; i < 2; ++i) {
            Matrix bp = est.b;
            Matrix bm = est.b;
            bp.data()[i] += h;
            bm.data()[i] -= h;
            EXPECT_LE(std::abs(f(est.a, bp, est.sigma) - f(est.a, bm, est.sigma)) / (2 * h), 1e-5 * scale);
        }
        const double hs = 1e-6 * est.sigma.norm();
        for (Index i = 0; i < 2; ++i) {
            for (Index j = i; j < 2; ++j) {
                Matrix sp = est.sigma;
                Matrix sm = est.sigma;
                sp(i, j) += hs;
                sm(i, j) -= hs;
                if (i != j) {
                    sp(j, i) += hs;
                    sm(j, i) -= hs;
                }
                const double grad = std::abs(f(est.a, est.b, sp) - f(est.a, est.b, sm)) / (2 * hs);
                EXPECT_LE(grad * est.sigma.norm(), 1e-5 * scale);
            }
        }
    }
}

TEST(RlsInit, ScalarSystemTauTwo) {
    const SystemModel m(scalar(0.7), scalar(1), scalar(0.1));
    const Trajectory traj = random_run(m, 50, 8);
    EXPECT_EQ(rls_init(traj).tau, 2u);
}

TEST(RlsInit, TestSystemTauThreeAndBatchEquality) {
    const Trajectory traj = simulate(hagen(), RandomGaussian{scalar(1)}, 100, 9);
    const RlsState s = rls_init(traj);
    EXPECT_EQ(s.tau, 3u);
    for (std::size_t t = 1; t < s.tau; ++t) {
        EXPECT_FALSE(gram_nonsingular(gram_of(traj, t)));
    }
    const MlEstimate batch = ml_batch(traj.prefix(s.tau));
    EXPECT_LT(rel_diff(s.a_hat(), batch.a), 1e-8);
    EXPECT_LT(rel_diff(s.b_hat(), batch.b), 1e-8);
}

TEST(RlsInit, InsufficientExcitation) {
    const Trajectory traj = simulate(hagen(), RandomGaussian{scalar(0)}, 1, 1);
    EXPECT_THROW(rls_init(traj), InsufficientExcitationError);
}

TEST(RlsUpdate, ZeroRegressorLeavesStateUnchanged) {
    const Trajectory traj = random_run(hagen(), 20, 10);
    RlsState s = rls_init(traj);
    const RlsState before = s;
    rls_update(s, Vector::Zero(3), (Vector(2) << 5.0, -3.0).finished());
    EXPECT_EQ(s.estimate, before.estimate);
    EXPECT_EQ(s.m, before.m);
}

TEST(RlsUpdate, MatchesBatchAndInverseGram) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Trajectory traj = random_run(hagen(), 400, 200 + seed);
        RlsState s = rls_init(traj);
        for (std::size_t t = s.tau; t < traj.horizon(); ++t) {
            rls_update(s, traj.regressor(t), traj.states[t + 1]);
            if ((t + 1) % 50 == 0) {
                const MlEstimate batch = ml_batch(traj.prefix(t + 1));
                EXPECT_LT(rel_diff(s.a_hat(), batch.a), 1e-8);
                EXPECT_LT(rel_diff(s.b_hat(), batch.b), 1e-8);
                EXPECT_LT(rel_diff(s.m, gram_of(traj, t + 1).inverse()), 1e-8);
            }
        }
        EXPECT_EQ(s.t, traj.horizon());
    }
}

TEST(RlsUpdate, RejectsNonFinite) {
    const Trajectory traj = random_run(hagen(), 20, 11);
    RlsState s = rls_init(traj);
    EXPECT_THROW(rls_update(s, Vector::Constant(3, std::nan("")), Vector::Zero(2)), NumericError);
    EXPECT_THROW(rls_update(s, Vector::Zero(2), Vector::Zero(2)), DimensionError);
}

TEST(SysIdLqgEstimatorType, TracksRiccatiOnEstimates) {
    const Preset p = preset("hagen1998");
    SysIdLqgEstimator est(p.cost, 2, 1);
    EXPECT_FALSE(est.ready());
    EXPECT_FALSE(est.gain_hat().has_value());
    Rng rng(12);
    Matrix p_manual = p.cost.q();
    run_closed_loop(p.system, RandomGaussian{scalar(1)}, 500, rng, [&](const Vector& x, const Vector& u, const Vector& xn) {
        est.observe(x, u, xn);
        if (est.ready()) {
            const RlsState& s = *est.rls();
            p_manual = dare_iterate(p_manual, s.a_hat(), s.b_hat(), p.cost);
        }
    });
    ASSERT_TRUE(est.ready());
    EXPECT_EQ(est.rls()->tau, 3u);
    EXPECT_LT(rel_diff(est.p_hat(), p_manual), 1e-12);
    const RlsState& s = *est.rls();
    EXPECT_LT(rel_diff(*est.gain_hat(), gain(est.p_hat(), s.a_hat(), s.b_hat(), p.cost)), 1e-12);
}
