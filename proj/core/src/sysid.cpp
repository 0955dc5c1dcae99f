#include "sflqg/sysid.hpp"

#include "sflqg/errors.hpp"
#include "sflqg/matops.hpp"

#include <cmath>
#include <string>

namespace sflqg {

namespace {

void require_transitions(const Trajectory& traj, const char* what) {
    if (traj.horizon() < 1 || traj.states.size() != traj.horizon() + 1) {
        throw DimensionError(std::string(what) + ": trajectory needs at least one transition");
    }
}

Vector stacked(const Vector& x, const Vector& u) {
    Vector xi(x.size() + u.size());
    xi << x, u;
    return xi;
}

}  // namespace

MlEstimate ml_batch(const Trajectory& traj) {
    require_transitions(traj, "ml_batch");
    const Index n = traj.state_dim();
    const Index d = n + traj.input_dim();
    Matrix gram = Matrix::Zero(d, d);
    Matrix cross = Matrix::Zero(d, n);
    for (std::size_t t = 0; t < traj.horizon(); ++t) {
        const Vector xi = traj.regressor(t);
        gram.noalias() += xi * xi.transpose();
        cross.noalias() += xi * traj.states[t + 1].transpose();
    }
    const Matrix est = pinv_symmetric(gram) * cross;
    MlEstimate out;
    out.a = est.topRows(n).transpose();
    out.b = est.bottomRows(d - n).transpose();
    out.sigma = sigma_hat(out.a, out.b, traj);
    return out;
}

Matrix sigma_hat(const Matrix& a, const Matrix& b, const Trajectory& traj) {
    require_transitions(traj, "sigma_hat");
    const Index n = traj.state_dim();
    if (a.rows() != n || a.cols() != n || b.rows() != n || b.cols() != traj.input_dim()) {
        throw DimensionError("sigma_hat: model does not match trajectory dimensions");
    }
    Matrix w = Matrix::Zero(n, n);
    for (std::size_t t = 0; t < traj.horizon(); ++t) {
        const Vector zeta = traj.states[t + 1] - a * traj.states[t] - b * traj.inputs[t];
        w.noalias() += zeta * zeta.transpose();
    }
    w /= static_cast<double>(traj.horizon());
    return 0.5 * (w + w.transpose());
}

double neg_loglik(const Matrix& a, const Matrix& b, const Matrix& sigma, const Trajectory& traj) {
    require_positive_definite(sigma, "neg_loglik: Sigma");
    const Matrix w = sigma_hat(a, b, traj);
    const Eigen::LLT<Matrix> llt(0.5 * (sigma + sigma.transpose()));
    const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    return log_det + llt.solve(w).trace();
}

RlsState rls_init(const Trajectory& prefix) {
    require_transitions(prefix, "rls_init");
    const Index n = prefix.state_dim();
    const Index d = n + prefix.input_dim();
    Matrix gram = Matrix::Zero(d, d);
    Matrix cross = Matrix::Zero(d, n);
    for (std::size_t t = 0; t < prefix.horizon(); ++t) {
        const Vector xi = prefix.regressor(t);
        gram.noalias() += xi * xi.transpose();
        cross.noalias() += xi * prefix.states[t + 1].transpose();
        if (gram_nonsingular(gram)) {
            RlsState s;
            s.m = gram.inverse();
            s.m = 0.5 * (s.m + s.m.transpose());
            s.estimate = s.m * cross;
            s.tau = t + 1;
            s.t = t + 1;
            return s;
        }
    }
    throw InsufficientExcitationError("rls_init: Gram matrix still singular after " +
                                      std::to_string(prefix.horizon()) + " transitions");
}

void rls_update(RlsState& state, const Vector& xi, const Vector& x_next, MulCounter* counter) {
    const Index d = state.m.rows();
    const Index n = state.state_dim();
    if (xi.size() != d || x_next.size() != n) {
        throw DimensionError("rls_update: dimension mismatch");
    }
    if (!xi.allFinite() || !x_next.allFinite()) {
        throw NumericError("rls_update: non-finite data");
    }
    const auto du = static_cast<std::uint64_t>(d);
    const auto nu = static_cast<std::uint64_t>(n);

    // M xi, then eta = M xi / (1 + xi' M xi).
    const Vector mxi = state.m * xi;
    const double denom = 1.0 + xi.dot(mxi);
    const Vector eta = mxi / denom;
    tally(counter, du * du + du + du);

    // M <- M - eta (M xi)'  (M symmetric, so xi' M == (M xi)')
    state.m.noalias() -= eta * mxi.transpose();
    tally(counter, du * du);

    // estimate <- estimate + eta (x_next' - xi' estimate)
    const Vector innovation = x_next - state.estimate.transpose() * xi;
    state.estimate.noalias() += eta * innovation.transpose();
    tally(counter, du * nu + du * nu);
    ++state.t;
}

SysIdLqgEstimator::SysIdLqgEstimator(const CostSpec& cost, Index state_dim, Index input_dim)
    : cost_(cost), n_(state_dim), m_(input_dim) {
    if (cost.state_dim() != n_ || cost.input_dim() != m_) {
        throw DimensionError("SysIdLqgEstimator: cost weights do not match dimensions");
    }
    gram_ = Matrix::Zero(n_ + m_, n_ + m_);
    cross_ = Matrix::Zero(n_ + m_, n_);
    p_ = cost.q();
}

void SysIdLqgEstimator::observe(const Vector& x, const Vector& u, const Vector& x_next, MulCounter* counter) {
    const Vector xi = stacked(x, u);
    ++samples_;
    if (!rls_) {
        gram_.noalias() += xi * xi.transpose();
        cross_.noalias() += xi * x_next.transpose();
        if (!gram_nonsingular(gram_)) {
            return;
        }
        RlsState s;
        s.m = gram_.inverse();
        s.m = 0.5 * (s.m + s.m.transpose());
        s.estimate = s.m * cross_;
        s.tau = samples_;
        s.t = samples_;
        rls_ = std::move(s);
    } else {
        rls_update(*rls_, xi, x_next, counter);
    }
    const Matrix a = rls_->a_hat();
    const Matrix b = rls_->b_hat();
    p_ = dare_iterate(p_, a, b, cost_, counter);
    gain_ = gain(p_, a, b, cost_, counter);
}

std::optional<Matrix> SysIdLqgEstimator::gain_hat() const {
    if (!rls_) {
        return std::nullopt;
    }
    return gain_;
}

}  // namespace sflqg
