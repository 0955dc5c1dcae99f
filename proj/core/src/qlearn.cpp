#include "sflqg/qlearn.hpp"

#include "kernels.hpp"
#include "sflqg/errors.hpp"

#include <string>

namespace sflqg {

using detail::counted_product;

namespace {

void check_split(const Matrix& lambda, Index state_dim) {
    if (lambda.rows() != lambda.cols() || state_dim < 1 || state_dim >= lambda.rows()) {
        throw DimensionError("Lambda must be square with a non-empty input block");
    }
}

Vector stacked_xi(const Vector& x, const Vector& u) {
    Vector xi(x.size() + u.size());
    xi << x, u;
    return xi;
}

double stage_cost(const Vector& xi, const CostSpec& cost, MulCounter* counter) {
    const Index n = cost.state_dim();
    const Index m = cost.input_dim();
    const auto x = xi.head(n);
    const auto u = xi.tail(m);
    tally(counter, static_cast<std::uint64_t>(n * n + n + m * m + m));
    return x.dot(cost.q() * x) + u.dot(cost.r() * u);
}

// Accumulated sums over the first transitions of a trajectory.
struct Sums {
    Matrix gram;
    Vector stage;
    Matrix next;
};

Sums accumulate(const Trajectory& traj, std::size_t upto, const CostSpec& cost) {
    const Index n = cost.state_dim();
    const Index d = ql_dim(n, cost.input_dim());
    Sums s{Matrix::Zero(d, d), Vector::Zero(d), Matrix::Zero(d, tri_size(n))};
    for (std::size_t t = 0; t < upto; ++t) {
        const Vector xi = traj.regressor(t);
        const Vector phi = feature(xi);
        s.gram.noalias() += phi * phi.transpose();
        s.stage += phi * stage_cost(xi, cost, nullptr);
        s.next.noalias() += cost.gamma() * phi * tri_kron_self(traj.states[t + 1]).transpose();
    }
    return s;
}

void check_traj(const Trajectory& traj, const CostSpec& cost) {
    if (traj.horizon() < 1 || traj.state_dim() != cost.state_dim() || traj.input_dim() != cost.input_dim()) {
        throw DimensionError("trajectory does not match the cost dimensions");
    }
}

}  // namespace

Vector Theta::stacked() const {
    Vector v(lambda.size() + 1);
    v << lambda.data, eta;
    return v;
}

Theta Theta::from_stacked(const Vector& v) {
    if (v.size() < 2) {
        throw DimensionError("theta must hold Lambda and eta");
    }
    return Theta{SymVec::from_data(v.head(v.size() - 1)), v(v.size() - 1)};
}

Theta Theta::from_lambda(const Matrix& lambda, double eta) { return Theta{sym_vec(lambda), eta}; }

Matrix lambda_from_model(const Matrix& p, const Matrix& a, const Matrix& b, const CostSpec& cost) {
    const Index n = a.rows();
    const Index m = b.cols();
    if (p.rows() != n || p.cols() != n || a.cols() != n || b.rows() != n || cost.state_dim() != n ||
        cost.input_dim() != m) {
        throw DimensionError("lambda_from_model: dimension mismatch");
    }
    Matrix ab(n, n + m);
    ab << a, b;
    Matrix lambda = cost.gamma() * ab.transpose() * p * ab + cost.stage_weight();
    return 0.5 * (lambda + lambda.transpose());
}

Matrix gain_from_lambda(const Matrix& lambda, Index state_dim, MulCounter* counter) {
    check_split(lambda, state_dim);
    const Index m = lambda.rows() - state_dim;
    const Matrix l22 = lambda.bottomRightCorner(m, m);
    require_positive_definite(l22, "Lambda22");
    const GaussResult solved = gauss_solve(l22, lambda.bottomLeftCorner(m, state_dim));
    tally(counter, solved.multiplies);
    return solved.x;
}

Matrix p_from_lambda(const Matrix& lambda, Index state_dim, MulCounter* counter) {
    const Matrix l = gain_from_lambda(lambda, state_dim, counter);
    const Matrix p = lambda.topLeftCorner(state_dim, state_dim) -
                     counted_product(lambda.topRightCorner(state_dim, lambda.rows() - state_dim), l, counter);
    return 0.5 * (p + p.transpose());
}

bool lambda_usable(const Matrix& lambda, Index state_dim) {
    check_split(lambda, state_dim);
    if (!lambda.allFinite()) {
        return false;
    }
    const Index m = lambda.rows() - state_dim;
    const Matrix l22 = 0.5 * (lambda.bottomRightCorner(m, m) + lambda.bottomRightCorner(m, m).transpose());
    if (!is_positive_definite(l22, kGuardFloor)) {
        return false;
    }
    const Matrix lsym = 0.5 * (lambda + lambda.transpose());
    return is_positive_definite(p_from_lambda(lsym, state_dim), kGuardFloor);
}

Vector feature(const Vector& xi, MulCounter* counter) {
    const Vector tk = tri_kron_self(xi, counter);
    Vector phi(tk.size() + 1);
    phi << tk, 1.0;
    return phi;
}

double regression_target(const Vector& xi, const Vector& x_next, const Matrix& p, const CostSpec& cost) {
    if (xi.size() != cost.state_dim() + cost.input_dim() || x_next.size() != cost.state_dim() ||
        p.rows() != cost.state_dim() || p.cols() != cost.state_dim()) {
        throw DimensionError("regression_target: dimension mismatch");
    }
    return stage_cost(xi, cost, nullptr) + cost.gamma() * x_next.dot(p * x_next);
}

Theta ql_offline_iterate(const Trajectory& traj, const Matrix& p, const CostSpec& cost) {
    check_traj(traj, cost);
    const Sums s = accumulate(traj, traj.horizon(), cost);
    if (!gram_nonsingular(s.gram)) {
        throw InsufficientExcitationError("ql_offline_iterate: feature Gram matrix is singular");
    }
    const Vector rhs = s.stage + s.next * sym_vec(p).data;
    return Theta::from_stacked(s.gram.ldlt().solve(rhs));
}

Theta ql_offline_iterate(const Trajectory& traj, const Theta& theta_k, const CostSpec& cost) {
    return ql_offline_iterate(traj, p_from_lambda(theta_k.lambda_matrix(), cost.state_dim()), cost);
}

Theta default_theta0(const CostSpec& cost) { return Theta::from_lambda(cost.stage_weight(), 0.0); }

QlState ql_init(const Trajectory& prefix, const Theta& theta0, const CostSpec& cost) {
    check_traj(prefix, cost);
    const Index n = cost.state_dim();
    const Matrix lambda0 = theta0.lambda_matrix();
    if (lambda0.rows() != n + cost.input_dim()) {
        throw DimensionError("ql_init: theta0 has the wrong dimension");
    }
    if (!lambda_usable(lambda0, n)) {
        throw PositivityError("ql_init: theta0 does not give a positive definite P(Lambda)");
    }
    const Index d = ql_dim(n, cost.input_dim());
    Matrix gram = Matrix::Zero(d, d);
    Vector stage = Vector::Zero(d);
    Matrix next = Matrix::Zero(d, tri_size(n));
    for (std::size_t t = 0; t < prefix.horizon(); ++t) {
        const Vector xi = prefix.regressor(t);
        const Vector phi = feature(xi);
        gram.noalias() += phi * phi.transpose();
        stage += phi * stage_cost(xi, cost, nullptr);
        next.noalias() += cost.gamma() * phi * tri_kron_self(prefix.states[t + 1]).transpose();
        if (!gram_nonsingular(gram)) {
            continue;
        }
        QlState s;
        s.m = gram.inverse();
        s.m = 0.5 * (s.m + s.m.transpose());
        s.vartheta = s.m * stage;
        s.big_theta = s.m * next;
        s.p_used = p_from_lambda(lambda0, n);
        s.theta = s.vartheta + s.big_theta * sym_vec(s.p_used).data;
        s.tau = t + 1;
        s.t = t + 1;
        s.state_dim = n;
        s.input_dim = cost.input_dim();
        return s;
    }
    throw InsufficientExcitationError("ql_init: feature Gram matrix still singular after " +
                                      std::to_string(prefix.horizon()) + " transitions");
}

void ql_update(QlState& state, const Vector& xi, const Vector& x_next, const CostSpec& cost, MulCounter* counter) {
    const Index n = state.state_dim;
    if (xi.size() != n + state.input_dim || x_next.size() != n) {
        throw DimensionError("ql_update: dimension mismatch");
    }
    if (!xi.allFinite() || !x_next.allFinite()) {
        throw NumericError("ql_update: non-finite data");
    }
    const Index d = state.m.rows();
    const auto du = static_cast<std::uint64_t>(d);
    const auto cols = static_cast<std::uint64_t>(tri_size(n));

    const Vector phi = feature(xi, counter);
    const double stage = stage_cost(xi, cost, counter);
    Vector next_kron = tri_kron_self(x_next, counter);
    next_kron *= cost.gamma();
    tally(counter, cols);

    // eta = M phi / (1 + phi' M phi); M <- M - eta (M phi)'
    const Vector mphi = state.m * phi;
    const double denom = 1.0 + phi.dot(mphi);
    const Vector eta = mphi / denom;
    state.m.noalias() -= eta * mphi.transpose();
    tally(counter, du * du + du + du + du * du);

    // vartheta <- vartheta + eta (stage - phi' vartheta)
    state.vartheta += eta * (stage - phi.dot(state.vartheta));
    tally(counter, du + du);

    // Theta <- Theta + eta (g x_next (x) x_next - phi' Theta)
    const Vector innovation = next_kron - state.big_theta.transpose() * phi;
    state.big_theta.noalias() += eta * innovation.transpose();
    tally(counter, du * cols + du * cols);

    // Guard: only move to P(Lambda_{T-1}) when it is usable.
    const Matrix lambda_prev = sym_unvec(state.theta.head(d - 1));
    if (lambda_usable(lambda_prev, n)) {
        state.p_used = p_from_lambda(lambda_prev, n, counter);
    }
    state.theta = state.vartheta + state.big_theta * sym_vec(state.p_used).data;
    tally(counter, du * cols);
    if (!state.theta.allFinite()) {
        throw NumericError("ql_update: theta became non-finite");
    }
    ++state.t;
}

Matrix ql_p_hat(const QlState& state) {
    const Matrix lambda = sym_unvec(state.theta.head(state.theta.size() - 1));
    if (lambda_usable(lambda, state.state_dim)) {
        return p_from_lambda(lambda, state.state_dim);
    }
    return state.p_used;
}

std::optional<Matrix> ql_gain_hat(const QlState& state) {
    const Matrix lambda = sym_unvec(state.theta.head(state.theta.size() - 1));
    if (lambda_usable(lambda, state.state_dim)) {
        return gain_from_lambda(lambda, state.state_dim);
    }
    return std::nullopt;
}

QLearningEstimator::QLearningEstimator(const CostSpec& cost, Index state_dim, Index input_dim)
    : cost_(cost), n_(state_dim), m_(input_dim) {
    if (cost.state_dim() != n_ || cost.input_dim() != m_) {
        throw DimensionError("QLearningEstimator: cost weights do not match dimensions");
    }
    const Index d = ql_dim(n_, m_);
    gram_ = Matrix::Zero(d, d);
    stage_ = Vector::Zero(d);
    next_ = Matrix::Zero(d, tri_size(n_));
    p_hat_ = cost.q();
}

void QLearningEstimator::observe(const Vector& x, const Vector& u, const Vector& x_next, MulCounter* counter) {
    const Vector xi = stacked_xi(x, u);
    ++samples_;
    if (!state_) {
        const Vector phi = feature(xi);
        gram_.noalias() += phi * phi.transpose();
        stage_ += phi * stage_cost(xi, cost_, nullptr);
        next_.noalias() += cost_.gamma() * phi * tri_kron_self(x_next).transpose();
        if (!gram_nonsingular(gram_)) {
            return;
        }
        QlState s;
        s.m = gram_.inverse();
        s.m = 0.5 * (s.m + s.m.transpose());
        s.vartheta = s.m * stage_;
        s.big_theta = s.m * next_;
        s.p_used = cost_.q();
        s.theta = s.vartheta + s.big_theta * sym_vec(s.p_used).data;
        s.tau = samples_;
        s.t = samples_;
        s.state_dim = n_;
        s.input_dim = m_;
        state_ = std::move(s);
    } else {
        ql_update(*state_, xi, x_next, cost_, counter);
    }
    refresh(counter);
}

void QLearningEstimator::refresh(MulCounter* counter) {
    const Index d = state_->theta.size();
    const Matrix lambda = sym_unvec(state_->theta.head(d - 1));
    if (lambda_usable(lambda, n_)) {
        gain_ = gain_from_lambda(lambda, n_, counter);
        p_hat_ = p_from_lambda(lambda, n_);
    } else {
        p_hat_ = state_->p_used;
    }
}

}  // namespace sflqg
