#pragma once

#include "sflqg/riccati.hpp"
#include "sflqg/sim.hpp"
#include "sflqg/types.hpp"

#include <cstddef>
#include <optional>

// Maximum-likelihood identification of (A, B, Sigma) from one trajectory,
// in batch normal-equation form and as recursive least squares, plus the
// online "identify then design" controller estimator built on it.
namespace sflqg {

struct MlEstimate {
    Matrix a;
    Matrix b;
    Matrix sigma;
};

/// [A B]' = pinv(U_T) V_T with U_T = sum xi xi', V_T = sum xi x_next', and
/// Sigma = W_T(A, B). Rank-deficient data yields the minimum-norm solution.
MlEstimate ml_batch(const Trajectory& traj);

/// W_T(A, B) = (1/T) sum zeta zeta', zeta = x_{t+1} - A x_t - B u_t.
Matrix sigma_hat(const Matrix& a, const Matrix& b, const Trajectory& traj);

/// log det Sigma + Tr{Sigma^{-1} W_T(A, B)}. Additive constants and the 1/T
/// scaling of the log-likelihood are dropped. Throws PositivityError unless
/// Sigma is PD.
double neg_loglik(const Matrix& a, const Matrix& b, const Matrix& sigma, const Trajectory& traj);

struct RlsState {
    /// (N+M) x N, the stacked [A B]'.
    Matrix estimate;
    /// Inverse Gram matrix (sum xi xi')^{-1}.
    Matrix m;
    /// Number of transitions used by rls_init.
    std::size_t tau = 0;
    /// Transitions consumed so far.
    std::size_t t = 0;

    Index state_dim() const noexcept { return estimate.cols(); }
    Matrix a_hat() const { return estimate.topRows(state_dim()).transpose(); }
    Matrix b_hat() const { return estimate.bottomRows(estimate.rows() - state_dim()).transpose(); }
};

/// Starts the recursion at the smallest tau whose Gram matrix passes
/// gram_nonsingular. Throws InsufficientExcitationError if the prefix never
/// gets there.
RlsState rls_init(const Trajectory& prefix);

/// Rank-one update with xi = [x_t; u_t] and the observed x_{t+1}. Throws
/// NumericError on non-finite data.
void rls_update(RlsState& state, const Vector& xi, const Vector& x_next, MulCounter* counter = nullptr);

/// SysId+LQG run online: RLS estimates of (A, B) and one Riccati step per
/// sample on the current estimates, starting from P = Q.
class SysIdLqgEstimator {
public:
    SysIdLqgEstimator(const CostSpec& cost, Index state_dim, Index input_dim);

    /// Consumes one transition. Before the Gram matrix becomes nonsingular the
    /// data is only accumulated.
    void observe(const Vector& x, const Vector& u, const Vector& x_next, MulCounter* counter = nullptr);

    bool ready() const noexcept { return rls_.has_value(); }
    std::size_t samples() const noexcept { return samples_; }
    const Matrix& p_hat() const noexcept { return p_; }
    /// Current gain estimate; nullopt until ready().
    std::optional<Matrix> gain_hat() const;
    const std::optional<RlsState>& rls() const noexcept { return rls_; }

private:
    CostSpec cost_;
    Index n_;
    Index m_;
    Matrix gram_;
    Matrix cross_;
    std::optional<RlsState> rls_;
    Matrix p_;
    Matrix gain_;
    std::size_t samples_ = 0;
};

}  // namespace sflqg
