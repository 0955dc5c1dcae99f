#pragma once

#include "sflqg/matops.hpp"
#include "sflqg/riccati.hpp"
#include "sflqg/sim.hpp"
#include "sflqg/types.hpp"

#include <cstddef>
#include <optional>

// Q-learning estimator of the SF-LQG controller. The Q-function is the exact
// quadratic xi' Lambda xi + eta in xi = [x; u], fitted by least squares on
// the Bellman equation and solved online with rank-one updates.
namespace sflqg {

/// D = (N+M)(N+M+1)/2 + 1, the number of Q-function parameters.
constexpr Index ql_dim(Index n, Index m) noexcept { return tri_size(n + m) + 1; }

/// Stacked parameter [sym_vec(Lambda); eta].
struct Theta {
    SymVec lambda;
    double eta = 0.0;

    Vector stacked() const;
    Matrix lambda_matrix() const { return sym_unvec(lambda); }
    static Theta from_stacked(const Vector& v);
    static Theta from_lambda(const Matrix& lambda, double eta);
};

/// [[gA'PA + Q, gA'PB], [gB'PA, gB'PB + R]].
Matrix lambda_from_model(const Matrix& p, const Matrix& a, const Matrix& b, const CostSpec& cost);

/// L(Lambda) = Lambda22^{-1} Lambda21, where Lambda22 is the trailing block
/// after the first `state_dim` rows/columns. Throws PositivityError if
/// Lambda22 is not PD.
Matrix gain_from_lambda(const Matrix& lambda, Index state_dim, MulCounter* counter = nullptr);

/// P(Lambda) = Lambda11 - Lambda12 Lambda22^{-1} Lambda21. Throws
/// PositivityError if Lambda22 is not PD.
Matrix p_from_lambda(const Matrix& lambda, Index state_dim, MulCounter* counter = nullptr);

/// phi = [tri_kron(xi, xi); 1], so that phi' theta = xi' Lambda xi + eta.
Vector feature(const Vector& xi, MulCounter* counter = nullptr);

/// xi' blockdiag(Q, R) xi + g x_next' P x_next.
double regression_target(const Vector& xi, const Vector& x_next, const Matrix& p, const CostSpec& cost);

/// One least-squares fit at fixed horizon with targets built from P, i.e.
/// U_T^{-1} sum phi_t v_t. Throws InsufficientExcitationError if U_T fails
/// gram_nonsingular.
Theta ql_offline_iterate(const Trajectory& traj, const Matrix& p, const CostSpec& cost);

/// Same, with P = P(Lambda_k) taken from theta_k.
Theta ql_offline_iterate(const Trajectory& traj, const Theta& theta_k, const CostSpec& cost);

struct QlState {
    /// Current theta_T, stacked.
    Vector theta;
    /// Inverse Gram matrix (sum phi phi')^{-1}, D x D.
    Matrix m;
    /// Affine pieces: theta_T = vartheta + Theta * sym_vec(P).
    Vector vartheta;
    Matrix big_theta;
    /// The P used to form theta_T. Equals P(Lambda_{T-1}) whenever that
    /// matrix passed the guard, otherwise the last one that did.
    Matrix p_used;
    std::size_t tau = 0;
    std::size_t t = 0;
    Index state_dim = 0;
    Index input_dim = 0;
};

/// Relative floor of the positivity guard applied to Lambda22 and P(Lambda).
inline constexpr double kGuardFloor = 1e-10;

/// True when Lambda22 and P(Lambda) both clear kGuardFloor.
bool lambda_usable(const Matrix& lambda, Index state_dim);

/// Initializes at the smallest tau with nonsingular U_tau; theta_0 must pass
/// lambda_usable. Throws InsufficientExcitationError.
QlState ql_init(const Trajectory& prefix, const Theta& theta0, const CostSpec& cost);

/// theta0 = [sym_vec(blockdiag(Q, R)); 0], for which P(Lambda_0) = Q.
Theta default_theta0(const CostSpec& cost);

/// One recursive step with xi = [x_T; u_T] and the observed x_{T+1}.
void ql_update(QlState& state, const Vector& xi, const Vector& x_next, const CostSpec& cost,
               MulCounter* counter = nullptr);

/// Estimated P: P(Lambda_T) if usable, otherwise the held state.p_used.
Matrix ql_p_hat(const QlState& state);

/// L(Lambda_T) when Lambda_T is usable.
std::optional<Matrix> ql_gain_hat(const QlState& state);

/// Online Q-learning controller estimator.
class QLearningEstimator {
public:
    QLearningEstimator(const CostSpec& cost, Index state_dim, Index input_dim);

    void observe(const Vector& x, const Vector& u, const Vector& x_next, MulCounter* counter = nullptr);

    bool ready() const noexcept { return state_.has_value(); }
    std::size_t samples() const noexcept { return samples_; }
    /// P(Lambda_0) = Q until ready().
    const Matrix& p_hat() const noexcept { return p_hat_; }
    /// Last usable gain; nullopt before the first usable Lambda.
    const std::optional<Matrix>& gain_hat() const noexcept { return gain_; }
    const std::optional<QlState>& state() const noexcept { return state_; }

private:
    void refresh(MulCounter* counter);

    CostSpec cost_;
    Index n_;
    Index m_;
    Matrix gram_;
    Vector stage_;
    Matrix next_;
    std::optional<QlState> state_;
    Matrix p_hat_;
    std::optional<Matrix> gain_;
    std::size_t samples_ = 0;
};

}  // namespace sflqg
