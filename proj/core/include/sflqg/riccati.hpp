#pragma once

#include "sflqg/matops.hpp"
#include "sflqg/types.hpp"

#include <cstddef>
#include <vector>

namespace sflqg {

/// Quadratic cost weights and discount factor of the SF-LQG objective.
class CostSpec {
public:
    CostSpec() = default;

    /// Validates Q > 0, R > 0 and 0 < gamma <= 1.
    CostSpec(const Matrix& q, const Matrix& r, double gamma);

    const Matrix& q() const noexcept { return q_.matrix(); }
    const Matrix& r() const noexcept { return r_.matrix(); }
    double gamma() const noexcept { return gamma_; }
    Index state_dim() const noexcept { return q_.rows(); }
    Index input_dim() const noexcept { return r_.rows(); }

    /// blockdiag(Q, R)
    Matrix stage_weight() const;

private:
    PdMatrix q_;
    PdMatrix r_;
    double gamma_ = 1.0;
};

struct DareOptions {
    /// Stop when ||P_{k+1} - P_k||_2 <= tol * max(1, ||P_{k+1}||_2).
    double tol = 1e-14;
    std::size_t max_iter = 100'000;
    /// Keep every iterate P_0, P_1, ... in DareSolution::trace.
    bool keep_trace = false;
};

struct DareSolution {
    Matrix p;
    Matrix gain;
    std::size_t iterations = 0;
    /// Contraction rate certified for the iteration started at P_0.
    double rho = 0.0;
    /// Thompson distance between the solution and P_0.
    double delta0 = 0.0;
    /// ||P - dare_iterate(P)||_2 at the returned P.
    double residual = 0.0;
    std::vector<Matrix> trace;
};

/// One step of the discounted Riccati recursion
///   P+ = gA'PA + Q - g^2 A'PB (R + gB'PB)^{-1} B'PA,
/// i.e. the undiscounted step on (sqrt(g) A, sqrt(g) B). Throws
/// PositivityError if P is not PD.
Matrix dare_iterate(const Matrix& p, const Matrix& a, const Matrix& b, const CostSpec& cost,
                    MulCounter* counter = nullptr);

/// Fixed-point iteration from P0 until the residual criterion in `opts`
/// holds. Stabilizability of (A, B) is not checked up front; failure to
/// settle raises NonConvergenceError carrying the last step size.
DareSolution solve_dare(const Matrix& a, const Matrix& b, const CostSpec& cost, const Matrix& p0,
                        const DareOptions& opts = {});

/// Same, started at P0 = Q.
DareSolution solve_dare(const Matrix& a, const Matrix& b, const CostSpec& cost, const DareOptions& opts = {});

/// Certified error bound (e^{rho^k delta0} - 1) ||P||_2 on ||P - P_k||_2.
double certified_bound(const DareSolution& sol, std::size_t k);

/// rho = 1 / (1 + (||Q^{-1}|| g||A||^2 ||P||)^{-1} e^{-delta0}), all norms spectral.
double contraction_rate(const Matrix& a, const CostSpec& cost, const Matrix& p, double delta0);

/// State-feedback gain L = g (g B'PB + R)^{-1} B'PA; the control law is u = -Lx.
Matrix gain(const Matrix& p, const Matrix& a, const Matrix& b, const CostSpec& cost, MulCounter* counter = nullptr);

/// Optimal discounted cost x'Px + g/(1-g) Tr{Sigma P}. Throws DomainError
/// for gamma == 1.
double optimal_cost(const Matrix& p, const Matrix& sigma, const Vector& x, double gamma);

}  // namespace sflqg
