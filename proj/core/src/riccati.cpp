#include "sflqg/riccati.hpp"

#include "kernels.hpp"
#include "sflqg/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace sflqg {

using detail::counted_product;
using detail::counted_scale;
using detail::counted_tproduct;

namespace {

void check_dims(const Matrix& a, const Matrix& b, const CostSpec& cost) {
    const Index n = a.rows();
    if (a.cols() != n || b.rows() != n) {
        throw DimensionError("A must be NxN and B must be NxM");
    }
    if (cost.state_dim() != n || cost.input_dim() != b.cols()) {
        throw DimensionError("cost weights do not match the system dimensions");
    }
}

// Riccati step without argument validation; shared by the solver and the
// online estimators.
Matrix dare_step(const Matrix& p, const Matrix& a, const Matrix& b, const CostSpec& cost, MulCounter* counter) {
    const double g = cost.gamma();
    const Matrix pa = counted_product(p, a, counter);
    const Matrix atpa = counted_tproduct(a, pa, counter);
    const Matrix pb = counted_product(p, b, counter);
    const Matrix btpb = counted_tproduct(b, pb, counter);
    const Matrix btpa = counted_tproduct(pb, a, counter);

    const Matrix inner = counted_scale(g, btpb, counter) + cost.r();
    const GaussResult solved = gauss_solve(inner, btpa);
    tally(counter, solved.multiplies);

    const Matrix correction = counted_tproduct(btpa, solved.x, counter);
    tally(counter, 1);  // g^2
    Matrix next = counted_scale(g, atpa, counter) + cost.q() - counted_scale(g * g, correction, counter);
    return 0.5 * (next + next.transpose());
}

}  // namespace

CostSpec::CostSpec(const Matrix& q, const Matrix& r, double gamma) : q_(q), r_(r), gamma_(gamma) {
    if (!(gamma > 0.0 && gamma <= 1.0)) {
        throw DomainError("discount factor must lie in (0, 1], got " + std::to_string(gamma));
    }
}

Matrix CostSpec::stage_weight() const {
    const Index n = state_dim();
    const Index m = input_dim();
    Matrix d = Matrix::Zero(n + m, n + m);
    d.topLeftCorner(n, n) = q();
    d.bottomRightCorner(m, m) = r();
    return d;
}

Matrix dare_iterate(const Matrix& p, const Matrix& a, const Matrix& b, const CostSpec& cost, MulCounter* counter) {
    check_dims(a, b, cost);
    if (p.rows() != a.rows() || p.cols() != a.rows()) {
        throw DimensionError("P must be NxN");
    }
    require_positive_definite(p, "dare_iterate: P_k");
    return dare_step(p, a, b, cost, counter);
}

double contraction_rate(const Matrix& a, const CostSpec& cost, const Matrix& p, double delta0) {
    const double q_inv_norm = 1.0 / min_eigenvalue(cost.q());
    const double a_norm = spectral_norm(a);
    const double scale = q_inv_norm * cost.gamma() * a_norm * a_norm * spectral_norm(p);
    if (scale == 0.0) {
        return 0.0;
    }
    return 1.0 / (1.0 + std::exp(-delta0) / scale);
}

DareSolution solve_dare(const Matrix& a, const Matrix& b, const CostSpec& cost, const Matrix& p0,
                        const DareOptions& opts) {
    check_dims(a, b, cost);
    if (p0.rows() != a.rows() || p0.cols() != a.rows()) {
        throw DimensionError("P0 must be NxN");
    }
    require_positive_definite(p0, "solve_dare: P0");

    DareSolution sol;
    Matrix p = 0.5 * (p0 + p0.transpose());
    if (opts.keep_trace) {
        sol.trace.push_back(p);
    }
    double step = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < opts.max_iter; ++k) {
        Matrix next = dare_step(p, a, b, cost, nullptr);
        if (!next.allFinite()) {
            throw NonConvergenceError("solve_dare: iterates diverged (is (A, B) stabilizable?)", step);
        }
        step = spectral_norm(next - p);
        p = std::move(next);
        if (opts.keep_trace) {
            sol.trace.push_back(p);
        }
        if (step <= opts.tol * std::max(1.0, spectral_norm(p))) {
            sol.iterations = k + 1;
            sol.p = p;
            sol.residual = spectral_norm(p - dare_step(p, a, b, cost, nullptr));
            sol.gain = gain(p, a, b, cost);
            sol.delta0 = thompson_distance(p, p0);
            sol.rho = contraction_rate(a, cost, p, sol.delta0);
            return sol;
        }
    }
    throw NonConvergenceError("solve_dare: no convergence within " + std::to_string(opts.max_iter) +
                                  " iterations (last step " + std::to_string(step) + ")",
                              step);
}

DareSolution solve_dare(const Matrix& a, const Matrix& b, const CostSpec& cost, const DareOptions& opts) {
    return solve_dare(a, b, cost, cost.q(), opts);
}

double certified_bound(const DareSolution& sol, std::size_t k) {
    const double shrink = std::pow(sol.rho, static_cast<double>(k));
    return std::expm1(shrink * sol.delta0) * spectral_norm(sol.p);
}

Matrix gain(const Matrix& p, const Matrix& a, const Matrix& b, const CostSpec& cost, MulCounter* counter) {
    check_dims(a, b, cost);
    const double g = cost.gamma();
    const Matrix pb = counted_product(p, b, counter);
    const Matrix btpb = counted_tproduct(b, pb, counter);
    const Matrix btpa = counted_tproduct(pb, a, counter);
    const Matrix inner = counted_scale(g, btpb, counter) + cost.r();
    const GaussResult solved = gauss_solve(inner, btpa);
    tally(counter, solved.multiplies);
    return counted_scale(g, solved.x, counter);
}

double optimal_cost(const Matrix& p, const Matrix& sigma, const Vector& x, double gamma) {
    if (gamma >= 1.0) {
        throw DomainError("optimal_cost: the undiscounted (gamma = 1) infinite-horizon cost is unbounded");
    }
    if (p.rows() != x.size() || sigma.rows() != p.rows()) {
        throw DimensionError("optimal_cost: dimension mismatch");
    }
    return x.dot(p * x) + gamma / (1.0 - gamma) * (sigma * p).trace();
}

}  // namespace sflqg
