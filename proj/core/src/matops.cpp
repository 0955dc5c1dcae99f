#include "sflqg/matops.hpp"

#include "sflqg/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <string>

namespace sflqg {

namespace {

Index triangular_root(Index len) {
    // n(n+1)/2 == len
    const auto n = static_cast<Index>(std::llround((std::sqrt(8.0 * static_cast<double>(len) + 1.0) - 1.0) / 2.0));
    if (n < 0 || tri_size(n) != len) {
        throw DimensionError("length " + std::to_string(len) + " is not a triangular number");
    }
    return n;
}

void require_square(const Matrix& m, const char* what) {
    if (m.rows() != m.cols()) {
        throw DimensionError(std::string(what) + " must be square, got " + std::to_string(m.rows()) + "x" +
                             std::to_string(m.cols()));
    }
}

}  // namespace

SymVec SymVec::from_data(Vector data) {
    const Index n = triangular_root(data.size());
    return SymVec{std::move(data), n};
}

bool is_symmetric(const Matrix& x, double rel_tol) {
    if (x.rows() != x.cols()) {
        return false;
    }
    const double scale = x.norm();
    return (x - x.transpose()).norm() <= rel_tol * scale;
}

Matrix symmetrized(const Matrix& x, double rel_tol) {
    require_square(x, "symmetric matrix");
    if (!is_symmetric(x, rel_tol)) {
        throw SymmetryError("matrix is not symmetric within relative tolerance");
    }
    return 0.5 * (x + x.transpose());
}

SymVec sym_vec(const Matrix& x) {
    const Matrix s = symmetrized(x);
    const Index n = s.rows();
    if (n < 1) {
        throw DimensionError("sym_vec of an empty matrix");
    }
    Vector out(tri_size(n));
    Index k = 0;
    for (Index col = 0; col < n; ++col) {
        for (Index row = 0; row <= col; ++row) {
            out(k++) = s(row, col);
        }
    }
    return SymVec{std::move(out), n};
}

Matrix sym_unvec(const SymVec& v) {
    if (v.data.size() != tri_size(v.dim)) {
        throw DimensionError("SymVec length does not match its dimension");
    }
    Matrix out(v.dim, v.dim);
    Index k = 0;
    for (Index col = 0; col < v.dim; ++col) {
        for (Index row = 0; row <= col; ++row) {
            out(row, col) = v.data(k);
            out(col, row) = v.data(k);
            ++k;
        }
    }
    return out;
}

Matrix sym_unvec(const Vector& v) { return sym_unvec(SymVec::from_data(v)); }

Vector tri_kron(const Vector& a, const Vector& b, MulCounter* counter) {
    if (a.size() != b.size()) {
        throw DimensionError("tri_kron operands differ in length");
    }
    const Index n = a.size();
    Vector out(tri_size(n));
    Index k = 0;
    for (Index col = 0; col < n; ++col) {
        for (Index row = 0; row < col; ++row) {
            out(k++) = a(row) * b(col) + a(col) * b(row);
        }
        out(k++) = a(col) * b(col);
    }
    tally(counter, static_cast<std::uint64_t>(n * n));
    return out;
}

Vector tri_kron_self(const Vector& a, MulCounter* counter) {
    const Index n = a.size();
    Vector out(tri_size(n));
    Index k = 0;
    for (Index col = 0; col < n; ++col) {
        for (Index row = 0; row < col; ++row) {
            const double p = a(row) * a(col);
            out(k++) = p + p;
        }
        out(k++) = a(col) * a(col);
    }
    tally(counter, static_cast<std::uint64_t>(tri_size(n)));
    return out;
}

double min_eigenvalue(const Matrix& sym) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

double max_eigenvalue(const Matrix& sym) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
    return es.eigenvalues()(es.eigenvalues().size() - 1);
}

bool is_positive_definite(const Matrix& sym, double rel_floor) {
    if (sym.rows() != sym.cols() || sym.rows() == 0 || !sym.allFinite() || !is_symmetric(sym)) {
        return false;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (sym + sym.transpose()), Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    const double hi = std::max(ev(ev.size() - 1), 0.0);
    return ev(0) > rel_floor * hi && ev(0) > 0.0;
}

void require_positive_definite(const Matrix& sym, const char* what) {
    if (sym.rows() != sym.cols()) {
        throw DimensionError(std::string(what) + " must be square");
    }
    if (!is_symmetric(sym)) {
        throw SymmetryError(std::string(what) + " is not symmetric");
    }
    if (!is_positive_definite(sym)) {
        throw PositivityError(std::string(what) + " is not positive definite");
    }
}

double spectral_norm(const Matrix& m) {
    if (m.size() == 0) {
        return 0.0;
    }
    Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues()(0);
}

Matrix sym_sqrt(const Matrix& psd) {
    const Matrix s = symmetrized(psd);
    Eigen::SelfAdjointEigenSolver<Matrix> es(s);
    const Vector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

double thompson_distance(const Matrix& p, const Matrix& q) {
    if (p.rows() != q.rows() || p.cols() != q.cols()) {
        throw DimensionError("thompson_distance operands differ in size");
    }
    require_positive_definite(p, "thompson_distance: P");
    require_positive_definite(q, "thompson_distance: Q");

    Eigen::SelfAdjointEigenSolver<Matrix> eq(symmetrized(q));
    const Vector inv_root = eq.eigenvalues().cwiseSqrt().cwiseInverse();
    const Matrix q_inv_half = eq.eigenvectors() * inv_root.asDiagonal() * eq.eigenvectors().transpose();
    const Matrix sandwich = q_inv_half * symmetrized(p) * q_inv_half;

    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (sandwich + sandwich.transpose()), Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    if (ev(0) <= kEigenFloor * std::max(ev(ev.size() - 1), 1.0)) {
        throw PositivityError("thompson_distance: congruence lost positivity");
    }
    double acc = 0.0;
    for (Index i = 0; i < ev.size(); ++i) {
        const double l = std::log(ev(i));
        acc += l * l;
    }
    return std::sqrt(acc);
}

bool gram_nonsingular(const Matrix& gram) {
    if (gram.rows() == 0 || !gram.allFinite()) {
        return false;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (gram + gram.transpose()), Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    return ev(ev.size() - 1) > 0.0 && ev(0) > kGramFloor * ev(ev.size() - 1);
}

Matrix pinv_symmetric(const Matrix& sym, double rel_cutoff) {
    require_square(sym, "pinv_symmetric");
    if (sym.rows() == 0) {
        return sym;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (sym + sym.transpose()));
    const Vector& ev = es.eigenvalues();
    const double cutoff = rel_cutoff * ev.cwiseAbs().maxCoeff();
    Vector inv(ev.size());
    for (Index i = 0; i < ev.size(); ++i) {
        inv(i) = std::abs(ev(i)) > cutoff ? 1.0 / ev(i) : 0.0;
    }
    return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

PdMatrix::PdMatrix(const Matrix& m) : m_(symmetrized(m)) {
    if (!is_positive_definite(m_)) {
        throw PositivityError("matrix is not positive definite");
    }
}

double gauss_closed_form(Index n) {
    const double x = static_cast<double>(n);
    return (4.0 * x * x * x + 9.0 * x * x - 5.0 * x) / 6.0;
}

std::uint64_t gauss_tally(Index n) {
    const auto x = static_cast<std::uint64_t>(n);
    return (x * x * x + 3 * x * x - x) / 3;
}

GaussResult gauss_solve(const Matrix& a, const Matrix& b) {
    require_square(a, "gauss_solve: A");
    const Index n = a.rows();
    if (b.rows() != n) {
        throw DimensionError("gauss_solve: right-hand side has " + std::to_string(b.rows()) + " rows, expected " +
                             std::to_string(n));
    }
    const Index nrhs = b.cols();
    if (n == 0) {
        return GaussResult{b, 0};
    }
    Matrix u = a;
    Matrix x = b;
    std::uint64_t muls = 0;
    const double threshold = 1e-14 * a.cwiseAbs().maxCoeff();

    for (Index k = 0; k < n; ++k) {
        Index pivot = k;
        for (Index i = k + 1; i < n; ++i) {
            if (std::abs(u(i, k)) > std::abs(u(pivot, k))) {
                pivot = i;
            }
        }
        if (!(std::abs(u(pivot, k)) > threshold)) {
            throw SingularMatrixError("gauss_solve: matrix is singular to working precision");
        }
        if (pivot != k) {
            u.row(k).swap(u.row(pivot));
            x.row(k).swap(x.row(pivot));
        }
        for (Index i = k + 1; i < n; ++i) {
            const double factor = u(i, k) / u(k, k);
            ++muls;
            for (Index j = k + 1; j < n; ++j) {
                u(i, j) -= factor * u(k, j);
            }
            for (Index j = 0; j < nrhs; ++j) {
                x(i, j) -= factor * x(k, j);
            }
            u(i, k) = 0.0;
            muls += static_cast<std::uint64_t>(n - k - 1 + nrhs);
        }
    }
    for (Index i = n - 1; i >= 0; --i) {
        for (Index j = 0; j < nrhs; ++j) {
            double acc = x(i, j);
            for (Index c = i + 1; c < n; ++c) {
                acc -= u(i, c) * x(c, j);
            }
            x(i, j) = acc / u(i, i);
        }
        muls += static_cast<std::uint64_t>((n - i - 1 + 1) * nrhs);
    }
    return GaussResult{std::move(x), muls};
}

Matrix discrete_lyapunov(const Matrix& f, const Matrix& s, std::size_t max_iter) {
    require_square(f, "discrete_lyapunov: F");
    if (s.rows() != f.rows() || s.cols() != f.cols()) {
        throw DimensionError("discrete_lyapunov: S must match F");
    }
    if (f.size() > 0 && Eigen::EigenSolver<Matrix>(f, false).eigenvalues().cwiseAbs().maxCoeff() >= 1.0) {
        throw InstabilityError("discrete_lyapunov: spectral radius of F is not below 1");
    }
    const Matrix s_sym = symmetrized(s);
    Matrix c = s_sym;
    for (std::size_t k = 0; k < max_iter; ++k) {
        Matrix next = f * c * f.transpose() + s_sym;
        next = 0.5 * (next + next.transpose());
        if (!next.allFinite()) {
            throw InstabilityError("discrete_lyapunov: iteration diverged");
        }
        const double step = (next - c).norm();
        c = std::move(next);
        if (step <= 1e-14 * c.norm() || step == 0.0) {
            return c;
        }
    }
    throw InstabilityError("discrete_lyapunov: no convergence within iteration cap (spectral radius >= 1?)");
}

}  // namespace sflqg
