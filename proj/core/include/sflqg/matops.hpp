#pragma once

#include "sflqg/types.hpp"

#include <cstdint>

/// Dense symmetric-matrix algebra used throughout the estimators: upper
/// triangular vectorization, the matching "triangular" Kronecker product,
/// the Thompson metric on positive-definite matrices, Gaussian elimination
/// with multiplication counting, and a fixed-point discrete Lyapunov solver.
namespace sflqg {

/// Upper-triangular vectorization of a symmetric matrix. `data` stacks the
/// column segments [X(0,n), ..., X(n,n)] for n = 0..dim-1.
struct SymVec {
    Vector data;
    Index dim = 0;

    /// Wraps a raw vector, inferring the matrix dimension. Throws
    /// DimensionError if the length is not a triangular number.
    static SymVec from_data(Vector data);

    Index size() const noexcept { return data.size(); }
};

/// Number of entries in the upper triangle of an n x n matrix.
constexpr Index tri_size(Index n) noexcept { return n * (n + 1) / 2; }

/// Relative tolerance used by the symmetry checks.
inline constexpr double kSymmetryTol = 1e-12;

/// Relative eigenvalue floor below which a matrix is not treated as PD.
inline constexpr double kEigenFloor = 1e-14;

bool is_symmetric(const Matrix& x, double rel_tol = kSymmetryTol);

/// (X + X') / 2. Throws SymmetryError if X is not symmetric to `rel_tol`.
Matrix symmetrized(const Matrix& x, double rel_tol = kSymmetryTol);

SymVec sym_vec(const Matrix& x);
Matrix sym_unvec(const SymVec& v);
Matrix sym_unvec(const Vector& v);

/// Upper-triangular Kronecker product. For symmetric X,
/// a' X b == tri_kron(b, a).dot(sym_vec(X).data).
Vector tri_kron(const Vector& a, const Vector& b, MulCounter* counter = nullptr);

/// tri_kron(a, a), using one multiplication per entry.
Vector tri_kron_self(const Vector& a, MulCounter* counter = nullptr);

/// Smallest / largest eigenvalue of a symmetric matrix.
double min_eigenvalue(const Matrix& sym);
double max_eigenvalue(const Matrix& sym);

/// True when `sym` is symmetric and lambda_min > floor * max(lambda_max, 0).
bool is_positive_definite(const Matrix& sym, double rel_floor = kEigenFloor);

/// Throws PositivityError (naming `what`) unless `sym` is symmetric PD.
void require_positive_definite(const Matrix& sym, const char* what);

/// Largest singular value.
double spectral_norm(const Matrix& m);

/// Symmetric square root of a symmetric PSD matrix (negative rounding noise
/// in the spectrum is clamped to zero).
Matrix sym_sqrt(const Matrix& psd);

/// Thompson distance ||log(Q^{-1/2} P Q^{-1/2})||_F between PD matrices.
double thompson_distance(const Matrix& p, const Matrix& q);

/// A positive-definite matrix, validated at construction.
class PdMatrix {
public:
    PdMatrix() = default;

    /// Symmetrizes within tolerance and checks the spectrum; throws
    /// SymmetryError / PositivityError.
    explicit PdMatrix(const Matrix& m);

    const Matrix& matrix() const noexcept { return m_; }
    Index rows() const noexcept { return m_.rows(); }
    operator const Matrix&() const noexcept { return m_; }

private:
    Matrix m_;
};

struct GaussResult {
    Matrix x;
    /// Multiplications and divisions actually executed.
    std::uint64_t multiplies = 0;
};

/// Closed-form multiplication count of solving an N x N system by Gaussian
/// elimination, (4N^3 + 9N^2 - 5N) / 6, as a double.
double gauss_closed_form(Index n);

/// Integer tally executed by gauss_solve for one right-hand side:
/// N^3/3 + N^2 - N/3.
std::uint64_t gauss_tally(Index n);

/// Solves A X = B (B may have several columns) by Gaussian elimination with
/// partial pivoting. Throws SingularMatrixError when a pivot falls below
/// 1e-14 * max|A|.
GaussResult gauss_solve(const Matrix& a, const Matrix& b);

/// Relative eigenvalue floor deciding when a regressor Gram matrix counts as
/// nonsingular.
inline constexpr double kGramFloor = 1e-8;

/// lambda_min(U) > kGramFloor * lambda_max(U) for a symmetric PSD Gram U.
bool gram_nonsingular(const Matrix& gram);

/// Moore-Penrose pseudoinverse of a symmetric matrix via eigendecomposition;
/// eigenvalues below rel_cutoff * max|lambda| are treated as zero.
Matrix pinv_symmetric(const Matrix& sym, double rel_cutoff = 1e-12);

/// Solves C = F C F' + S by the fixed-point iteration C_{k+1} = F C_k F' + S
/// starting at C_0 = S. Throws InstabilityError if the iteration does not
/// settle within `max_iter` steps (spectral radius of F >= 1).
Matrix discrete_lyapunov(const Matrix& f, const Matrix& s, std::size_t max_iter = 1'000'000);

}  // namespace sflqg
