#include "sflqg/errors.hpp"
#include "sflqg/matops.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace sflqg;
using sflqg::testing::random_matrix;
using sflqg::testing::random_pd;
using sflqg::testing::random_symmetric;

TEST(SymVec, IdentityAndExample) {
    EXPECT_EQ(sym_vec(Matrix::Identity(2, 2)).data, (Vector(3) << 1, 0, 1).finished());
    Matrix x(2, 2);
    x << 1, 2, 2, 3;
    const SymVec v = sym_vec(x);
    EXPECT_EQ(v.data, (Vector(3) << 1, 2, 3).finished());
    EXPECT_EQ(v.dim, 2);
    EXPECT_EQ(sym_unvec(v), x);
}

TEST(SymVec, ColumnSegmentsOrder) {
    Matrix x(3, 3);
    x << 1, 2, 4, 2, 3, 5, 4, 5, 6;
    EXPECT_EQ(sym_vec(x).data, (Vector(6) << 1, 2, 3, 4, 5, 6).finished());
}

TEST(SymVec, UnvecScalarAndIdentity) {
    EXPECT_EQ(sym_unvec((Vector(1) << 5).finished()), (Matrix(1, 1) << 5).finished());
    EXPECT_EQ(sym_unvec((Vector(3) << 1, 0, 1).finished()), Matrix::Identity(2, 2));
}

TEST(SymVec, RoundTripRandom) {
    Rng rng(11);
    for (Index n = 1; n <= 7; ++n) {
        const Matrix x = random_symmetric(n, rng);
        EXPECT_TRUE(sym_unvec(sym_vec(x)).isApprox(x, 1e-15)) << "n=" << n;
    }
}

TEST(SymVec, RejectsAsymmetricAndBadLength) {
    Matrix x(2, 2);
    x << 1, 2, 3, 4;
    EXPECT_THROW(sym_vec(x), SymmetryError);
    EXPECT_THROW(sym_unvec((Vector(4) << 1, 2, 3, 4).finished()), DimensionError);
    EXPECT_THROW(SymVec::from_data(Vector::Zero(5)), DimensionError);
}

TEST(SymVec, SymmetrizesWithinTolerance) {
    Matrix x(2, 2);
    x << 1, 2, 2 + 1e-14, 3;
    EXPECT_NO_THROW(sym_vec(x));
    EXPECT_DOUBLE_EQ(sym_vec(x).data(1), 2 + 0.5e-14);
}

TEST(TriKron, Examples) {
    const Vector e1 = (Vector(2) << 1, 0).finished();
    EXPECT_EQ(tri_kron(e1, e1), (Vector(3) << 1, 0, 0).finished());
    const Vector a = (Vector(2) << 1, 2).finished();
    const Vector b = (Vector(2) << 3, 4).finished();
    EXPECT_EQ(tri_kron(a, b), (Vector(3) << 3, 10, 8).finished());
    EXPECT_THROW(tri_kron(a, Vector::Zero(3)), DimensionError);
}

TEST(TriKron, SelfMatchesGeneral) {
    Rng rng(3);
    const Vector a = rng.normal_vector(5);
    EXPECT_TRUE(tri_kron_self(a).isApprox(tri_kron(a, a), 1e-15));
}

TEST(TriKron, BilinearIdentity) {
    Rng rng(5);
    for (int trial = 0; trial < 1000; ++trial) {
        const Index n = 1 + trial % 6;
        const Vector a = rng.normal_vector(n);
        const Vector b = rng.normal_vector(n);
        const Matrix x = random_symmetric(n, rng);
        const double dense = a.dot(x * b);
        EXPECT_NEAR(tri_kron(b, a).dot(sym_vec(x).data), dense, 1e-12 * (1 + std::abs(dense)));
    }
}

TEST(TriKron, CountsMultiplications) {
    MulCounter c;
    tri_kron(Vector::Ones(3), Vector::Ones(3), &c);
    EXPECT_EQ(c.count, 9u);
    MulCounter s;
    tri_kron_self(Vector::Ones(3), &s);
    EXPECT_EQ(s.count, 6u);
}

TEST(Thompson, Basics) {
    Rng rng(9);
    const Matrix p = random_pd(3, rng);
    EXPECT_NEAR(thompson_distance(p, p), 0.0, 1e-12);
    EXPECT_NEAR(thompson_distance(2.0 * Matrix::Identity(2, 2), Matrix::Identity(2, 2)), std::sqrt(2.0) * std::log(2.0),
                1e-14);
}

TEST(Thompson, RejectsNonPd) {
    Matrix bad = Matrix::Identity(2, 2);
    bad(1, 1) = -1;
    EXPECT_THROW(thompson_distance(bad, Matrix::Identity(2, 2)), PositivityError);
    EXPECT_THROW(thompson_distance(Matrix::Identity(2, 2), Matrix::Identity(3, 3)), DimensionError);
}

TEST(Thompson, InverseInvariance) {
    Rng rng(21);
    for (int trial = 0; trial < 200; ++trial) {
        const Index n = 1 + trial % 5;
        const Matrix p = random_pd(n, rng);
        const Matrix q = random_pd(n, rng);
        EXPECT_NEAR(thompson_distance(p.inverse(), q.inverse()), thompson_distance(p, q), 1e-9);
    }
}

TEST(Thompson, MetricAxioms) {
    Rng rng(22);
    for (int trial = 0; trial < 300; ++trial) {
        const Index n = 1 + trial % 5;
        const Matrix p = random_pd(n, rng);
        const Matrix q = random_pd(n, rng);
        const Matrix r = random_pd(n, rng);
        const double pq = thompson_distance(p, q);
        EXPECT_GE(pq, 0.0);
        EXPECT_NEAR(pq, thompson_distance(q, p), 1e-9);
        EXPECT_LE(pq, thompson_distance(p, r) + thompson_distance(r, q) + 1e-9);
    }
}

TEST(Thompson, CongruenceContraction) {
    Rng rng(23);
    for (int trial = 0; trial < 300; ++trial) {
        const Index n = 1 + trial % 5;
        const Matrix w = random_pd(n, rng);
        const Matrix b = random_matrix(n, n, rng);
        const Matrix p = random_pd(n, rng);
        const Matrix q = random_pd(n, rng);
        const Matrix bpb = b * p * b.transpose();
        const Matrix bqb = b * q * b.transpose();
        const double alpha = std::max(spectral_norm(bpb), spectral_norm(bqb));
        const double beta = min_eigenvalue(w);
        const double lhs = thompson_distance(w + bpb, w + bqb);
        EXPECT_LE(lhs, alpha / (alpha + beta) * thompson_distance(p, q) + 1e-9);
    }
}

TEST(Thompson, NormBound) {
    Rng rng(24);
    for (int trial = 0; trial < 300; ++trial) {
        const Index n = 1 + trial % 5;
        const Matrix p = random_pd(n, rng);
        const Matrix q = random_pd(n, rng);
        const double bound =
            std::expm1(thompson_distance(p, q)) * std::min(spectral_norm(p), spectral_norm(q));
        EXPECT_LE(spectral_norm(p - q), bound * (1 + 1e-12) + 1e-12);
    }
}

TEST(PdMatrixType, Validation) {
    EXPECT_NO_THROW(PdMatrix(Matrix::Identity(3, 3)));
    Matrix bad = Matrix::Identity(2, 2);
    bad(0, 0) = 0.0;
    EXPECT_THROW(PdMatrix{bad}, PositivityError);
    Matrix asym = Matrix::Identity(2, 2);
    asym(0, 1) = 0.5;
    EXPECT_THROW(PdMatrix{asym}, SymmetryError);
}

TEST(Gauss, IdentitySystem) {
    const Vector b = (Vector(3) << 1, 2, 3).finished();
    const GaussResult r = gauss_solve(Matrix::Identity(3, 3), b);
    EXPECT_EQ(r.x, b);
}

TEST(Gauss, TallyMatchesIntegerFormula) {
    Rng rng(31);
    for (Index n = 1; n <= 8; ++n) {
        const GaussResult r = gauss_solve(random_pd(n, rng), rng.normal_vector(n));
        EXPECT_EQ(r.multiplies, gauss_tally(n)) << "n=" << n;
    }
    EXPECT_EQ(gauss_tally(1), 1u);
    EXPECT_EQ(gauss_tally(2), 6u);
    EXPECT_EQ(gauss_tally(3), 17u);
    EXPECT_DOUBLE_EQ(gauss_closed_form(1), 4.0 / 3.0);
    EXPECT_DOUBLE_EQ(gauss_closed_form(3), 29.0);
}

TEST(Gauss, ResidualRandom) {
    Rng rng(32);
    for (int trial = 0; trial < 50; ++trial) {
        const Matrix a = random_matrix(5, 5, rng) + 5.0 * Matrix::Identity(5, 5);
        const Vector b = rng.normal_vector(5);
        const Vector x = gauss_solve(a, b).x;
        EXPECT_LE((a * x - b).norm(), 1e-10 * (a.norm() * x.norm() + b.norm()));
    }
}

TEST(Gauss, PivotingAndSingular) {
    Matrix a(2, 2);
    a << 0, 1, 1, 0;
    EXPECT_TRUE(gauss_solve(a, (Vector(2) << 2, 3).finished()).x.isApprox((Vector(2) << 3, 2).finished()));
    Matrix s(2, 2);
    s << 1, 2, 2, 4;
    EXPECT_THROW(gauss_solve(s, Vector::Ones(2)), SingularMatrixError);
    EXPECT_THROW(gauss_solve(Matrix::Identity(2, 2), Vector::Ones(3)), DimensionError);
}

TEST(Gauss, MultipleRightHandSides) {
    Rng rng(33);
    const Matrix a = random_pd(4, rng);
    const Matrix b = random_matrix(4, 3, rng);
    EXPECT_TRUE((a * gauss_solve(a, b).x).isApprox(b, 1e-12));
}

TEST(Lyapunov, Examples) {
    const Matrix s = (Matrix(2, 2) << 2, 1, 1, 3).finished();
    EXPECT_TRUE(discrete_lyapunov(Matrix::Zero(2, 2), s).isApprox(s));
    const Matrix c = discrete_lyapunov((Matrix(1, 1) << 0.5).finished(), (Matrix(1, 1) << 1).finished());
    EXPECT_NEAR(c(0, 0), 4.0 / 3.0, 1e-14);
}

TEST(Lyapunov, ResidualRandomStable) {
    Rng rng(41);
    for (int trial = 0; trial < 30; ++trial) {
        const Index n = 1 + trial % 4;
        const Matrix f = sflqg::testing::random_with_radius(n, 0.9, rng);
        const Matrix s = random_pd(n, rng);
        const Matrix c = discrete_lyapunov(f, s);
        EXPECT_LE((c - f * c * f.transpose() - s).norm(), 1e-10 * c.norm());
    }
}

TEST(Lyapunov, UnstableThrows) {
    EXPECT_THROW(discrete_lyapunov((Matrix(1, 1) << 1.1).finished(), (Matrix(1, 1) << 1).finished()),
                 InstabilityError);
    EXPECT_THROW(discrete_lyapunov((Matrix(1, 1) << 1.0).finished(), (Matrix(1, 1) << 1).finished(), 1000),
                 InstabilityError);
}

TEST(Gram, NonsingularityAndPinv) {
    EXPECT_TRUE(gram_nonsingular(Matrix::Identity(3, 3)));
    Matrix rank1 = Vector::Ones(3) * Vector::Ones(3).transpose();
    EXPECT_FALSE(gram_nonsingular(rank1));
    const Matrix pinv = pinv_symmetric(rank1);
    EXPECT_TRUE((rank1 * pinv * rank1).isApprox(rank1, 1e-12));
    EXPECT_TRUE((pinv * rank1 * pinv).isApprox(pinv, 1e-12));
}
