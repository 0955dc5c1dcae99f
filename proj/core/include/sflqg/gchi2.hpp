#pragma once

#include "sflqg/sim.hpp"
#include "sflqg/types.hpp"

// Generalized chi-squared law y = z'Az + b'z + c, z ~ N(0, I), and the
// parameters of the Q-learning regression noise it describes.
namespace sflqg {

/// A must be symmetric PSD. Strictly PD is the textbook requirement; PSD is
/// accepted so degenerate noise models can be represented.
struct GChi2Params {
    Matrix a;
    Vector b;
    double c = 0.0;

    /// Throws DimensionError / SymmetryError / PositivityError.
    void validate() const;
};

double sample(const GChi2Params& params, Rng& rng);

struct Moments {
    double mean = 0.0;
    double variance = 0.0;
};

/// mean = Tr A + c, variance = 2 Tr A^2 + b'b.
Moments moments(const GChi2Params& params);

/// Law of eps = x_next' P x_next - E[x_next' P x_next | xi] for the plant:
/// (S P S, 2 S P (A x + B u), -Tr{S P S}) with S = Sigma^{1/2}.
GChi2Params epsilon_params(const SystemModel& model, const Matrix& p, const Vector& xi);

/// 2 Tr{P Sigma P Sigma} + 4 m' P Sigma P m with m = A x + B u, evaluated
/// directly from the model.
double epsilon_variance(const SystemModel& model, const Matrix& p, const Vector& xi);

/// Realized noise w' P w + 2 m' P w - Tr{P Sigma} for an observed transition.
double epsilon_realized(const SystemModel& model, const Matrix& p, const Vector& xi, const Vector& x_next);

}  // namespace sflqg
