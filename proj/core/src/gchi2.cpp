#include "sflqg/gchi2.hpp"

#include "sflqg/errors.hpp"
#include "sflqg/matops.hpp"

namespace sflqg {

namespace {

void check_model(const SystemModel& model, const Matrix& p, const Vector& xi) {
    const Index n = model.state_dim();
    if (p.rows() != n || p.cols() != n || xi.size() != n + model.input_dim()) {
        throw DimensionError("epsilon: dimension mismatch");
    }
}

Vector mean_next(const SystemModel& model, const Vector& xi) {
    const Index n = model.state_dim();
    return model.a() * xi.head(n) + model.b() * xi.tail(model.input_dim());
}

}  // namespace

void GChi2Params::validate() const {
    if (a.rows() != a.cols() || b.size() != a.rows()) {
        throw DimensionError("GChi2Params: A must be NxN and b an N-vector");
    }
    const Matrix s = symmetrized(a);
    if (s.rows() > 0 && min_eigenvalue(s) < -1e-12 * std::max(1.0, s.norm())) {
        throw PositivityError("GChi2Params: A must be positive semi-definite");
    }
}

double sample(const GChi2Params& params, Rng& rng) {
    const Vector z = rng.normal_vector(params.b.size());
    return z.dot(params.a * z) + params.b.dot(z) + params.c;
}

Moments moments(const GChi2Params& params) {
    params.validate();
    return Moments{params.a.trace() + params.c, 2.0 * (params.a * params.a).trace() + params.b.squaredNorm()};
}

GChi2Params epsilon_params(const SystemModel& model, const Matrix& p, const Vector& xi) {
    check_model(model, p, xi);
    const Matrix root = sym_sqrt(model.sigma());
    Matrix a = root * symmetrized(p) * root;
    a = 0.5 * (a + a.transpose());
    GChi2Params out;
    out.b = 2.0 * root * p * mean_next(model, xi);
    out.c = -a.trace();
    out.a = std::move(a);
    return out;
}

double epsilon_variance(const SystemModel& model, const Matrix& p, const Vector& xi) {
    check_model(model, p, xi);
    const Matrix ps = p * model.sigma();
    const Vector m = mean_next(model, xi);
    return 2.0 * (ps * ps).trace() + 4.0 * m.dot(ps * p * m);
}

double epsilon_realized(const SystemModel& model, const Matrix& p, const Vector& xi, const Vector& x_next) {
    check_model(model, p, xi);
    const Vector m = mean_next(model, xi);
    const Vector w = x_next - m;
    return w.dot(p * w) + 2.0 * m.dot(p * w) - (p * model.sigma()).trace();
}

}  // namespace sflqg
