// Wall-clock cost of the per-sample kernels, to set against the
// multiplication counts from the complexity model.

#include "sflqg/experiment.hpp"
#include "sflqg/matops.hpp"
#include "sflqg/qlearn.hpp"
#include "sflqg/riccati.hpp"
#include "sflqg/sysid.hpp"

#include <benchmark/benchmark.h>

using namespace sflqg;

namespace {

// Stable n x n plant with m inputs and unit-noise, unit-weight cost.
struct Plant {
    SystemModel model;
    CostSpec cost;
};

Plant make_plant(Index n, Index m) {
    Rng rng(17);
    Matrix a(n, n);
    Matrix b(n, m);
    for (Index i = 0; i < a.size(); ++i) {
        a.data()[i] = rng.normal();
    }
    for (Index i = 0; i < b.size(); ++i) {
        b.data()[i] = rng.normal();
    }
    a *= 0.8 / a.eigenvalues().cwiseAbs().maxCoeff();
    return {SystemModel(a, b, 0.01 * Matrix::Identity(n, n)),
            CostSpec(Matrix::Identity(n, n), Matrix::Identity(m, m), 0.99)};
}

Trajectory make_traj(const Plant& p, std::size_t horizon) {
    const Index m = p.model.input_dim();
    return simulate(p.model, RandomGaussian{Matrix::Identity(m, m)}, horizon, 5);
}

void BM_GaussSolve(benchmark::State& state) {
    const Index n = state.range(0);
    Rng rng(3);
    Matrix a = Matrix::Identity(n, n) * static_cast<double>(n);
    for (Index i = 0; i < a.size(); ++i) {
        a.data()[i] += rng.normal();
    }
    const Matrix rhs = Matrix::Ones(n, 1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(gauss_solve(a, rhs));
    }
}
BENCHMARK(BM_GaussSolve)->Arg(1)->Arg(2)->Arg(4)->Arg(8)->Arg(16);

void BM_DareIterate(benchmark::State& state) {
    const Plant p = make_plant(state.range(0), state.range(1));
    const Matrix q = p.cost.q();
    for (auto _ : state) {
        benchmark::DoNotOptimize(dare_iterate(q, p.model.a(), p.model.b(), p.cost));
    }
}
BENCHMARK(BM_DareIterate)->Args({1, 1})->Args({2, 1})->Args({4, 2})->Args({8, 4});

void BM_RlsUpdate(benchmark::State& state) {
    const Plant p = make_plant(state.range(0), state.range(1));
    const Trajectory traj = make_traj(p, 400);
    RlsState s = rls_init(traj);
    std::size_t t = s.tau;
    for (auto _ : state) {
        rls_update(s, traj.regressor(t), traj.states[t + 1]);
        t = t + 1 < traj.horizon() ? t + 1 : s.tau;
    }
}
BENCHMARK(BM_RlsUpdate)->Args({1, 1})->Args({2, 1})->Args({4, 2})->Args({8, 4});

void BM_QlUpdate(benchmark::State& state) {
    const Plant p = make_plant(state.range(0), state.range(1));
    const Trajectory traj = make_traj(p, 2000);
    QlState s = ql_init(traj, default_theta0(p.cost), p.cost);
    std::size_t t = s.tau;
    for (auto _ : state) {
        ql_update(s, traj.regressor(t), traj.states[t + 1], p.cost);
        t = t + 1 < traj.horizon() ? t + 1 : s.tau;
    }
}
BENCHMARK(BM_QlUpdate)->Args({1, 1})->Args({2, 1})->Args({4, 2})->Args({8, 4});

// One full sample-time step of each estimator, data included.
void BM_SysIdLqgStep(benchmark::State& state) {
    const Plant p = make_plant(state.range(0), state.range(1));
    const Trajectory traj = make_traj(p, 2000);
    SysIdLqgEstimator est(p.cost, p.model.state_dim(), p.model.input_dim());
    std::size_t t = 0;
    for (auto _ : state) {
        est.observe(traj.states[t], traj.inputs[t], traj.states[t + 1]);
        t = (t + 1) % traj.horizon();
    }
}
BENCHMARK(BM_SysIdLqgStep)->Args({1, 1})->Args({2, 1})->Args({4, 2});

void BM_QLearningStep(benchmark::State& state) {
    const Plant p = make_plant(state.range(0), state.range(1));
    const Trajectory traj = make_traj(p, 2000);
    QLearningEstimator est(p.cost, p.model.state_dim(), p.model.input_dim());
    std::size_t t = 0;
    for (auto _ : state) {
        est.observe(traj.states[t], traj.inputs[t], traj.states[t + 1]);
        t = (t + 1) % traj.horizon();
    }
}
BENCHMARK(BM_QLearningStep)->Args({1, 1})->Args({2, 1})->Args({4, 2});

}  // namespace

BENCHMARK_MAIN();
