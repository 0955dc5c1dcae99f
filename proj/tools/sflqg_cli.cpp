// Command-line front end: DARE solving, identification and Q-learning on
// recorded trajectories, noise-model checks, complexity tables and the
// Monte Carlo benchmark.

#include "sflqg/errors.hpp"
#include "sflqg/experiment.hpp"
#include "sflqg/gchi2.hpp"
#include "sflqg/matops.hpp"
#include "sflqg/matrix_io.hpp"
#include "sflqg/opcount.hpp"
#include "sflqg/qlearn.hpp"
#include "sflqg/riccati.hpp"
#include "sflqg/sim.hpp"
#include "sflqg/stats.hpp"
#include "sflqg/sysid.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

using namespace sflqg;

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Long-format rows "quantity,row,col,value" for every entry of m.
void emit_matrix(std::ostream& out, const std::string& name, const Matrix& m) {
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            out << name << ',' << i + 1 << ',' << j + 1 << ',' << num(m(i, j)) << '\n';
        }
    }
}

void emit_scalar(std::ostream& out, const std::string& name, double v) { out << name << ",,," << num(v) << '\n'; }

// A preset name or a file holding A, B and optionally Sigma.
SystemModel load_system(const std::string& spec) {
    if (spec == "hagen1998") {
        return preset(spec).system;
    }
    const auto blocks = read_matrix_file(spec);
    if (blocks.size() == 2) {
        const Index n = blocks[0].rows();
        return SystemModel::with_psd_noise(blocks[0], blocks[1], Matrix::Zero(n, n));
    }
    if (blocks.size() != 3) {
        throw ParseError("system file must hold A, B and optionally Sigma");
    }
    return SystemModel(blocks[0], blocks[1], blocks[2]);
}

// A preset name or a file holding Q, R and a 1x1 gamma.
CostSpec load_cost(const std::string& spec) {
    if (spec == "hagen1998") {
        return preset(spec).cost;
    }
    const auto blocks = read_matrix_file(spec);
    if (blocks.size() != 3 || blocks[2].size() != 1) {
        throw ParseError("cost file must hold Q, R and a 1x1 gamma");
    }
    return CostSpec(blocks[0], blocks[1], blocks[2](0, 0));
}

// Writes to `path`, or stdout when it is empty or "-".
template <class F>
void with_output(const std::string& path, F&& body) {
    if (path.empty() || path == "-") {
        body(std::cout);
        std::cout.flush();
        return;
    }
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path);
    }
    body(out);
    out.flush();
    if (!out) {
        throw IoError("write failed: " + path);
    }
}

std::vector<std::size_t> schedule(std::size_t horizon, std::size_t every) {
    if (every == 0) {
        return default_checkpoints(horizon);
    }
    std::vector<std::size_t> out;
    for (std::size_t t = every; t <= horizon; t += every) {
        out.push_back(t);
    }
    if (out.empty() || out.back() != horizon) {
        out.push_back(horizon);
    }
    return out;
}

struct DareArgs {
    std::string system;
    std::string cost;
    double tol = DareOptions{}.tol;
    std::size_t max_iter = DareOptions{}.max_iter;
};

void run_dare(const DareArgs& args) {
    const SystemModel model = load_system(args.system);
    const CostSpec cost = load_cost(args.cost);
    DareOptions opts;
    opts.tol = args.tol;
    opts.max_iter = args.max_iter;
    opts.keep_trace = true;
    const DareSolution sol = solve_dare(model.a(), model.b(), cost, opts);
    std::cout << "quantity,row,col,value\n";
    emit_matrix(std::cout, "P", sol.p);
    emit_matrix(std::cout, "L", sol.gain);
    emit_scalar(std::cout, "iterations", static_cast<double>(sol.iterations));
    emit_scalar(std::cout, "rho", sol.rho);
    emit_scalar(std::cout, "delta0", sol.delta0);
    emit_scalar(std::cout, "residual", sol.residual);
    for (std::size_t k = 0; k < sol.trace.size(); ++k) {
        std::cout << "bound," << k << ",," << num(certified_bound(sol, k)) << '\n';
    }
}

struct IdentifyArgs {
    std::string traj;
    std::string system;
    std::size_t every = 0;
};

void run_identify(const IdentifyArgs& args) {
    const Trajectory traj = read_trajectory_csv(std::filesystem::path(args.traj));
    const MlEstimate est = ml_batch(traj);
    std::cout << "quantity,row,col,value\n";
    emit_matrix(std::cout, "A_hat", est.a);
    emit_matrix(std::cout, "B_hat", est.b);
    emit_matrix(std::cout, "Sigma_hat", est.sigma);
    if (args.system.empty()) {
        return;
    }
    const SystemModel truth = load_system(args.system);
    if (truth.state_dim() != traj.state_dim() || truth.input_dim() != traj.input_dim()) {
        throw DimensionError("identify: system dimensions do not match the trajectory");
    }
    Matrix ab(truth.state_dim(), truth.state_dim() + truth.input_dim());
    ab << truth.a(), truth.b();
    RlsState s = rls_init(traj);
    const auto checkpoints = schedule(traj.horizon(), args.every);
    auto next = checkpoints.begin();
    for (std::size_t t = s.tau;; ++t) {
        while (next != checkpoints.end() && *next < t) {
            ++next;
        }
        if (next != checkpoints.end() && *next == t) {
            Matrix hat(ab.rows(), ab.cols());
            hat << s.a_hat(), s.b_hat();
            std::cout << "error," << t << ",," << num((hat - ab).norm()) << '\n';
        }
        if (t == traj.horizon()) {
            break;
        }
        rls_update(s, traj.regressor(t), traj.states[t + 1]);
    }
}

struct QlearnArgs {
    std::string traj;
    std::string cost;
    std::size_t every = 0;
};

void run_qlearn(const QlearnArgs& args) {
    const Trajectory traj = read_trajectory_csv(std::filesystem::path(args.traj));
    const CostSpec cost = load_cost(args.cost);
    const Index n = traj.state_dim();
    const Index m = traj.input_dim();
    if (cost.state_dim() != n || cost.input_dim() != m) {
        throw DimensionError("qlearn: cost dimensions do not match the trajectory");
    }
    const Index d = ql_dim(n, m);
    std::cout << 'T';
    for (Index i = 1; i <= d; ++i) {
        std::cout << ",theta_" << i;
    }
    for (Index i = 1; i <= tri_size(n); ++i) {
        std::cout << ",p_" << i;
    }
    for (Index i = 1; i <= m; ++i) {
        for (Index j = 1; j <= n; ++j) {
            std::cout << ",l_" << i << '_' << j;
        }
    }
    std::cout << '\n';

    QLearningEstimator est(cost, n, m);
    const auto checkpoints = schedule(traj.horizon(), args.every);
    auto next = checkpoints.begin();
    for (std::size_t t = 0; t < traj.horizon(); ++t) {
        est.observe(traj.states[t], traj.inputs[t], traj.states[t + 1]);
        if (next == checkpoints.end() || *next != t + 1) {
            continue;
        }
        ++next;
        if (!est.ready()) {
            continue;
        }
        std::cout << t + 1;
        for (Index i = 0; i < d; ++i) {
            std::cout << ',' << num(est.state()->theta(i));
        }
        const Vector p = sym_vec(est.p_hat()).data;
        for (Index i = 0; i < p.size(); ++i) {
            std::cout << ',' << num(p(i));
        }
        for (Index i = 0; i < m; ++i) {
            for (Index j = 0; j < n; ++j) {
                std::cout << ',';
                if (est.gain_hat()) {
                    std::cout << num((*est.gain_hat())(i, j));
                }
            }
        }
        std::cout << '\n';
    }
}

struct Gchi2Args {
    std::size_t draws = 1000000;
    std::uint64_t seed = 1;
};

void run_gchi2(const Gchi2Args& args) {
    if (args.draws < 2) {
        throw DomainError("gchi2-check: need at least 2 draws");
    }
    const Preset p = preset("hagen1998");
    const Matrix pstar = solve_dare(p.system.a(), p.system.b(), p.cost).p;
    const Vector xi = (Vector(3) << 0.4, -0.2, 0.3).finished();
    struct Case {
        std::string name;
        GChi2Params params;
    };
    const std::vector<Case> cases{
        {"chi2_1", {Matrix::Identity(1, 1), Vector::Zero(1), 0.0}},
        {"chi2_4_shifted", {Matrix::Identity(4, 4), Vector::Ones(4), -4.0}},
        {"epsilon_origin", epsilon_params(p.system, pstar, Vector::Zero(3))},
        {"epsilon_xi", epsilon_params(p.system, pstar, xi)},
    };
    std::cout << "case,analytic_mean,empirical_mean,analytic_variance,empirical_variance,mean_z\n";
    for (std::size_t c = 0; c < cases.size(); ++c) {
        Rng rng = Rng::stream(args.seed, c);
        CompensatedSum s;
        CompensatedSum s2;
        for (std::size_t i = 0; i < args.draws; ++i) {
            const double y = sample(cases[c].params, rng);
            s.add(y);
            s2.add(y * y);
        }
        const double k = static_cast<double>(args.draws);
        const double mean = s.value() / k;
        const double var = s2.value() / k - mean * mean;
        const Moments m = moments(cases[c].params);
        const double z = m.variance > 0 ? (mean - m.mean) / std::sqrt(m.variance / k) : 0.0;
        std::cout << cases[c].name << ',' << num(m.mean) << ',' << num(mean) << ',' << num(m.variance) << ','
                  << num(var) << ',' << num(z) << '\n';
    }
}

struct ComplexityArgs {
    std::int64_t nmax = 12;
    std::int64_t mmax = 12;
    std::string csv;
};

void run_complexity(const ComplexityArgs& args) {
    const auto grid = cost_grid(args.nmax, args.mmax);
    with_output(args.csv, [&](std::ostream& out) {
        out << "N,M,classic,qlearn,classic_exact,qlearn_exact\n";
        for (const auto& row : grid) {
            out << row.n << ',' << row.m << ',' << format_decimal(row.classic) << ',' << format_decimal(row.qlearn)
                << ',' << row.classic.numerator() << '/' << row.classic.denominator() << ','
                << row.qlearn.numerator() << '/' << row.qlearn.denominator() << '\n';
        }
    });
    if (!args.csv.empty() && args.csv != "-") {
        std::size_t classic_wins = 0;
        for (const auto& row : grid) {
            classic_wins += row.classic < row.qlearn ? 1 : 0;
        }
        std::cerr << "classic cheaper on " << classic_wins << " of " << grid.size() << " (N, M) cells\n";
    }
}

struct BenchArgs {
    std::string config;
    std::string out;
    std::optional<std::size_t> runs;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    bool crlb = false;
};

void run_bench(const BenchArgs& args) {
    ExperimentConfig cfg = args.config.empty() ? default_config() : load_config(args.config);
    if (args.runs) {
        cfg.runs = *args.runs;
    }
    if (args.seed) {
        cfg.seed = *args.seed;
    }
    if (args.threads) {
        cfg.threads = *args.threads;
    }
    cfg.crlb = cfg.crlb || args.crlb;
    cfg.validate();
    const ExperimentResult result = run_experiment(cfg);
    for (const auto& stats : result.methods) {
        std::cerr << to_string(stats.method) << ": " << stats.excluded << " of " << cfg.runs << " runs excluded\n";
    }
    with_output(args.out, [&](std::ostream& out) { emit_results(out, result.records); });
}

struct SimulateArgs {
    std::string system = "hagen1998";
    std::string cost = "hagen1998";
    std::size_t horizon = 1000;
    std::uint64_t seed = 1;
    std::string policy = "random";
    std::optional<double> input_var;
    std::string out;
};

void run_simulate(const SimulateArgs& args) {
    const SystemModel model = load_system(args.system);
    const Index m = model.input_dim();
    Policy policy;
    if (args.policy == "random") {
        Matrix cov;
        if (args.input_var) {
            cov = *args.input_var * Matrix::Identity(m, m);
        } else {
            const CostSpec cost = load_cost(args.cost);
            cov = exploration_covariance(solve_dare(model.a(), model.b(), cost).gain, model);
        }
        policy = RandomGaussian{cov};
    } else if (args.policy == "optimal") {
        const CostSpec cost = load_cost(args.cost);
        policy = LinearFeedback{solve_dare(model.a(), model.b(), cost).gain};
    } else {
        throw ParseError("simulate: policy must be random or optimal");
    }
    const Trajectory traj = simulate(model, policy, args.horizon, args.seed);
    with_output(args.out, [&](std::ostream& out) { write_trajectory_csv(out, traj); });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"State-feedback LQG controller estimation: identification + DARE vs. Q-learning"};
    app.require_subcommand(1);

    DareArgs dare;
    auto* dare_cmd = app.add_subcommand("dare-solve", "Solve the discounted DARE; print P, L, rate and bound trace");
    dare_cmd->add_option("--system", dare.system, "Matrix file with A, B[, Sigma] or a preset name")->required();
    dare_cmd->add_option("--cost", dare.cost, "Matrix file with Q, R, gamma or a preset name")->required();
    dare_cmd->add_option("--tol", dare.tol, "Relative step tolerance")->capture_default_str();
    dare_cmd->add_option("--max-iter", dare.max_iter, "Iteration cap")->capture_default_str();

    IdentifyArgs identify;
    auto* identify_cmd = app.add_subcommand("identify", "ML estimate of A, B, Sigma from a trajectory CSV");
    identify_cmd->add_option("--traj", identify.traj, "Trajectory CSV")->required()->check(CLI::ExistingFile);
    identify_cmd->add_option("--system", identify.system, "True system, enables per-T error rows");
    identify_cmd->add_option("--every", identify.every, "Error row stride (0: log-spaced)");

    QlearnArgs qlearn;
    auto* qlearn_cmd = app.add_subcommand("qlearn", "Online Q-learning estimates along a trajectory CSV");
    qlearn_cmd->add_option("--traj", qlearn.traj, "Trajectory CSV")->required()->check(CLI::ExistingFile);
    qlearn_cmd->add_option("--cost", qlearn.cost, "Matrix file with Q, R, gamma or a preset name")->required();
    qlearn_cmd->add_option("--every", qlearn.every, "Row stride (0: log-spaced)");

    Gchi2Args gchi2;
    auto* gchi2_cmd = app.add_subcommand("gchi2-check", "Analytic vs. sampled generalized chi-squared moments");
    gchi2_cmd->add_option("--draws", gchi2.draws, "Samples per case")->capture_default_str();
    gchi2_cmd->add_option("--seed", gchi2.seed, "Base seed")->capture_default_str();

    ComplexityArgs complexity;
    auto* complexity_cmd = app.add_subcommand("complexity", "Per-sample multiplication counts over the (N, M) grid");
    complexity_cmd->add_option("--nmax", complexity.nmax, "Largest state dimension")->capture_default_str();
    complexity_cmd->add_option("--mmax", complexity.mmax, "Largest input dimension")->capture_default_str();
    complexity_cmd->add_option("--csv", complexity.csv, "Output file (default stdout)");

    BenchArgs bench;
    auto* bench_cmd = app.add_subcommand("bench", "Monte Carlo accuracy benchmark; writes the results CSV");
    bench_cmd->add_option("--config", bench.config, "key = value config file")->check(CLI::ExistingFile);
    bench_cmd->add_option("--out", bench.out, "Results CSV (default stdout)");
    bench_cmd->add_option("--runs", bench.runs, "Override the number of runs");
    bench_cmd->add_option("--seed", bench.seed, "Override the base seed");
    bench_cmd->add_option("--threads", bench.threads, "Worker threads (0: hardware concurrency)");
    bench_cmd->add_flag("--crlb", bench.crlb, "Add the Monte Carlo CRLB column");

    SimulateArgs sim;
    auto* sim_cmd = app.add_subcommand("simulate", "Simulate a trajectory and write it as CSV");
    sim_cmd->add_option("--system", sim.system, "Matrix file with A, B, Sigma or a preset name")->capture_default_str();
    sim_cmd->add_option("--cost", sim.cost, "Cost used by the optimal policy and default exploration")
        ->capture_default_str();
    sim_cmd->add_option("--horizon", sim.horizon, "Number of transitions")->capture_default_str();
    sim_cmd->add_option("--seed", sim.seed, "Seed")->capture_default_str();
    sim_cmd->add_option("--policy", sim.policy, "random | optimal")->capture_default_str();
    sim_cmd->add_option("--input-var", sim.input_var, "Random input variance (default: L C L' of the optimal gain)");
    sim_cmd->add_option("--out", sim.out, "Output CSV (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*dare_cmd) {
            run_dare(dare);
        } else if (*identify_cmd) {
            run_identify(identify);
        } else if (*qlearn_cmd) {
            run_qlearn(qlearn);
        } else if (*gchi2_cmd) {
            run_gchi2(gchi2);
        } else if (*complexity_cmd) {
            run_complexity(complexity);
        } else if (*bench_cmd) {
            run_bench(bench);
        } else if (*sim_cmd) {
            run_simulate(sim);
        }
    } catch (const Error& e) {
        std::cerr << "sflqg: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "sflqg: unexpected error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
