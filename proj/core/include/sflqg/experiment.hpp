#pragma once

#include "sflqg/riccati.hpp"
#include "sflqg/sim.hpp"
#include "sflqg/types.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

// Monte Carlo comparison of the two controller estimators, the matching
// Cramer-Rao bound estimate, and the results CSV.
namespace sflqg {

enum class Method { SysIdLqg, QLearning };
enum class PolicyKind { Random, Switched };

std::string to_string(Method m);
Method parse_method(const std::string& name);

struct Preset {
    SystemModel system;
    CostSpec cost;
};

/// Compiled-in plants. Only "hagen1998" exists: the two-state, one-input
/// test plant with Sigma = 0.01 I, Q = I, R = 1, gamma = 0.99.
Preset preset(const std::string& name);

/// Log-spaced {50, 100, 200, 500, ..., 20000} truncated to the horizon, with
/// the horizon itself appended when it is not already listed.
std::vector<std::size_t> default_checkpoints(std::size_t horizon);

struct ExperimentConfig {
    std::string system_name = "hagen1998";
    SystemModel system;
    CostSpec cost;
    std::size_t horizon = 20000;
    std::size_t runs = 1000;
    std::uint64_t seed = 1;
    PolicyKind policy = PolicyKind::Random;
    std::size_t switch_time = 200;
    std::vector<Method> methods{Method::SysIdLqg, Method::QLearning};
    /// Sorted, distinct sample counts at which errors are recorded.
    std::vector<std::size_t> checkpoints;
    /// Worker threads; 0 picks the hardware concurrency.
    unsigned threads = 0;
    bool crlb = false;
    /// Runs used for the Fisher information estimate; 0 means `runs`.
    std::size_t crlb_runs = 0;
    /// Exploration covariance of the random input. Defaults to L C L' for
    /// the true optimal gain.
    std::optional<Matrix> input_cov;

    /// Throws ExperimentError on inconsistent settings.
    void validate() const;
};

/// The "hagen1998" preset with default settings.
ExperimentConfig default_config();

/// Flat "key = value" text; '#' starts a comment. Keys: system (preset name
/// or matrix file holding A, B, Sigma), cost (matrix file holding Q, R and a
/// 1x1 gamma), horizon, runs, seed, policy (random | switched), switch_time,
/// methods (comma list of sysid_lqg, qlearn), checkpoints (comma list),
/// record_stride, threads, crlb (true | false), crlb_runs. Relative paths
/// resolve against `base_dir`.
ExperimentConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

struct AccuracyRecord {
    std::size_t t = 0;
    /// Mean over included runs of ||sym_vec(P*) - sym_vec(P_hat_T)||^2.
    std::optional<double> e_sysid;
    std::optional<double> e_qlearn;
    std::optional<double> crlb;
};

struct MethodStats {
    Method method = Method::SysIdLqg;
    std::size_t excluded = 0;
    /// Median over included runs of ||P_hat_T - P*||_F, per checkpoint.
    std::vector<double> median_frobenius;
};

struct ExperimentResult {
    std::vector<AccuracyRecord> records;
    std::vector<MethodStats> methods;
    Matrix p_star;
    Matrix input_cov;

    const MethodStats& stats(Method m) const;
};

/// Runs R independent runs per method. Run r of every method draws from
/// Rng::stream(seed, r). Output does not depend on the thread count. Throws
/// ExperimentError when more than 5% of a method's runs fail.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Columns of the (A, B) -> sym_vec(P) Jacobian, in the parameter order
/// vec(A), vec(B), sym_vec(Sigma) (column-major vec). The Sigma columns are
/// zero.
Matrix crlb_jacobian(const SystemModel& model, const CostSpec& cost);

/// Monte Carlo estimate of Tr{J I_T^{-1} J'} at each checkpoint under the
/// random input N(0, input_cov): the Fisher information is the average
/// outer product of finite-difference scores of the exact Gaussian
/// log-likelihood. Throws NumericError when the estimate is singular.
std::vector<double> estimate_crlb_trace(const SystemModel& model, const CostSpec& cost, const Matrix& input_cov,
                                        const std::vector<std::size_t>& checkpoints, std::size_t runs,
                                        std::uint64_t seed, unsigned threads = 1);

/// CSV "T,e_sysid,e_qlearn[,crlb]" with 17 significant digits. Missing
/// values are left empty; the crlb column appears only when some record has
/// one.
void emit_results(std::ostream& out, const std::vector<AccuracyRecord>& records);
void emit_results(const std::filesystem::path& path, const std::vector<AccuracyRecord>& records);
std::vector<AccuracyRecord> read_results(std::istream& in);

}  // namespace sflqg
