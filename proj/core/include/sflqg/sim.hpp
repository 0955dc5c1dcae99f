#pragma once

#include "sflqg/types.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <variant>
#include <vector>

namespace sflqg {

/// Plant x' = A x + B u + w with w ~ N(0, Sigma).
class SystemModel {
public:
    SystemModel() = default;

    /// Requires A square and nonsingular, B with matching rows, Sigma
    /// symmetric PD.
    SystemModel(const Matrix& a, const Matrix& b, const Matrix& sigma);

    /// Like the constructor but accepts a PSD (possibly zero) Sigma. Used for
    /// noise-free and degenerate test plants.
    static SystemModel with_psd_noise(const Matrix& a, const Matrix& b, const Matrix& sigma);

    const Matrix& a() const noexcept { return a_; }
    const Matrix& b() const noexcept { return b_; }
    const Matrix& sigma() const noexcept { return sigma_; }
    /// F with F F' = Sigma (Cholesky when Sigma is PD).
    const Matrix& noise_factor() const noexcept { return noise_factor_; }
    Index state_dim() const noexcept { return a_.rows(); }
    Index input_dim() const noexcept { return b_.cols(); }

private:
    SystemModel(const Matrix& a, const Matrix& b, const Matrix& sigma, bool require_pd);

    Matrix a_;
    Matrix b_;
    Matrix sigma_;
    Matrix noise_factor_;
};

/// Seeded Gaussian source. Independent per-run streams are derived from
/// (base_seed, index) so Monte Carlo runs are reproducible regardless of
/// scheduling.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    static Rng stream(std::uint64_t base_seed, std::uint64_t index);

    double normal();
    Vector normal_vector(Index n);

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

struct Trajectory {
    /// x_0 .. x_T
    std::vector<Vector> states;
    /// u_0 .. u_{T-1}
    std::vector<Vector> inputs;

    std::size_t horizon() const noexcept { return inputs.size(); }
    Index state_dim() const { return states.empty() ? 0 : states.front().size(); }
    Index input_dim() const { return inputs.empty() ? 0 : inputs.front().size(); }

    /// Stacked regressor [x_t; u_t].
    Vector regressor(std::size_t t) const;

    /// First `transitions` transitions of this trajectory.
    Trajectory prefix(std::size_t transitions) const;
};

/// u ~ N(0, cov)
struct RandomGaussian {
    Matrix cov;
};

/// u = -L x
struct LinearFeedback {
    Matrix gain;
};

/// Returns the current gain estimate, or nullopt while none is available.
using GainProvider = std::function<std::optional<Matrix>()>;

/// Random exploration until `switch_time`, then u_t = -L_t x_t with L_t
/// queried from `gain` at every step. While the provider has no estimate the
/// random input is kept.
struct Switched {
    Matrix cov;
    std::size_t switch_time = 0;
    GainProvider gain;
};

using Policy = std::variant<RandomGaussian, LinearFeedback, Switched>;

/// Called after every transition (x_t, u_t, x_{t+1}).
using TransitionObserver = std::function<void(const Vector&, const Vector&, const Vector&)>;

/// x' = A x + B u + F z, z ~ N(0, I).
Vector step(const Vector& x, const Vector& u, const SystemModel& model, Rng& rng);

/// L C L' with C = F C F' + Sigma for F = A - B L. Throws InstabilityError
/// when A - BL is not stable.
Matrix exploration_covariance(const Matrix& gain, const SystemModel& model);

/// Runs `horizon` transitions from x_0 (zero by default). Each step draws
/// the input normals before the process-noise normals, whatever the policy,
/// so policies that share a seed see the same noise sequence.
Trajectory simulate(const SystemModel& model, const Policy& policy, std::size_t horizon, Rng& rng,
                    const TransitionObserver& observer = {}, const std::optional<Vector>& x0 = std::nullopt);

Trajectory simulate(const SystemModel& model, const Policy& policy, std::size_t horizon, std::uint64_t seed);

/// Same loop as simulate without storing the trajectory; returns x_T.
Vector run_closed_loop(const SystemModel& model, const Policy& policy, std::size_t horizon, Rng& rng,
                       const TransitionObserver& observer, const std::optional<Vector>& x0 = std::nullopt);

/// CSV with header t,x_1..x_N,u_1..u_M; the last row (t = T) has empty
/// input fields.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj);
Trajectory read_trajectory_csv(std::istream& in);
Trajectory read_trajectory_csv(const std::filesystem::path& path);

}  // namespace sflqg
