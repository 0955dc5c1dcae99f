#include "sflqg/sim.hpp"

#include "sflqg/errors.hpp"
#include "sflqg/matops.hpp"

#include <Eigen/Cholesky>

#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>

namespace sflqg {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, ',')) {
        const auto b = field.find_first_not_of(" \t\r");
        const auto e = field.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? std::string{} : field.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') {
        out.emplace_back();
    }
    return out;
}

double parse_double(const std::string& s, std::size_t line_no) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) {
            throw std::invalid_argument(s);
        }
        return v;
    } catch (const std::exception&) {
        throw ParseError("trajectory line " + std::to_string(line_no) + ": bad number \"" + s + "\"");
    }
}

}  // namespace

SystemModel::SystemModel(const Matrix& a, const Matrix& b, const Matrix& sigma, bool require_pd)
    : a_(a), b_(b) {
    const Index n = a.rows();
    if (a.cols() != n || n == 0) {
        throw DimensionError("A must be a non-empty square matrix");
    }
    if (b.rows() != n) {
        throw DimensionError("B must have as many rows as A");
    }
    if (sigma.rows() != n || sigma.cols() != n) {
        throw DimensionError("Sigma must be NxN");
    }
    try {
        (void)gauss_solve(a, Matrix::Identity(n, n));
    } catch (const SingularMatrixError&) {
        throw SingularMatrixError("A must be nonsingular");
    }
    sigma_ = symmetrized(sigma);
    if (require_pd) {
        require_positive_definite(sigma_, "Sigma");
        noise_factor_ = Eigen::LLT<Matrix>(sigma_).matrixL();
    } else {
        if (min_eigenvalue(sigma_) < -1e-12 * std::max(1.0, sigma_.norm())) {
            throw PositivityError("Sigma must be positive semi-definite");
        }
        noise_factor_ = sym_sqrt(sigma_);
    }
}

SystemModel::SystemModel(const Matrix& a, const Matrix& b, const Matrix& sigma) : SystemModel(a, b, sigma, true) {}

SystemModel SystemModel::with_psd_noise(const Matrix& a, const Matrix& b, const Matrix& sigma) {
    return SystemModel(a, b, sigma, false);
}

Rng::Rng(std::uint64_t seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    engine_.seed(seq);
}

Rng Rng::stream(std::uint64_t base_seed, std::uint64_t index) {
    return Rng(splitmix64(splitmix64(base_seed) ^ splitmix64(index + 0x632BE59BD9B4E019ULL)));
}

double Rng::normal() { return normal_(engine_); }

Vector Rng::normal_vector(Index n) {
    Vector z(n);
    for (Index i = 0; i < n; ++i) {
        z(i) = normal_(engine_);
    }
    return z;
}

Vector Trajectory::regressor(std::size_t t) const {
    const Index n = states[t].size();
    const Index m = inputs[t].size();
    Vector xi(n + m);
    xi.head(n) = states[t];
    xi.tail(m) = inputs[t];
    return xi;
}

Trajectory Trajectory::prefix(std::size_t transitions) const {
    if (transitions > horizon()) {
        throw DimensionError("prefix longer than trajectory");
    }
    Trajectory out;
    out.states.assign(states.begin(), states.begin() + static_cast<std::ptrdiff_t>(transitions + 1));
    out.inputs.assign(inputs.begin(), inputs.begin() + static_cast<std::ptrdiff_t>(transitions));
    return out;
}

Vector step(const Vector& x, const Vector& u, const SystemModel& model, Rng& rng) {
    if (x.size() != model.state_dim() || u.size() != model.input_dim()) {
        throw DimensionError("step: state/input dimension mismatch");
    }
    return model.a() * x + model.b() * u + model.noise_factor() * rng.normal_vector(model.state_dim());
}

Matrix exploration_covariance(const Matrix& gain, const SystemModel& model) {
    if (gain.rows() != model.input_dim() || gain.cols() != model.state_dim()) {
        throw DimensionError("exploration_covariance: gain must be MxN");
    }
    const Matrix closed = model.a() - model.b() * gain;
    const Matrix c = discrete_lyapunov(closed, model.sigma());
    const Matrix cov = gain * c * gain.transpose();
    return 0.5 * (cov + cov.transpose());
}

Vector run_closed_loop(const SystemModel& model, const Policy& policy, std::size_t horizon, Rng& rng,
                       const TransitionObserver& observer, const std::optional<Vector>& x0) {
    if (horizon < 1) {
        throw DimensionError("simulate: horizon must be at least 1");
    }
    const Index n = model.state_dim();
    const Index m = model.input_dim();

    Matrix input_factor = Matrix::Zero(m, m);
    if (const auto* rnd = std::get_if<RandomGaussian>(&policy)) {
        input_factor = sym_sqrt(rnd->cov);
    } else if (const auto* sw = std::get_if<Switched>(&policy)) {
        input_factor = sym_sqrt(sw->cov);
    } else if (const auto* fb = std::get_if<LinearFeedback>(&policy)) {
        if (fb->gain.rows() != m || fb->gain.cols() != n) {
            throw DimensionError("simulate: feedback gain must be MxN");
        }
    }
    if (input_factor.rows() != m) {
        throw DimensionError("simulate: input covariance must be MxM");
    }

    Vector x = x0.value_or(Vector::Zero(n));
    if (x.size() != n) {
        throw DimensionError("simulate: x0 has wrong dimension");
    }
    for (std::size_t t = 0; t < horizon; ++t) {
        const Vector z = rng.normal_vector(m);
        Vector u = input_factor * z;
        if (const auto* fb = std::get_if<LinearFeedback>(&policy)) {
            u = -fb->gain * x;
        } else if (const auto* sw = std::get_if<Switched>(&policy)) {
            if (t >= sw->switch_time && sw->gain) {
                if (const auto l = sw->gain()) {
                    if (!l->allFinite()) {
                        throw NumericError("simulate: gain provider returned a non-finite gain");
                    }
                    u = -(*l) * x;
                }
            }
        }
        Vector next = step(x, u, model, rng);
        if (observer) {
            observer(x, u, next);
        }
        x = std::move(next);
    }
    return x;
}

Trajectory simulate(const SystemModel& model, const Policy& policy, std::size_t horizon, Rng& rng,
                    const TransitionObserver& observer, const std::optional<Vector>& x0) {
    Trajectory traj;
    traj.states.reserve(horizon + 1);
    traj.inputs.reserve(horizon);
    traj.states.push_back(x0.value_or(Vector::Zero(model.state_dim())));
    run_closed_loop(model, policy, horizon, rng,
                    [&](const Vector& x, const Vector& u, const Vector& next) {
                        traj.inputs.push_back(u);
                        traj.states.push_back(next);
                        if (observer) {
                            observer(x, u, next);
                        }
                    },
                    x0);
    return traj;
}

Trajectory simulate(const SystemModel& model, const Policy& policy, std::size_t horizon, std::uint64_t seed) {
    Rng rng(seed);
    return simulate(model, policy, horizon, rng);
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
    const Index n = traj.state_dim();
    const Index m = traj.input_dim();
    out << 't';
    for (Index i = 1; i <= n; ++i) {
        out << ",x_" << i;
    }
    for (Index i = 1; i <= m; ++i) {
        out << ",u_" << i;
    }
    out << '\n';
    const auto prec = out.precision();
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (std::size_t t = 0; t < traj.states.size(); ++t) {
        out << t;
        for (Index i = 0; i < n; ++i) {
            out << ',' << traj.states[t](i);
        }
        for (Index i = 0; i < m; ++i) {
            out << ',';
            if (t < traj.inputs.size()) {
                out << traj.inputs[t](i);
            }
        }
        out << '\n';
    }
    out.precision(prec);
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    write_trajectory_csv(out, traj);
    if (!out) {
        throw IoError("write failed: " + path.string());
    }
}

Trajectory read_trajectory_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) {
        throw ParseError("trajectory CSV is empty");
    }
    const auto header = split_csv(line);
    if (header.empty() || header[0] != "t") {
        throw ParseError("trajectory CSV must start with column \"t\"");
    }
    Index n = 0;
    Index m = 0;
    for (std::size_t i = 1; i < header.size(); ++i) {
        if (header[i].rfind("x_", 0) == 0 && m == 0) {
            ++n;
        } else if (header[i].rfind("u_", 0) == 0) {
            ++m;
        } else {
            throw ParseError("unexpected trajectory column \"" + header[i] + "\"");
        }
    }
    if (n == 0) {
        throw ParseError("trajectory CSV has no state columns");
    }

    Trajectory traj;
    bool inputs_ended = false;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        const auto fields = split_csv(line);
        if (fields.size() != static_cast<std::size_t>(1 + n + m)) {
            throw ParseError("trajectory line " + std::to_string(line_no) + ": expected " +
                             std::to_string(1 + n + m) + " fields");
        }
        if (inputs_ended) {
            throw ParseError("trajectory line " + std::to_string(line_no) + ": rows after the final state");
        }
        Vector x(n);
        for (Index i = 0; i < n; ++i) {
            x(i) = parse_double(fields[static_cast<std::size_t>(1 + i)], line_no);
        }
        traj.states.push_back(std::move(x));
        const bool empty_input = m > 0 && fields[static_cast<std::size_t>(1 + n)].empty();
        if (empty_input || m == 0) {
            inputs_ended = true;
            continue;
        }
        Vector u(m);
        for (Index i = 0; i < m; ++i) {
            u(i) = parse_double(fields[static_cast<std::size_t>(1 + n + i)], line_no);
        }
        traj.inputs.push_back(std::move(u));
    }
    if (traj.states.size() != traj.inputs.size() + 1) {
        throw ParseError("trajectory must end with a state-only row");
    }
    return traj;
}

Trajectory read_trajectory_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return read_trajectory_csv(in);
}

}  // namespace sflqg
