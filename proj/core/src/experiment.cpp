#include "sflqg/experiment.hpp"

#include "sflqg/errors.hpp"
#include "sflqg/matops.hpp"
#include "sflqg/matrix_io.hpp"
#include "sflqg/qlearn.hpp"
#include "sflqg/stats.hpp"
#include "sflqg/sysid.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace sflqg {

namespace {

// Salt separating the CRLB streams from the accuracy-run streams.
constexpr std::uint64_t kCrlbSalt = 0xC71B5EEDULL;

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s, char sep = ',') {
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(s);
    while (std::getline(is, item, sep)) {
        out.push_back(trim(item));
    }
    return out;
}

std::uint64_t parse_uint(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        if (value.empty() || value[0] == '-') {
            throw std::invalid_argument(value);
        }
        const unsigned long long v = std::stoull(value, &used);
        if (used != value.size()) {
            throw std::invalid_argument(value);
        }
        return v;
    } catch (const std::exception&) {
        throw ParseError("config: " + key + " expects a non-negative integer, got \"" + value + "\"");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes" || value == "on") {
        return true;
    }
    if (value == "false" || value == "0" || value == "no" || value == "off") {
        return false;
    }
    throw ParseError("config: " + key + " expects true or false, got \"" + value + "\"");
}

// Runs fn(i) for i in [0, count) on up to `threads` workers. The first
// exception thrown by any task is rethrown after all workers stop.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn) {
    if (threads == 0) {
        threads = std::max(1u, std::thread::hardware_concurrency());
    }
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(count, 1)));
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count || stop.load()) {
                return;
            }
            try {
                fn(i);
            } catch (...) {
                const std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) {
                    failure = std::current_exception();
                }
                stop.store(true);
            }
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (unsigned t = 0; t < threads; ++t) {
            pool.emplace_back(worker);
        }
        for (auto& th : pool) {
            th.join();
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

struct RunOutcome {
    bool ok = false;
    std::vector<double> sq_error;
    std::vector<double> frobenius;
};

template <typename Estimator>
RunOutcome run_method(const ExperimentConfig& cfg, const Matrix& p_star, const Matrix& input_cov, std::size_t run) {
    const Index n = cfg.system.state_dim();
    const Index m = cfg.system.input_dim();
    Estimator est(cfg.cost, n, m);
    Policy policy = RandomGaussian{input_cov};
    if (cfg.policy == PolicyKind::Switched) {
        policy = Switched{input_cov, cfg.switch_time, [&est]() -> std::optional<Matrix> { return est.gain_hat(); }};
    }
    const Vector p_star_vec = sym_vec(p_star).data;
    RunOutcome out;
    out.sq_error.reserve(cfg.checkpoints.size());
    out.frobenius.reserve(cfg.checkpoints.size());
    std::size_t t = 0;
    std::size_t next_cp = 0;
    Rng rng = Rng::stream(cfg.seed, run);
    try {
        run_closed_loop(cfg.system, policy, cfg.horizon, rng, [&](const Vector& x, const Vector& u, const Vector& xn) {
            est.observe(x, u, xn);
            ++t;
            if (next_cp < cfg.checkpoints.size() && cfg.checkpoints[next_cp] == t) {
                if (!est.ready()) {
                    throw InsufficientExcitationError("estimator not initialized at checkpoint " + std::to_string(t));
                }
                const Matrix& p = est.p_hat();
                if (!p.allFinite()) {
                    throw NumericError("non-finite estimate");
                }
                out.sq_error.push_back((sym_vec(p).data - p_star_vec).squaredNorm());
                out.frobenius.push_back((p - p_star).norm());
                ++next_cp;
            }
        });
    } catch (const Error&) {
        return RunOutcome{};
    }
    out.ok = true;
    return out;
}

// Exact Gaussian log-likelihood of T transitions summarized by the Gram
// matrix G of z_t = [x_t; u_t; x_{t+1}], up to the constant term.
double gram_loglik(const Matrix& a, const Matrix& b, const Matrix& sigma, const Matrix& gram, double t) {
    const Index n = a.rows();
    Matrix k(n, gram.rows());
    k << -a, -b, Matrix::Identity(n, n);
    const Matrix scatter = k * gram * k.transpose();
    const Eigen::LLT<Matrix> llt(sigma);
    if (llt.info() != Eigen::Success) {
        throw NumericError("CRLB: perturbed Sigma lost positive definiteness");
    }
    const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    return -0.5 * t * log_det - 0.5 * llt.solve(scatter).trace();
}

struct ParamLayout {
    Index n = 0;
    Index m = 0;
    Index count() const { return n * n + n * m + tri_size(n); }
};

// Writes parameter vector theta into (A, B, Sigma).
void unpack(const ParamLayout& lay, const Vector& theta, Matrix& a, Matrix& b, Matrix& sigma) {
    a = Eigen::Map<const Matrix>(theta.data(), lay.n, lay.n);
    b = Eigen::Map<const Matrix>(theta.data() + lay.n * lay.n, lay.n, lay.m);
    sigma = sym_unvec(Vector(theta.tail(tri_size(lay.n))));
}

Vector pack(const SystemModel& model) {
    const ParamLayout lay{model.state_dim(), model.input_dim()};
    Vector theta(lay.count());
    theta << Eigen::Map<const Vector>(model.a().data(), model.a().size()),
        Eigen::Map<const Vector>(model.b().data(), model.b().size()), sym_vec(model.sigma()).data;
    return theta;
}

// Central-difference step per parameter: 1e-5 times the magnitude of the
// block the parameter belongs to.
Vector fd_steps(const SystemModel& model) {
    const Index n = model.state_dim();
    const Index m = model.input_dim();
    const auto block_scale = [](const Matrix& x) { return std::max(x.cwiseAbs().maxCoeff(), 1e-12); };
    Vector h(n * n + n * m + tri_size(n));
    h.head(n * n).setConstant(1e-5 * block_scale(model.a()));
    h.segment(n * n, n * m).setConstant(1e-5 * block_scale(model.b()));
    h.tail(tri_size(n)).setConstant(1e-5 * block_scale(model.sigma()));
    return h;
}

std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::string to_string(Method m) { return m == Method::SysIdLqg ? "sysid_lqg" : "qlearn"; }

Method parse_method(const std::string& name) {
    if (name == "sysid_lqg" || name == "sysid") {
        return Method::SysIdLqg;
    }
    if (name == "qlearn") {
        return Method::QLearning;
    }
    throw ParseError("unknown method \"" + name + "\" (expected sysid_lqg or qlearn)");
}

Preset preset(const std::string& name) {
    if (name != "hagen1998") {
        throw DomainError("unknown system preset \"" + name + "\"");
    }
    Matrix a(2, 2);
    a << -0.6, -0.4, 1.0, 0.0;
    Matrix b(2, 1);
    b << 0.0, 1.0;
    return Preset{SystemModel(a, b, 0.01 * Matrix::Identity(2, 2)),
                  CostSpec(Matrix::Identity(2, 2), Matrix::Identity(1, 1), 0.99)};
}

std::vector<std::size_t> default_checkpoints(std::size_t horizon) {
    static const std::size_t grid[] = {50, 100, 200, 500, 1000, 2000, 5000, 10000, 20000};
    std::vector<std::size_t> out;
    for (std::size_t t : grid) {
        if (t <= horizon) {
            out.push_back(t);
        }
    }
    if (out.empty() || out.back() != horizon) {
        out.push_back(horizon);
    }
    return out;
}

void ExperimentConfig::validate() const {
    if (runs < 1) {
        throw ExperimentError("runs must be at least 1");
    }
    if (horizon < 1) {
        throw ExperimentError("horizon must be at least 1");
    }
    if (methods.empty()) {
        throw ExperimentError("no methods selected");
    }
    if (cost.state_dim() != system.state_dim() || cost.input_dim() != system.input_dim()) {
        throw ExperimentError("cost weights do not match the system dimensions");
    }
    if (checkpoints.empty()) {
        throw ExperimentError("no checkpoints");
    }
    for (std::size_t i = 0; i < checkpoints.size(); ++i) {
        if (checkpoints[i] < 1 || checkpoints[i] > horizon) {
            throw ExperimentError("checkpoint " + std::to_string(checkpoints[i]) + " outside [1, horizon]");
        }
        if (i > 0 && checkpoints[i] <= checkpoints[i - 1]) {
            throw ExperimentError("checkpoints must be strictly increasing");
        }
    }
    if (input_cov && (input_cov->rows() != system.input_dim() || input_cov->cols() != system.input_dim())) {
        throw ExperimentError("input covariance must be MxM");
    }
}

ExperimentConfig default_config() {
    ExperimentConfig cfg;
    const Preset p = preset("hagen1998");
    cfg.system = p.system;
    cfg.cost = p.cost;
    cfg.checkpoints = default_checkpoints(cfg.horizon);
    return cfg;
}

ExperimentConfig parse_config(std::istream& in, const std::filesystem::path& base_dir) {
    std::map<std::string, std::string> kv;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ParseError("config line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        if (key.empty() || kv.count(key) != 0) {
            throw ParseError("config line " + std::to_string(line_no) + ": empty or repeated key \"" + key + "\"");
        }
        kv[key] = trim(line.substr(eq + 1));
    }

    ExperimentConfig cfg = default_config();
    const auto resolve = [&](const std::string& p) {
        const std::filesystem::path path(p);
        return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
    };
    std::optional<std::string> stride;
    for (const auto& [key, value] : kv) {
        if (key == "system") {
            cfg.system_name = value;
            if (value != "hagen1998") {
                const auto blocks = read_matrix_file(resolve(value));
                if (blocks.size() != 3) {
                    throw ParseError("system file must hold three matrices A, B, Sigma");
                }
                cfg.system = SystemModel(blocks[0], blocks[1], blocks[2]);
            }
        } else if (key == "cost") {
            const auto blocks = read_matrix_file(resolve(value));
            if (blocks.size() != 3 || blocks[2].size() != 1) {
                throw ParseError("cost file must hold Q, R and a 1x1 gamma");
            }
            cfg.cost = CostSpec(blocks[0], blocks[1], blocks[2](0, 0));
        } else if (key == "horizon") {
            cfg.horizon = parse_uint(key, value);
        } else if (key == "runs") {
            cfg.runs = parse_uint(key, value);
        } else if (key == "seed") {
            cfg.seed = parse_uint(key, value);
        } else if (key == "policy") {
            if (value == "random") {
                cfg.policy = PolicyKind::Random;
            } else if (value == "switched") {
                cfg.policy = PolicyKind::Switched;
            } else {
                throw ParseError("config: policy must be random or switched");
            }
        } else if (key == "switch_time") {
            cfg.switch_time = parse_uint(key, value);
        } else if (key == "methods") {
            cfg.methods.clear();
            for (const auto& item : split_list(value)) {
                const Method m = parse_method(item);
                if (std::find(cfg.methods.begin(), cfg.methods.end(), m) == cfg.methods.end()) {
                    cfg.methods.push_back(m);
                }
            }
        } else if (key == "checkpoints" || key == "record") {
            cfg.checkpoints.clear();
            for (const auto& item : split_list(value)) {
                cfg.checkpoints.push_back(parse_uint(key, item));
            }
        } else if (key == "record_stride") {
            stride = value;
        } else if (key == "threads") {
            cfg.threads = static_cast<unsigned>(parse_uint(key, value));
        } else if (key == "crlb") {
            cfg.crlb = parse_bool(key, value);
        } else if (key == "crlb_runs") {
            cfg.crlb_runs = parse_uint(key, value);
        } else {
            throw ParseError("config: unknown key \"" + key + "\"");
        }
    }
    if (stride) {
        if (kv.count("checkpoints") != 0 || kv.count("record") != 0) {
            throw ParseError("config: give either checkpoints or record_stride, not both");
        }
        const std::uint64_t s = parse_uint("record_stride", *stride);
        if (s == 0) {
            throw ParseError("config: record_stride must be positive");
        }
        cfg.checkpoints.clear();
        for (std::size_t t = s; t <= cfg.horizon; t += s) {
            cfg.checkpoints.push_back(t);
        }
    } else if (kv.count("checkpoints") == 0 && kv.count("record") == 0) {
        cfg.checkpoints = default_checkpoints(cfg.horizon);
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open config " + path.string());
    }
    return parse_config(in, path.parent_path());
}

const MethodStats& ExperimentResult::stats(Method m) const {
    for (const auto& s : methods) {
        if (s.method == m) {
            return s;
        }
    }
    throw DomainError("method " + to_string(m) + " was not run");
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const DareSolution truth = solve_dare(cfg.system.a(), cfg.system.b(), cfg.cost);
    const Matrix input_cov = cfg.input_cov ? *cfg.input_cov : exploration_covariance(truth.gain, cfg.system);

    ExperimentResult result;
    result.p_star = truth.p;
    result.input_cov = input_cov;
    result.records.resize(cfg.checkpoints.size());
    for (std::size_t k = 0; k < cfg.checkpoints.size(); ++k) {
        result.records[k].t = cfg.checkpoints[k];
    }

    for (const Method method : cfg.methods) {
        std::vector<RunOutcome> outcomes(cfg.runs);
        parallel_for(cfg.runs, cfg.threads, [&](std::size_t r) {
            outcomes[r] = method == Method::SysIdLqg ? run_method<SysIdLqgEstimator>(cfg, truth.p, input_cov, r)
                                                     : run_method<QLearningEstimator>(cfg, truth.p, input_cov, r);
        });
        MethodStats stats;
        stats.method = method;
        for (const auto& o : outcomes) {
            stats.excluded += o.ok ? 0 : 1;
        }
        if (stats.excluded * 20 > cfg.runs) {
            throw ExperimentError(to_string(method) + ": " + std::to_string(stats.excluded) + " of " +
                                  std::to_string(cfg.runs) + " runs failed (more than 5%)");
        }
        if (stats.excluded == cfg.runs) {
            throw ExperimentError(to_string(method) + ": every run failed");
        }
        for (std::size_t k = 0; k < cfg.checkpoints.size(); ++k) {
            CompensatedSum sum;
            std::vector<double> frob;
            frob.reserve(cfg.runs);
            for (const auto& o : outcomes) {
                if (o.ok) {
                    sum.add(o.sq_error[k]);
                    frob.push_back(o.frobenius[k]);
                }
            }
            const double e = sum.value() / static_cast<double>(frob.size());
            (method == Method::SysIdLqg ? result.records[k].e_sysid : result.records[k].e_qlearn) = e;
            stats.median_frobenius.push_back(median(std::move(frob)));
        }
        result.methods.push_back(std::move(stats));
    }

    if (cfg.crlb) {
        const std::size_t runs = cfg.crlb_runs == 0 ? cfg.runs : cfg.crlb_runs;
        const auto crlb = estimate_crlb_trace(cfg.system, cfg.cost, input_cov, cfg.checkpoints, runs, cfg.seed,
                                              cfg.threads);
        for (std::size_t k = 0; k < crlb.size(); ++k) {
            result.records[k].crlb = crlb[k];
        }
    }
    return result;
}

Matrix crlb_jacobian(const SystemModel& model, const CostSpec& cost) {
    const ParamLayout lay{model.state_dim(), model.input_dim()};
    const Vector theta = pack(model);
    const Vector h = fd_steps(model);
    DareOptions opts;
    opts.tol = 1e-13;
    const Matrix p_star = solve_dare(model.a(), model.b(), cost, opts).p;
    Matrix jac = Matrix::Zero(tri_size(lay.n), lay.count());
    Matrix a;
    Matrix b;
    Matrix sigma;
    // Only (A, B) enter the Riccati equation; the Sigma columns stay zero.
    for (Index i = 0; i < lay.n * lay.n + lay.n * lay.m; ++i) {
        Vector plus = theta;
        Vector minus = theta;
        plus(i) += h(i);
        minus(i) -= h(i);
        unpack(lay, plus, a, b, sigma);
        const Vector p_plus = sym_vec(solve_dare(a, b, cost, p_star, opts).p).data;
        unpack(lay, minus, a, b, sigma);
        const Vector p_minus = sym_vec(solve_dare(a, b, cost, p_star, opts).p).data;
        jac.col(i) = (p_plus - p_minus) / (2.0 * h(i));
    }
    return jac;
}

std::vector<double> estimate_crlb_trace(const SystemModel& model, const CostSpec& cost, const Matrix& input_cov,
                                        const std::vector<std::size_t>& checkpoints, std::size_t runs,
                                        std::uint64_t seed, unsigned threads) {
    if (checkpoints.empty() || !std::is_sorted(checkpoints.begin(), checkpoints.end()) || checkpoints.front() < 1) {
        throw DomainError("estimate_crlb_trace: checkpoints must be positive and sorted");
    }
    const ParamLayout lay{model.state_dim(), model.input_dim()};
    const Index p = lay.count();
    if (runs < static_cast<std::size_t>(p)) {
        throw DomainError("estimate_crlb_trace: need at least " + std::to_string(p) + " runs");
    }
    const Vector theta = pack(model);
    const Vector h = fd_steps(model);
    const Index zdim = 2 * lay.n + lay.m;

    // scores[r][k] = finite-difference score of run r at checkpoint k.
    std::vector<std::vector<Vector>> scores(runs);
    parallel_for(runs, threads, [&](std::size_t r) {
        Rng rng = Rng::stream(seed ^ kCrlbSalt, r);
        Matrix gram = Matrix::Zero(zdim, zdim);
        Vector z(zdim);
        std::size_t t = 0;
        std::size_t next_cp = 0;
        Matrix a;
        Matrix b;
        Matrix sigma;
        run_closed_loop(model, RandomGaussian{input_cov}, checkpoints.back(), rng,
                        [&](const Vector& x, const Vector& u, const Vector& xn) {
                            z << x, u, xn;
                            gram.noalias() += z * z.transpose();
                            ++t;
                            while (next_cp < checkpoints.size() && checkpoints[next_cp] == t) {
                                Vector score(p);
                                for (Index i = 0; i < p; ++i) {
                                    Vector plus = theta;
                                    Vector minus = theta;
                                    plus(i) += h(i);
                                    minus(i) -= h(i);
                                    unpack(lay, plus, a, b, sigma);
                                    const double lp = gram_loglik(a, b, sigma, gram, static_cast<double>(t));
                                    unpack(lay, minus, a, b, sigma);
                                    const double lm = gram_loglik(a, b, sigma, gram, static_cast<double>(t));
                                    score(i) = (lp - lm) / (2.0 * h(i));
                                }
                                scores[r].push_back(std::move(score));
                                ++next_cp;
                            }
                        });
    });

    const Matrix jac = crlb_jacobian(model, cost);
    std::vector<double> out;
    out.reserve(checkpoints.size());
    for (std::size_t k = 0; k < checkpoints.size(); ++k) {
        Matrix fisher = Matrix::Zero(p, p);
        for (std::size_t r = 0; r < runs; ++r) {
            fisher.noalias() += scores[r][k] * scores[r][k].transpose();
        }
        fisher /= static_cast<double>(runs);
        fisher = 0.5 * (fisher + fisher.transpose());
        Eigen::SelfAdjointEigenSolver<Matrix> es(fisher, Eigen::EigenvaluesOnly);
        const auto& ev = es.eigenvalues();
        if (!(ev(0) > 1e-12 * ev(ev.size() - 1))) {
            throw NumericError("estimate_crlb_trace: Fisher information estimate is numerically singular at T = " +
                               std::to_string(checkpoints[k]) + "; increase runs");
        }
        const Matrix cov = fisher.ldlt().solve(jac.transpose());
        out.push_back((jac * cov).trace());
    }
    return out;
}

void emit_results(std::ostream& out, const std::vector<AccuracyRecord>& records) {
    if (records.empty()) {
        throw DomainError("emit_results: no records");
    }
    const bool with_crlb = std::any_of(records.begin(), records.end(), [](const auto& r) { return r.crlb.has_value(); });
    const auto field = [](const std::optional<double>& v) { return v ? format_g17(*v) : std::string{}; };
    out << "T,e_sysid,e_qlearn" << (with_crlb ? ",crlb" : "") << '\n';
    for (const auto& r : records) {
        out << r.t << ',' << field(r.e_sysid) << ',' << field(r.e_qlearn);
        if (with_crlb) {
            out << ',' << field(r.crlb);
        }
        out << '\n';
    }
}

void emit_results(const std::filesystem::path& path, const std::vector<AccuracyRecord>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    emit_results(out, records);
    out.flush();
    if (!out) {
        throw IoError("write failed: " + path.string());
    }
}

std::vector<AccuracyRecord> read_results(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) {
        throw ParseError("results CSV is empty");
    }
    line = trim(line);
    bool with_crlb = false;
    if (line == "T,e_sysid,e_qlearn,crlb") {
        with_crlb = true;
    } else if (line != "T,e_sysid,e_qlearn") {
        throw ParseError("unexpected results header \"" + line + "\"");
    }
    const auto value = [](const std::string& s) -> std::optional<double> {
        if (s.empty()) {
            return std::nullopt;
        }
        char* end = nullptr;
        const double v = std::strtod(s.c_str(), &end);
        if (end != s.c_str() + s.size()) {
            throw ParseError("bad number \"" + s + "\" in results CSV");
        }
        return v;
    };
    std::vector<AccuracyRecord> out;
    while (std::getline(in, line)) {
        if (trim(line).empty()) {
            continue;
        }
        std::vector<std::string> fields = split_list(line);
        if (!line.empty() && line.back() == ',') {
            fields.emplace_back();
        }
        if (fields.size() != (with_crlb ? 4u : 3u)) {
            throw ParseError("results row has the wrong number of fields: \"" + line + "\"");
        }
        AccuracyRecord r;
        r.t = parse_uint("T", fields[0]);
        r.e_sysid = value(fields[1]);
        r.e_qlearn = value(fields[2]);
        if (with_crlb) {
            r.crlb = value(fields[3]);
        }
        out.push_back(r);
    }
    return out;
}

}  // namespace sflqg
