#include "sflqg/opcount.hpp"

#include "sflqg/errors.hpp"
#include "sflqg/qlearn.hpp"
#include "sflqg/riccati.hpp"
#include "sflqg/sim.hpp"
#include "sflqg/sysid.hpp"

#include <Eigen/QR>

#include <cstdlib>

namespace sflqg {

namespace {

void require_positive(std::int64_t v, const char* what) {
    if (v < 1) {
        throw DomainError(std::string(what) + " must be at least 1");
    }
}

}  // namespace

CostBreakdown CostBreakdown::from_items(std::vector<CostItem> items) {
    CostBreakdown out;
    out.total = 0;
    for (const auto& item : items) {
        out.total += item.count;
    }
    out.items = std::move(items);
    return out;
}

Rational gauss_cost(std::int64_t n) {
    require_positive(n, "N");
    return Rational(4 * n * n * n + 9 * n * n - 5 * n, 6);
}

Rational rlls_cost(std::int64_t a, std::int64_t b) {
    require_positive(a, "a");
    require_positive(b, "b");
    return Rational(a * b * (3 * a + 4));
}

Rational dare_cost(std::int64_t n, std::int64_t m) {
    require_positive(n, "N");
    require_positive(m, "M");
    return Rational(2 * n * n * n + n * n + 3 * n * n * m + n * m * m + m * m) + Rational(n) * gauss_cost(m);
}

Rational gain_cost(std::int64_t n, std::int64_t m) {
    require_positive(n, "N");
    require_positive(m, "M");
    return Rational(2 * n * n * m + n * m * (1 + m)) + Rational(n) * gauss_cost(m);
}

CostBreakdown classic_cost(std::int64_t n, std::int64_t m) {
    return CostBreakdown::from_items({
        {"rls update", rlls_cost(n + m, n)},
        {"riccati step", dare_cost(n, m)},
        {"gain", gain_cost(n, m)},
    });
}

CostBreakdown qlearn_cost(std::int64_t n, std::int64_t m) {
    require_positive(n, "N");
    require_positive(m, "M");
    const std::int64_t d = (n + m) * (n + m + 1) / 2 + 1;
    const std::int64_t tn = n * (n + 1) / 2;
    return CostBreakdown::from_items({
        {"feature", Rational(d - 1)},
        {"stage cost", Rational(n * n + n + m * m + m)},
        {"next-state product", Rational(tn)},
        {"M phi", Rational(d)},
        {"phi' M phi", Rational(d)},
        {"gain vector", Rational(2 * d)},
        {"inverse Gram update", Rational(d * d)},
        {"vartheta update", Rational(d * (d + 1))},
        {"Theta update", Rational(d * (d + 1) * tn)},
        {"P extraction", Rational(n * m * m) + Rational(n) * gauss_cost(m)},
        {"theta assembly", Rational(d * tn)},
    });
}

std::vector<GridRow> cost_grid(std::int64_t n_max, std::int64_t m_max) {
    require_positive(n_max, "N_max");
    require_positive(m_max, "M_max");
    std::vector<GridRow> rows;
    for (std::int64_t n = 1; n <= n_max; ++n) {
        for (std::int64_t m = 1; m <= m_max; ++m) {
            rows.push_back({n, m, classic_cost(n, m).total, qlearn_cost(n, m).total});
        }
    }
    return rows;
}

std::string format_decimal(const Rational& r, int places) {
    if (places < 0 || places > 15) {
        throw DomainError("format_decimal: places out of range");
    }
    std::int64_t scale = 1;
    for (int i = 0; i < places; ++i) {
        scale *= 10;
    }
    const bool negative = r < 0;
    const Rational mag = negative ? -r : r;
    // floor(mag * scale + 1/2)
    const Rational scaled = mag * scale + Rational(1, 2);
    const std::int64_t rounded = scaled.numerator() / scaled.denominator();
    std::string digits = std::to_string(rounded / scale);
    if (places > 0) {
        std::string frac = std::to_string(rounded % scale);
        frac.insert(0, static_cast<std::size_t>(places) - frac.size(), '0');
        digits += "." + frac;
    }
    return (negative && rounded != 0 ? "-" : "") + digits;
}

double to_double(const Rational& r) { return boost::rational_cast<double>(r); }

AuditResult instrumented_count_audit(Index n, Index m, std::size_t traj_len, std::uint64_t seed) {
    if (n < 1 || m < 1) {
        throw DomainError("instrumented_count_audit: N and M must be at least 1");
    }
    if (traj_len < 2) {
        throw DomainError("instrumented_count_audit: need at least two transitions");
    }
    Rng rng(seed);
    Matrix g(n, n);
    for (Index i = 0; i < g.size(); ++i) {
        g.data()[i] = rng.normal();
    }
    const Matrix orth = Eigen::HouseholderQR<Matrix>(g).householderQ();
    const Matrix a = 0.8 * orth;
    Matrix b(n, m);
    for (Index i = 0; i < b.size(); ++i) {
        b.data()[i] = rng.normal();
    }
    const SystemModel model(a, b, 0.01 * Matrix::Identity(n, n));
    const CostSpec cost(Matrix::Identity(n, n), Matrix::Identity(m, m), 0.99);

    SysIdLqgEstimator classic(cost, n, m);
    QLearningEstimator qlearn(cost, n, m);
    AuditResult out;
    std::size_t step_index = 0;
    run_closed_loop(model, RandomGaussian{Matrix::Identity(m, m)}, traj_len, rng,
                    [&](const Vector& x, const Vector& u, const Vector& x_next) {
                        ++step_index;
                        if (step_index < traj_len) {
                            classic.observe(x, u, x_next);
                            qlearn.observe(x, u, x_next);
                            return;
                        }
                        if (!classic.ready() || !qlearn.ready()) {
                            throw InsufficientExcitationError(
                                "instrumented_count_audit: trajectory too short to initialize both estimators");
                        }
                        MulCounter c;
                        MulCounter q;
                        classic.observe(x, u, x_next, &c);
                        qlearn.observe(x, u, x_next, &q);
                        out.classic_measured = c.count;
                        out.qlearn_measured = q.count;
                    });
    return out;
}

}  // namespace sflqg
