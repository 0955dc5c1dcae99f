#pragma once

#include "sflqg/types.hpp"

#include <boost/rational.hpp>

#include <cstdint>
#include <string>
#include <vector>

// Closed-form multiplication counts per sample time for both estimators, in
// exact rational arithmetic, and a runtime audit against the instrumented
// kernels.
namespace sflqg {

using Rational = boost::rational<std::int64_t>;

struct CostItem {
    std::string label;
    Rational count;
};

struct CostBreakdown {
    std::vector<CostItem> items;
    Rational total;

    /// Builds the breakdown with total = sum of items.
    static CostBreakdown from_items(std::vector<CostItem> items);
};

/// (4N^3 + 9N^2 - 5N) / 6. Throws DomainError for N < 1 (as do the others).
Rational gauss_cost(std::int64_t n);

/// RLLS(a, b) = a b (3a + 4): a = regressor size, b = output size.
Rational rlls_cost(std::int64_t a, std::int64_t b);

/// 2N^3 + N^2 + 3N^2 M + N M^2 + M^2 + N GAUSS(M).
Rational dare_cost(std::int64_t n, std::int64_t m);

/// 2N^2 M + N M (1 + M) + N GAUSS(M).
Rational gain_cost(std::int64_t n, std::int64_t m);

CostBreakdown classic_cost(std::int64_t n, std::int64_t m);
CostBreakdown qlearn_cost(std::int64_t n, std::int64_t m);

struct GridRow {
    std::int64_t n = 0;
    std::int64_t m = 0;
    Rational classic;
    Rational qlearn;
};

/// Every (N, M) with 1 <= N <= n_max, 1 <= M <= m_max, N-major.
std::vector<GridRow> cost_grid(std::int64_t n_max, std::int64_t m_max);

/// Decimal rendering with `places` digits, rounding half up.
std::string format_decimal(const Rational& r, int places = 2);

double to_double(const Rational& r);

struct AuditResult {
    std::uint64_t classic_measured = 0;
    std::uint64_t qlearn_measured = 0;
};

/// Runs both online estimators on a fixed pseudo-random stable N x M plant
/// for `traj_len` transitions and returns the multiplications counted during
/// the final transition. Deterministic for given arguments.
AuditResult instrumented_count_audit(Index n, Index m, std::size_t traj_len, std::uint64_t seed = 7);

}  // namespace sflqg
