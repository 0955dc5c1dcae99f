#include "sflqg/stats.hpp"

#include "sflqg/errors.hpp"

#include <algorithm>
#include <cmath>

namespace sflqg {

void CompensatedSum::add(double v) noexcept {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
        comp_ += (sum_ - t) + v;
    } else {
        comp_ += (v - t) + sum_;
    }
    sum_ = t;
}

double compensated_mean(const std::vector<double>& values) {
    if (values.empty()) {
        throw DomainError("mean of an empty sample");
    }
    CompensatedSum s;
    for (double v : values) {
        s.add(v);
    }
    return s.value() / static_cast<double>(values.size());
}

double median(std::vector<double> values) {
    if (values.empty()) {
        throw DomainError("median of an empty sample");
    }
    const std::size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
    const double hi = values[mid];
    if (values.size() % 2 == 1) {
        return hi;
    }
    const double lo = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

double kolmogorov_sf(double x) {
    if (x <= 0.0) {
        return 1.0;
    }
    if (x < 0.2) {
        // The alternating series converges slowly here; the value is 1 to
        // double precision anyway.
        return 1.0;
    }
    double acc = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * x * x);
        acc += (k % 2 == 1 ? term : -term);
        if (term < 1e-18) {
            break;
        }
    }
    return std::clamp(2.0 * acc, 0.0, 1.0);
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) {
        throw DomainError("ks_two_sample: both samples must be non-empty");
    }
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0;
    std::size_t j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= v) {
            ++i;
        }
        while (j < b.size() && b[j] <= v) {
            ++j;
        }
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    const double en = std::sqrt(na * nb / (na + nb));
    // Stephens' small-sample correction of the asymptotic argument.
    return KsResult{d, kolmogorov_sf((en + 0.12 + 0.11 / en) * d)};
}

}  // namespace sflqg
