#pragma once

#include <cstddef>
#include <vector>

namespace sflqg {

/// Neumaier-compensated running sum.
class CompensatedSum {
public:
    void add(double v) noexcept;
    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

double compensated_mean(const std::vector<double>& values);

/// Median (mean of the two middle values for even sizes). Throws
/// DomainError on empty input.
double median(std::vector<double> values);

struct KsResult {
    double statistic = 0.0;
    /// Asymptotic p-value from the Kolmogorov distribution.
    double p_value = 1.0;
};

/// Two-sample Kolmogorov-Smirnov test.
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

/// Survival function of the Kolmogorov distribution, P(K > x).
double kolmogorov_sf(double x);

}  // namespace sflqg
