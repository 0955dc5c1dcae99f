#pragma once

#include <Eigen/Dense>

#include <cstdint>

namespace sflqg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Tally of scalar multiplications and divisions performed by an instrumented
// kernel. Kernels take a nullable pointer; nullptr disables counting.
struct MulCounter {
    std::uint64_t count = 0;

    void add(std::uint64_t n) noexcept { count += n; }
};

inline void tally(MulCounter* counter, std::uint64_t n) noexcept {
    if (counter != nullptr) {
        counter->add(n);
    }
}

}  // namespace sflqg
