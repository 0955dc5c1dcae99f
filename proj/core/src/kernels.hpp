#pragma once

// Instrumented dense products. Each helper performs the product with Eigen
// and tallies the multiplications a straightforward evaluation performs.

#include "sflqg/types.hpp"

#include <cstdint>

namespace sflqg::detail {

inline Matrix counted_product(const Matrix& a, const Matrix& b, MulCounter* counter) {
    tally(counter, static_cast<std::uint64_t>(a.rows() * a.cols() * b.cols()));
    return a * b;
}

// a' * b
inline Matrix counted_tproduct(const Matrix& a, const Matrix& b, MulCounter* counter) {
    tally(counter, static_cast<std::uint64_t>(a.cols() * a.rows() * b.cols()));
    return a.transpose() * b;
}

inline Matrix counted_scale(double s, const Matrix& a, MulCounter* counter) {
    tally(counter, static_cast<std::uint64_t>(a.size()));
    return s * a;
}

}  // namespace sflqg::detail
