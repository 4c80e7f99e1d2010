#pragma once

#include <cstddef>
#include <vector>

namespace unicon {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles.  Rows are contiguous so kernel calls can
// work on raw pointers.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double* row(std::size_t i) { return data.data() + i * cols; }
    const double* row(std::size_t i) const { return data.data() + i * cols; }

    double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    bool empty() const { return rows == 0; }

    static Matrix zeros(std::size_t r, std::size_t c) { return Matrix(r, c); }
};

}  // namespace unicon
