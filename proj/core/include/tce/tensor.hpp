#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tce/errors.hpp"

namespace tce {

using Vec = std::vector<double>;

/// Dense row-major matrix of doubles. All arithmetic in the library is
/// 64-bit; there is no float path.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c, double fill = 0.0)
        : rows(r), cols(c), a(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), fill) {}

    double& operator()(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return a[static_cast<std::size_t>(r) * cols + c]; }

    std::span<double> row(int r) { return {a.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)}; }
    std::span<const double> row(int r) const {
        return {a.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)};
    }

    std::size_t size() const { return a.size(); }
    void fill(double v) { std::fill(a.begin(), a.end(), v); }
};

/// y = W x
Vec matvec(const Mat& w, std::span<const double> x);
/// y = W^T u
Vec matvec_transposed(const Mat& w, std::span<const double> u);
/// acc += s * u v^T
void add_outer(Mat& acc, std::span<const double> u, std::span<const double> v, double s);
/// acc.row(r) += s * v
void axpy_row(Mat& acc, int r, std::span<const double> v, double s);
/// y += s * x
void axpy(Vec& y, std::span<const double> x, double s);

double dot(std::span<const double> u, std::span<const double> v);
Vec vsum(std::span<const double> u, std::span<const double> v);
Vec vdiff(std::span<const double> u, std::span<const double> v);

bool all_finite(std::span<const double> v);

}  // namespace tce
