#include "tce/tensor.hpp"

#include <cmath>

namespace tce {

Vec matvec(const Mat& w, std::span<const double> x) {
    require_shape(static_cast<int>(x.size()) == w.cols, "matvec: input dim mismatch");
    Vec y(static_cast<std::size_t>(w.rows), 0.0);
    const double* p = w.a.data();
    for (int r = 0; r < w.rows; ++r) {
        double acc = 0.0;
        for (int c = 0; c < w.cols; ++c) acc += p[c] * x[c];
        y[r] = acc;
        p += w.cols;
    }
    return y;
}

Vec matvec_transposed(const Mat& w, std::span<const double> u) {
    require_shape(static_cast<int>(u.size()) == w.rows, "matvec_transposed: input dim mismatch");
    Vec y(static_cast<std::size_t>(w.cols), 0.0);
    const double* p = w.a.data();
    for (int r = 0; r < w.rows; ++r) {
        const double ur = u[r];
        for (int c = 0; c < w.cols; ++c) y[c] += p[c] * ur;
        p += w.cols;
    }
    return y;
}

void add_outer(Mat& acc, std::span<const double> u, std::span<const double> v, double s) {
    require_shape(static_cast<int>(u.size()) == acc.rows && static_cast<int>(v.size()) == acc.cols,
                  "add_outer: shape mismatch");
    double* p = acc.a.data();
    for (int r = 0; r < acc.rows; ++r) {
        const double su = s * u[r];
        for (int c = 0; c < acc.cols; ++c) p[c] += su * v[c];
        p += acc.cols;
    }
}

void axpy_row(Mat& acc, int r, std::span<const double> v, double s) {
    auto row = acc.row(r);
    require_shape(row.size() == v.size(), "axpy_row: size mismatch");
    for (std::size_t i = 0; i < v.size(); ++i) row[i] += s * v[i];
}

void axpy(Vec& y, std::span<const double> x, double s) {
    require_shape(y.size() == x.size(), "axpy: size mismatch");
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += s * x[i];
}

double dot(std::span<const double> u, std::span<const double> v) {
    require_shape(u.size() == v.size(), "dot: size mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) acc += u[i] * v[i];
    return acc;
}

Vec vsum(std::span<const double> u, std::span<const double> v) {
    require_shape(u.size() == v.size(), "vsum: size mismatch");
    Vec out(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) out[i] = u[i] + v[i];
    return out;
}

Vec vdiff(std::span<const double> u, std::span<const double> v) {
    require_shape(u.size() == v.size(), "vdiff: size mismatch");
    Vec out(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) out[i] = u[i] - v[i];
    return out;
}

bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace tce
