#pragma once

#include <cmath>
#include <stdexcept>

#include "util.hpp"

namespace satchain {

// Fixed-capacity square matrix, row-major. Mirrors Vec: no heap in hot paths.
struct Mat {
    std::array<double, kMaxN * kMaxN> a{};
    int n = 0;

    Mat() = default;
    explicit Mat(int dim) : n(dim) {
        if (dim < 0 || dim > kMaxN) throw std::invalid_argument("Mat: dimension out of range");
    }
    static Mat identity(int dim) {
        Mat m(dim);
        for (int i = 0; i < dim; ++i) m(i, i) = 1.0;
        return m;
    }

    double& operator()(int i, int j) { return a[static_cast<size_t>(i * kMaxN + j)]; }
    double operator()(int i, int j) const { return a[static_cast<size_t>(i * kMaxN + j)]; }
};

inline Vec mat_vec(const Mat& m, const Vec& x) {
    Vec y(m.n);
    for (int i = 0; i < m.n; ++i) {
        double s = 0;
        for (int j = 0; j < m.n; ++j) s += m(i, j) * x[j];
        y[i] = s;
    }
    return y;
}

inline double quad_form(const Mat& p, const Vec& x) {
    double s = 0;
    for (int i = 0; i < p.n; ++i) {
        double row = 0;
        for (int j = 0; j < p.n; ++j) row += p(i, j) * x[j];
        s += x[i] * row;
    }
    return s;
}

// Lower-triangular Cholesky; returns false when the matrix is not positive
// definite (the caller decides whether that is an error).
inline bool cholesky(const Mat& p, Mat& l) {
    l = Mat(p.n);
    for (int i = 0; i < p.n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = p(i, j);
            for (int k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            if (i == j) {
                if (!(s > 0)) return false;
                l(i, i) = std::sqrt(s);
            } else {
                l(i, j) = s / l(j, j);
            }
        }
    }
    return true;
}

// Solves P z = b given the Cholesky factor L of P.
inline Vec chol_solve(const Mat& l, const Vec& b) {
    Vec y(l.n);
    for (int i = 0; i < l.n; ++i) {
        double s = b[i];
        for (int k = 0; k < i; ++k) s -= l(i, k) * y[k];
        y[i] = s / l(i, i);
    }
    Vec z(l.n);
    for (int i = l.n - 1; i >= 0; --i) {
        double s = y[i];
        for (int k = i + 1; k < l.n; ++k) s -= l(k, i) * z[k];
        z[i] = s / l(i, i);
    }
    return z;
}

} // namespace satchain
