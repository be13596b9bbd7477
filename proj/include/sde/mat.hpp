#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace sde {

// Small dense row-major matrix. Everything in this project is desk scale
// (M <= 64, networks of a few hundred units), so no BLAS.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

    double& operator()(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }

    static Mat identity(int n) {
        Mat m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    Mat transposed() const {
        Mat t(cols, rows);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    bool operator==(const Mat& o) const { return rows == o.rows && cols == o.cols && a == o.a; }
};

inline Mat matmul(const Mat& x, const Mat& y) {
    if (x.cols != y.rows) throw std::invalid_argument("matmul: shape mismatch");
    Mat out(x.rows, y.cols);
    for (int i = 0; i < x.rows; ++i)
        for (int k = 0; k < x.cols; ++k) {
            const double v = x(i, k);
            for (int j = 0; j < y.cols; ++j) out(i, j) += v * y(k, j);
        }
    return out;
}

inline std::vector<double> matvec(const Mat& m, const std::vector<double>& v) {
    if (m.cols != static_cast<int>(v.size())) throw std::invalid_argument("matvec: shape mismatch");
    std::vector<double> out(m.rows, 0.0);
    for (int i = 0; i < m.rows; ++i) {
        double s = 0.0;
        for (int j = 0; j < m.cols; ++j) s += m(i, j) * v[j];
        out[i] = s;
    }
    return out;
}

// out = M^T v
inline std::vector<double> mat_t_vec(const Mat& m, const std::vector<double>& v) {
    if (m.rows != static_cast<int>(v.size())) throw std::invalid_argument("mat_t_vec: shape mismatch");
    std::vector<double> out(m.cols, 0.0);
    for (int i = 0; i < m.rows; ++i)
        for (int j = 0; j < m.cols; ++j) out[j] += m(i, j) * v[i];
    return out;
}

inline double max_abs(const Mat& m) {
    double r = 0.0;
    for (double v : m.a) r = std::max(r, std::fabs(v));
    return r;
}

inline double frobenius(const Mat& m) {
    double s = 0.0;
    for (double v : m.a) s += v * v;
    return std::sqrt(s);
}

// In-place Cholesky solve for symmetric positive-definite systems.
// Throws std::domain_error when the matrix is not positive definite.
inline std::vector<double> cholesky_solve(Mat m, std::vector<double> b) {
    const int n = m.rows;
    if (m.cols != n || static_cast<int>(b.size()) != n)
        throw std::invalid_argument("cholesky_solve: shape mismatch");
    // factor: lower triangle of m becomes L
    for (int j = 0; j < n; ++j) {
        double d = m(j, j);
        for (int k = 0; k < j; ++k) d -= m(j, k) * m(j, k);
        if (!(d > 0.0)) throw std::domain_error("cholesky_solve: matrix not positive definite");
        const double ljj = std::sqrt(d);
        m(j, j) = ljj;
        for (int i = j + 1; i < n; ++i) {
            double s = m(i, j);
            for (int k = 0; k < j; ++k) s -= m(i, k) * m(j, k);
            m(i, j) = s / ljj;
        }
    }
    // forward substitution L y = b
    for (int i = 0; i < n; ++i) {
        double s = b[i];
        for (int k = 0; k < i; ++k) s -= m(i, k) * b[k];
        b[i] = s / m(i, i);
    }
    // back substitution L^T x = y
    for (int i = n - 1; i >= 0; --i) {
        double s = b[i];
        for (int k = i + 1; k < n; ++k) s -= m(k, i) * b[k];
        b[i] = s / m(i, i);
    }
    return b;
}

inline double dot(const std::vector<double>& x, const std::vector<double>& y) {
    double s = 0.0;
    for (size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

inline double norm2(const std::vector<double>& x) { return std::sqrt(dot(x, x)); }

}  // namespace sde
