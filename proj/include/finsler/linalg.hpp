#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "finsler/errors.hpp"
#include "finsler/jet.hpp"

namespace finsler {

// Small dense containers for desk-scale tensor work (n <= 8). Templated over
// the scalar so the same code runs on doubles and jets.

template <typename T>
class Matrix {
public:
    Matrix() : n_(0) {}
    explicit Matrix(int n) : n_(n), data_(static_cast<size_t>(n) * n, T{}) {}

    static Matrix identity(int n) {
        Matrix m(n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    int size() const { return n_; }
    T& operator()(int i, int j) { return data_[static_cast<size_t>(i) * n_ + j]; }
    const T& operator()(int i, int j) const { return data_[static_cast<size_t>(i) * n_ + j]; }

private:
    int n_;
    std::vector<T> data_;
};

template <typename T>
struct Tensor3 {
    Tensor3() : n(0) {}
    explicit Tensor3(int dim) : n(dim), data(static_cast<size_t>(dim) * dim * dim, T{}) {}
    T& operator()(int i, int j, int k) { return data[(static_cast<size_t>(i) * n + j) * n + k]; }
    const T& operator()(int i, int j, int k) const { return data[(static_cast<size_t>(i) * n + j) * n + k]; }
    int n;
    std::vector<T> data;
};

template <typename T>
struct Tensor4 {
    Tensor4() : n(0) {}
    explicit Tensor4(int dim) : n(dim), data(static_cast<size_t>(dim) * dim * dim * dim, T{}) {}
    T& operator()(int i, int j, int k, int l) {
        return data[((static_cast<size_t>(i) * n + j) * n + k) * n + l];
    }
    const T& operator()(int i, int j, int k, int l) const {
        return data[((static_cast<size_t>(i) * n + j) * n + k) * n + l];
    }
    int n;
    std::vector<T> data;
};

namespace detail {
inline double pivot_magnitude(double x) { return std::abs(x); }
template <typename T> double pivot_magnitude(const Jet<T>& x) { return std::abs(value_of(x)); }
} // namespace detail

/// Gauss-Jordan inverse with partial pivoting (pivot chosen by value coefficient).
template <typename T>
Matrix<T> inverse(Matrix<T> a) {
    const int n = a.size();
    Matrix<T> inv = Matrix<T>::identity(n);
    if (n > 0) {
        // match the nested-jet shape of the input
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) inv(i, j) = lift_like(a(0, 0), i == j ? 1.0 : 0.0);
    }
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (detail::pivot_magnitude(a(r, col)) > detail::pivot_magnitude(a(piv, col))) piv = r;
        if (detail::pivot_magnitude(a(piv, col)) < 1e-300)
            throw NonInvertibleMetricError("matrix inverse: pivot below machine floor at column " +
                                               std::to_string(col),
                                           std::numeric_limits<double>::infinity());
        if (piv != col) {
            for (int j = 0; j < n; ++j) {
                std::swap(a(piv, j), a(col, j));
                std::swap(inv(piv, j), inv(col, j));
            }
        }
        T d = a(col, col);
        for (int j = 0; j < n; ++j) {
            a(col, j) = a(col, j) / d;
            inv(col, j) = inv(col, j) / d;
        }
        for (int r = 0; r < n; ++r) {
            if (r == col) continue;
            T f = a(r, col);
            for (int j = 0; j < n; ++j) {
                a(r, j) = a(r, j) - f * a(col, j);
                inv(r, j) = inv(r, j) - f * inv(col, j);
            }
        }
    }
    return inv;
}

/// Determinant by LU with partial pivoting.
inline double determinant(Matrix<double> a) {
    const int n = a.size();
    double det = 1.0;
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
        if (std::abs(a(piv, col)) == 0.0) return 0.0;
        if (piv != col) {
            for (int j = 0; j < n; ++j) std::swap(a(piv, j), a(col, j));
            det = -det;
        }
        det *= a(col, col);
        for (int r = col + 1; r < n; ++r) {
            double f = a(r, col) / a(col, col);
            for (int j = col; j < n; ++j) a(r, j) -= f * a(col, j);
        }
    }
    return det;
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
inline std::vector<double> symmetric_eigenvalues(Matrix<double> a) {
    const int n = a.size();
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off < 1e-30) break;
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                if (std::abs(a(p, q)) < 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
            }
        }
    }
    std::vector<double> ev(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) ev[static_cast<size_t>(i)] = a(i, i);
    return ev;
}

inline double min_eigenvalue(const Matrix<double>& a) {
    auto ev = symmetric_eigenvalues(a);
    double m = ev.empty() ? 0.0 : ev[0];
    for (double v : ev) m = std::min(m, v);
    return m;
}

template <typename T>
std::vector<T> mat_vec(const Matrix<T>& a, const std::vector<T>& v) {
    const int n = a.size();
    std::vector<T> r(static_cast<size_t>(n), T{});
    for (int i = 0; i < n; ++i) {
        T acc = a(i, 0) * v[0];
        for (int j = 1; j < n; ++j) acc = acc + a(i, j) * v[static_cast<size_t>(j)];
        r[static_cast<size_t>(i)] = acc;
    }
    return r;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double r = 0.0;
    for (size_t i = 0; i < a.size(); ++i) r += a[i] * b[i];
    return r;
}

inline double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

inline double max_abs(const Matrix<double>& a) {
    double m = 0.0;
    for (int i = 0; i < a.size(); ++i)
        for (int j = 0; j < a.size(); ++j) m = std::max(m, std::abs(a(i, j)));
    return m;
}

inline double max_abs(const Tensor3<double>& t) {
    double m = 0.0;
    for (double x : t.data) m = std::max(m, std::abs(x));
    return m;
}

inline double max_abs(const Tensor4<double>& t) {
    double m = 0.0;
    for (double x : t.data) m = std::max(m, std::abs(x));
    return m;
}

} // namespace finsler
