#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

#include "sphnet/errors.hpp"

namespace sphnet {

using Vector = std::vector<double>;

/// Dense real matrix, row-major, 64-bit entries.
class Matrix {
public:
    Matrix() = default;

    /// Zero matrix of the given shape.
    Matrix(int rows, int cols) : rows_(rows), cols_(cols) {
        if (rows <= 0 || cols <= 0)
            throw dimension_error("Matrix: shape must be positive, got " +
                                  std::to_string(rows) + "x" + std::to_string(cols));
        data_.assign(static_cast<std::size_t>(rows) * cols, 0.0);
    }

    /// From row-major entries. Rejects NaN/Inf.
    Matrix(int rows, int cols, Vector entries) : Matrix(rows, cols) {
        if (entries.size() != data_.size())
            throw dimension_error("Matrix: entry count " + std::to_string(entries.size()) +
                                  " does not match shape " + std::to_string(rows) + "x" +
                                  std::to_string(cols));
        for (double v : entries)
            if (!std::isfinite(v))
                throw numeric_error("Matrix: non-finite entry on construction");
        data_ = std::move(entries);
    }

    /// Convenience for literals in calling code: Matrix({{1,2},{3,4}}).
    Matrix(std::initializer_list<std::initializer_list<double>> rows) {
        rows_ = static_cast<int>(rows.size());
        cols_ = rows_ > 0 ? static_cast<int>(rows.begin()->size()) : 0;
        if (rows_ <= 0 || cols_ <= 0) throw dimension_error("Matrix: empty literal");
        data_.reserve(static_cast<std::size_t>(rows_) * cols_);
        for (const auto& r : rows) {
            if (static_cast<int>(r.size()) != cols_)
                throw dimension_error("Matrix: ragged literal");
            for (double v : r) {
                if (!std::isfinite(v)) throw numeric_error("Matrix: non-finite entry on construction");
                data_.push_back(v);
            }
        }
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
    double operator()(int i, int j) const { return data_[static_cast<std::size_t>(i) * cols_ + j]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    bool is_zero() const {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return v == 0.0; });
    }

    Matrix& operator+=(const Matrix& other) {
        check_shape(other, "operator+=");
        for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += other.data_[k];
        return *this;
    }

    Matrix& operator-=(const Matrix& other) {
        check_shape(other, "operator-=");
        for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= other.data_[k];
        return *this;
    }

    Matrix& operator*=(double s) {
        for (double& v : data_) v *= s;
        return *this;
    }

    friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
    friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
    friend Matrix operator*(Matrix a, double s) { return a *= s; }
    friend Matrix operator*(double s, Matrix a) { return a *= s; }

    void check_shape(const Matrix& other, const char* where) const {
        if (!same_shape(other))
            throw dimension_error(std::string(where) + ": shape mismatch " + shape_str() +
                                  " vs " + other.shape_str());
    }

    std::string shape_str() const {
        return std::to_string(rows_) + "x" + std::to_string(cols_);
    }

private:
    int rows_ = 0;
    int cols_ = 0;
    Vector data_;
};

// ---- vector helpers ----

inline double dot(const Vector& a, const Vector& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

inline double norm(const Vector& a) { return std::sqrt(dot(a, a)); }

/// y = A x
inline void matvec(const Matrix& a, const Vector& x, Vector& y) {
    if (static_cast<int>(x.size()) != a.cols())
        throw dimension_error("matvec: vector length " + std::to_string(x.size()) +
                              " vs matrix " + a.shape_str());
    y.assign(static_cast<std::size_t>(a.rows()), 0.0);
    const double* row = a.data();
    for (int i = 0; i < a.rows(); ++i, row += a.cols()) {
        double s = 0.0;
        for (int j = 0; j < a.cols(); ++j) s += row[j] * x[j];
        y[static_cast<std::size_t>(i)] = s;
    }
}

/// y = A^T x
inline void matvec_transposed(const Matrix& a, const Vector& x, Vector& y) {
    if (static_cast<int>(x.size()) != a.rows())
        throw dimension_error("matvec_transposed: vector length " + std::to_string(x.size()) +
                              " vs matrix " + a.shape_str());
    y.assign(static_cast<std::size_t>(a.cols()), 0.0);
    const double* row = a.data();
    for (int i = 0; i < a.rows(); ++i, row += a.cols()) {
        const double xi = x[static_cast<std::size_t>(i)];
        for (int j = 0; j < a.cols(); ++j) y[static_cast<std::size_t>(j)] += row[j] * xi;
    }
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows())
        throw dimension_error("matmul: " + a.shape_str() + " * " + b.shape_str());
    Matrix c(a.rows(), b.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (int j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
        }
    return c;
}

/// A += s * x y^T
inline void add_outer(Matrix& a, double s, const Vector& x, const Vector& y) {
    if (static_cast<int>(x.size()) != a.rows() || static_cast<int>(y.size()) != a.cols())
        throw dimension_error("add_outer: vectors " + std::to_string(x.size()) + "," +
                              std::to_string(y.size()) + " vs matrix " + a.shape_str());
    double* row = a.data();
    for (int i = 0; i < a.rows(); ++i, row += a.cols()) {
        const double sx = s * x[static_cast<std::size_t>(i)];
        for (int j = 0; j < a.cols(); ++j) row[j] += sx * y[static_cast<std::size_t>(j)];
    }
}

// ---- Frobenius inner product / norm ----

inline double frob_inner(const Matrix& a, const Matrix& b) {
    a.check_shape(b, "frob_inner");
    double s = 0.0;
    const double* pa = a.data();
    const double* pb = b.data();
    for (std::size_t k = 0; k < a.size(); ++k) s += pa[k] * pb[k];
    return s;
}

inline double frob_norm(const Matrix& a) {
    return std::sqrt(frob_inner(a, a));
}

// ---- operator norm (largest singular value) via power iteration ----

struct OpNormOptions {
    double tol = 1e-10;
    int max_iters = 500;
};

struct OpNormResult {
    double value = 0.0;
    bool converged = true; // false signals ill-conditioning; result is best iterate
    int iterations = 0;

    operator double() const { return value; }
};

namespace detail {

/// w = Gram * v where Gram = A^T A (tall) or A A^T (wide), never formed.
inline void gram_apply(const Matrix& a, bool use_ata, const Vector& v, Vector& tmp, Vector& w) {
    if (use_ata) {
        matvec(a, v, tmp);            // tmp = A v
        matvec_transposed(a, tmp, w); // w = A^T tmp
    } else {
        matvec_transposed(a, v, tmp); // tmp = A^T v
        matvec(a, tmp, w);            // w = A tmp
    }
}

} // namespace detail

/// Largest singular value, computed by power iteration on the Gram matrix of
/// the smaller dimension. Start vector is the normalized all-ones vector,
/// restarting once from e1 if that start lies in the null space; the fixed
/// start keeps runs reproducible. The result is clamped to the Frobenius
/// norm, which always dominates it. When the two leading singular values are
/// separated by less than about sqrt(tol), the iteration resolves the value
/// only to the size of that gap; that is inherent to the method.
inline OpNormResult op_norm(const Matrix& a, const OpNormOptions& opts = {}) {
    if (opts.tol <= 0.0) throw contract_error("op_norm: tol must be positive");
    if (opts.max_iters < 1) throw contract_error("op_norm: max_iters must be >= 1");

    const double fnorm = frob_norm(a);
    if (fnorm == 0.0) return {0.0, true, 0};

    const bool use_ata = a.cols() <= a.rows();
    const std::size_t dim = static_cast<std::size_t>(use_ata ? a.cols() : a.rows());

    Vector v(dim, 1.0 / std::sqrt(static_cast<double>(dim)));
    Vector tmp, w;

    // Rayleigh quotients of power iterates increase geometrically toward the
    // top eigenvalue of the Gram matrix. The limit is extrapolated from
    // checkpoints ten iterations apart (Aitken, two levels: the second level
    // cancels the quadratic correction of the error series). Per-iteration
    // difference tests would stop far too early when the two leading singular
    // values are close.
    constexpr int checkpoint_stride = 10;
    constexpr int cp_window = 5;
    const auto aitken3 = [](double x0, double x1, double x2) {
        const double d1 = x1 - x0;
        const double d2 = x2 - x1;
        if (d1 == 0.0 || d2 == 0.0) return x2;
        const double r = d2 / d1;
        if (!(r > 0.0) || !(r < 1.0)) return x2; // not a contracting geometric tail
        return x2 + d2 * r / (1.0 - r);
    };

    bool restarted = false;
    double lambda = 0.0;
    double lambda_prev = 0.0;
    double cp[cp_window] = {};
    int cp_n = 0;
    double ratio_prev = -1.0;
    bool plateau_prev = false;
    int steps_since_start = 0;
    OpNormResult res;
    res.converged = false;

    for (int it = 1; it <= opts.max_iters; ++it) {
        detail::gram_apply(a, use_ata, v, tmp, w);
        lambda = dot(v, w); // Rayleigh quotient, ||v|| = 1
        const double wn = norm(w);
        ++steps_since_start;

        const bool start_in_null_space =
            (wn == 0.0) || (steps_since_start == 2 && lambda <= 1e-28 * fnorm * fnorm);
        if (start_in_null_space) {
            if (!restarted) {
                restarted = true;
                v.assign(dim, 0.0);
                v[0] = 1.0;
                lambda_prev = 0.0;
                cp_n = 0;
                ratio_prev = -1.0;
                plateau_prev = false;
                steps_since_start = 0;
                continue;
            }
            res.value = 0.0;
            res.converged = (wn == 0.0); // both starts annihilated: zero in the probed subspace
            res.iterations = it;
            return res;
        }

        for (std::size_t k = 0; k < dim; ++k) v[k] = w[k] / wn;
        res.iterations = it;

        // Rayleigh residual ||Gv - lambda v||^2 = ||w||^2 - lambda^2. A small
        // quotient increment with a large residual is a blend of two nearly
        // equal singular values, not convergence.
        const bool residual_ok = wn * wn - lambda * lambda <= opts.tol * lambda * lambda;

        // numerically stalled: the quotient stopped moving at double resolution
        const bool plateau = steps_since_start >= 4 && lambda - lambda_prev <= 8e-16 * lambda;
        if (plateau && plateau_prev) {
            res.converged = residual_ok;
            break;
        }
        plateau_prev = plateau;
        lambda_prev = lambda;

        if (steps_since_start % checkpoint_stride == 0) {
            if (cp_n == cp_window) {
                for (int k = 1; k < cp_window; ++k) cp[k - 1] = cp[k];
                --cp_n;
            }
            cp[cp_n++] = lambda;
            if (cp_n >= 3) {
                const double inc_old = cp[cp_n - 2] - cp[cp_n - 3];
                const double inc = cp[cp_n - 1] - cp[cp_n - 2];
                double ratio = -1.0;
                if (inc_old > 0.0 && inc >= 0.0 && inc < inc_old) ratio = inc / inc_old;
                // trust the tail estimate only once the decay ratio has
                // stabilized: early windows mix transients of faster modes
                if (ratio >= 0.0 && ratio_prev >= 0.0 &&
                    std::abs(ratio - ratio_prev) <= 0.05 * (1.0 - ratio) + 1e-12) {
                    const double tail = inc * ratio / (1.0 - ratio);
                    if (residual_ok && tail <= opts.tol * std::max(lambda, 1e-300)) {
                        res.converged = true;
                        break;
                    }
                }
                ratio_prev = ratio;
            }
        }
    }

    double est = lambda;
    if (cp_n >= 3) est = aitken3(cp[cp_n - 3], cp[cp_n - 2], cp[cp_n - 1]);
    if (cp_n >= 5) {
        const double e0 = aitken3(cp[0], cp[1], cp[2]);
        const double e1 = aitken3(cp[1], cp[2], cp[3]);
        const double e2 = aitken3(cp[2], cp[3], cp[4]);
        const double second = aitken3(e0, e1, e2);
        if (std::abs(second - est) <= std::abs(est - lambda)) est = second;
    }
    est = std::clamp(est, lambda, 1.5 * lambda);
    res.value = std::min(std::sqrt(std::max(est, 0.0)), fnorm);
    return res;
}

} // namespace sphnet
