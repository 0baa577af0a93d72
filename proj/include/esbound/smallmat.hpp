#pragma once

#include <array>
#include <cmath>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <utility>

namespace esbound {

/// Largest state dimension the library supports.
inline constexpr int kMaxDim = 8;

/// Dense row-major matrix with fixed stack capacity (kMaxDim x kMaxDim).
/// Value semantics throughout; all entries are doubles.
class Mat {
public:
    Mat() = default;

    Mat(int rows, int cols) : rows_(rows), cols_(cols) {
        if (rows < 0 || cols < 0 || rows > kMaxDim || cols > kMaxDim) {
            throw std::invalid_argument("Mat: dimensions must be in [0, " +
                                        std::to_string(kMaxDim) + "], got " +
                                        std::to_string(rows) + "x" + std::to_string(cols));
        }
        a_.fill(0.0);
    }

    static Mat zeros(int rows, int cols) { return Mat(rows, cols); }

    static Mat identity(int n) {
        Mat m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    static Mat scalar(double v) {
        Mat m(1, 1);
        m(0, 0) = v;
        return m;
    }

    /// n x 1 column vector from a list of entries.
    static Mat column(std::initializer_list<double> entries) {
        Mat m(static_cast<int>(entries.size()), 1);
        int i = 0;
        for (double v : entries) m(i++, 0) = v;
        return m;
    }

    static Mat from_rows(std::initializer_list<std::initializer_list<double>> rows) {
        const int r = static_cast<int>(rows.size());
        const int c = r > 0 ? static_cast<int>(rows.begin()->size()) : 0;
        Mat m(r, c);
        int i = 0;
        for (const auto& row : rows) {
            if (static_cast<int>(row.size()) != c) {
                throw std::invalid_argument("Mat: ragged row list");
            }
            int j = 0;
            for (double v : row) m(i, j++) = v;
            ++i;
        }
        return m;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    bool square() const { return rows_ == cols_; }

    double& operator()(int i, int j) { return a_[static_cast<std::size_t>(i) * kMaxDim + j]; }
    double operator()(int i, int j) const { return a_[static_cast<std::size_t>(i) * kMaxDim + j]; }

    Mat transpose() const {
        Mat r(cols_, rows_);
        for (int i = 0; i < rows_; ++i)
            for (int j = 0; j < cols_; ++j) r(j, i) = (*this)(i, j);
        return r;
    }

    double trace() const {
        double s = 0.0;
        for (int i = 0; i < rows_ && i < cols_; ++i) s += (*this)(i, i);
        return s;
    }

    bool all_finite() const {
        for (int i = 0; i < rows_; ++i)
            for (int j = 0; j < cols_; ++j)
                if (!std::isfinite((*this)(i, j))) return false;
        return true;
    }

    double max_abs() const {
        double m = 0.0;
        for (int i = 0; i < rows_; ++i)
            for (int j = 0; j < cols_; ++j) m = std::max(m, std::abs((*this)(i, j)));
        return m;
    }

    Mat& operator+=(const Mat& o) {
        require_same_shape(o, "+=");
        for (int i = 0; i < rows_; ++i)
            for (int j = 0; j < cols_; ++j) (*this)(i, j) += o(i, j);
        return *this;
    }

    Mat& operator-=(const Mat& o) {
        require_same_shape(o, "-=");
        for (int i = 0; i < rows_; ++i)
            for (int j = 0; j < cols_; ++j) (*this)(i, j) -= o(i, j);
        return *this;
    }

    Mat& operator*=(double s) {
        for (int i = 0; i < rows_; ++i)
            for (int j = 0; j < cols_; ++j) (*this)(i, j) *= s;
        return *this;
    }

    friend Mat operator+(Mat a, const Mat& b) { return a += b; }
    friend Mat operator-(Mat a, const Mat& b) { return a -= b; }
    friend Mat operator*(Mat a, double s) { return a *= s; }
    friend Mat operator*(double s, Mat a) { return a *= s; }

    friend Mat operator*(const Mat& a, const Mat& b) {
        if (a.cols_ != b.rows_) {
            throw std::invalid_argument("Mat: incompatible product " + a.shape_str() + " * " +
                                        b.shape_str());
        }
        Mat r(a.rows_, b.cols_);
        for (int i = 0; i < a.rows_; ++i) {
            for (int k = 0; k < a.cols_; ++k) {
                const double aik = a(i, k);
                if (aik == 0.0) continue;
                for (int j = 0; j < b.cols_; ++j) r(i, j) += aik * b(k, j);
            }
        }
        return r;
    }

    std::string shape_str() const {
        return std::to_string(rows_) + "x" + std::to_string(cols_);
    }

private:
    void require_same_shape(const Mat& o, const char* op) const {
        if (rows_ != o.rows_ || cols_ != o.cols_) {
            throw std::invalid_argument(std::string("Mat: shape mismatch in ") + op + ": " +
                                        shape_str() + " vs " + o.shape_str());
        }
    }

    int rows_ = 0;
    int cols_ = 0;
    std::array<double, kMaxDim * kMaxDim> a_{};
};

inline Mat sym_part(const Mat& m) { return (m + m.transpose()) * 0.5; }

inline double frobenius(const Mat& m) {
    double s = 0.0;
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) s += m(i, j) * m(i, j);
    return std::sqrt(s);
}

/// Euclidean norm of an n x 1 column.
inline double vec_norm(const Mat& v) {
    double s = 0.0;
    for (int i = 0; i < v.rows(); ++i) s += v(i, 0) * v(i, 0);
    return std::sqrt(s);
}

/// Eigendecomposition of a symmetric matrix: S = V diag(values) V^T,
/// eigenvalues ascending, eigenvector columns orthonormal.
struct SymEig {
    int n = 0;
    std::array<double, kMaxDim> values{};
    Mat vectors;

    double min() const { return values[0]; }
    double max() const { return values[static_cast<std::size_t>(n - 1)]; }
};

/// Cyclic Jacobi rotations; converges when the off-diagonal Frobenius norm
/// drops below 1e-14 * ||S||_F. Input must be square and symmetric to
/// 1e-12 relative asymmetry.
inline SymEig sym_eig(const Mat& S) {
    if (!S.square()) {
        throw std::invalid_argument("sym_eig: matrix must be square, got " + S.shape_str());
    }
    const int n = S.rows();
    const double scale = S.max_abs();
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if (std::abs(S(i, j) - S(j, i)) > 1e-12 * std::max(scale, 1e-300)) {
                throw std::invalid_argument(
                    "sym_eig: asymmetry at (" + std::to_string(i) + "," + std::to_string(j) +
                    ") exceeds 1e-12 relative");
            }
        }
    }

    Mat A = sym_part(S);
    Mat V = Mat::identity(n);
    const double norm = frobenius(A);
    const double stop = 1e-14 * norm;

    auto off_norm = [&]() {
        double s = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) s += 2.0 * A(p, q) * A(p, q);
        return std::sqrt(s);
    };

    for (int sweep = 0; sweep < 64 && off_norm() > stop; ++sweep) {
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                if (A(p, q) == 0.0) continue;
                const double theta = (A(q, q) - A(p, p)) / (2.0 * A(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = A(k, p), akq = A(k, q);
                    A(k, p) = c * akp - s * akq;
                    A(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = A(p, k), aqk = A(q, k);
                    A(p, k) = c * apk - s * aqk;
                    A(q, k) = s * apk + c * aqk;
                }
                for (int k = 0; k < n; ++k) {
                    const double vkp = V(k, p), vkq = V(k, q);
                    V(k, p) = c * vkp - s * vkq;
                    V(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    SymEig out;
    out.n = n;
    std::array<int, kMaxDim> order{};
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if (A(order[static_cast<std::size_t>(j)], order[static_cast<std::size_t>(j)]) <
                A(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(i)])) {
                std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
            }
        }
    }
    out.vectors = Mat(n, n);
    for (int i = 0; i < n; ++i) {
        const int src = order[static_cast<std::size_t>(i)];
        out.values[static_cast<std::size_t>(i)] = A(src, src);
        for (int k = 0; k < n; ++k) out.vectors(k, i) = V(k, src);
    }
    return out;
}

/// max |eigenvalue| of a symmetric matrix.
inline double spectral_radius_sym(const Mat& S) {
    if (S.rows() == 0) return 0.0;
    const SymEig e = sym_eig(S);
    return std::max(std::abs(e.min()), std::abs(e.max()));
}

/// Largest singular value, computed from the eigenvalues of M^T M
/// (or M M^T, whichever is smaller).
inline double opnorm(const Mat& M) {
    if (M.rows() == 0 || M.cols() == 0) return 0.0;
    const Mat G = M.cols() <= M.rows() ? M.transpose() * M : M * M.transpose();
    const double lmax = sym_eig(G).max();
    return std::sqrt(std::max(lmax, 0.0));
}

/// Extreme singular values of a square matrix, (sigma_min, sigma_max).
inline std::pair<double, double> svd_extremes(const Mat& M) {
    if (!M.square()) {
        throw std::invalid_argument("svd_extremes: matrix must be square, got " + M.shape_str());
    }
    const SymEig e = sym_eig(M.transpose() * M);
    return {std::sqrt(std::max(e.min(), 0.0)), std::sqrt(std::max(e.max(), 0.0))};
}

/// Matrix exponential by scaling and squaring: scale so ||M/2^s|| <= 0.5,
/// 18-term Taylor series, then square back.
inline Mat expm(const Mat& M) {
    if (!M.square()) {
        throw std::invalid_argument("expm: matrix must be square, got " + M.shape_str());
    }
    const int n = M.rows();
    if (n == 0) return M;
    const double norm = opnorm(M);
    int s = 0;
    while (norm / std::pow(2.0, s) > 0.5) ++s;

    Mat X = M * (1.0 / std::pow(2.0, s));
    Mat term = Mat::identity(n);
    Mat acc = Mat::identity(n);
    for (int k = 1; k <= 18; ++k) {
        term = term * X;
        term *= 1.0 / static_cast<double>(k);
        acc += term;
    }
    for (int i = 0; i < s; ++i) acc = acc * acc;
    return acc;
}

/// Composite Simpson quadrature with n subintervals (n rounded up to even).
/// Works for any integrand type supporting + and scalar *.
template <class F>
auto simpson(F&& f, double a, double b, int n) -> decltype(f(a) * 1.0) {
    if (n < 2) n = 2;
    if (n % 2 != 0) ++n;
    const double h = (b - a) / n;
    auto acc = f(a) * 1.0;
    acc += f(b);
    for (int i = 1; i < n; ++i) {
        acc += f(a + h * i) * (i % 2 == 1 ? 4.0 : 2.0);
    }
    return acc * (h / 3.0);
}

}  // namespace esbound
