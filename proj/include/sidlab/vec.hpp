#pragma once

// Small fixed-capacity vector and matrix types used for points in R^d.
// Storage is inline so the per-step integrators never touch the heap.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <ostream>
#include <stdexcept>
#include <string>

namespace sidlab {

inline constexpr std::size_t kMaxDim = 8;

class Vec {
public:
    Vec() = default;
    explicit Vec(std::size_t dim, double fill = 0.0) : dim_(check_dim(dim)) {
        std::fill_n(data_.begin(), dim_, fill);
    }
    Vec(std::initializer_list<double> values) : dim_(check_dim(values.size())) {
        std::copy(values.begin(), values.end(), data_.begin());
    }

    static Vec zeros(std::size_t dim) { return Vec(dim, 0.0); }
    static Vec unit(std::size_t dim, std::size_t axis) {
        Vec v(dim);
        v[axis] = 1.0;
        return v;
    }

    std::size_t dim() const { return dim_; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    const double* begin() const { return data_.data(); }
    const double* end() const { return data_.data() + dim_; }
    double* begin() { return data_.data(); }
    double* end() { return data_.data() + dim_; }

    Vec& operator+=(const Vec& o) {
        for (std::size_t i = 0; i < dim_; ++i) data_[i] += o.data_[i];
        return *this;
    }
    Vec& operator-=(const Vec& o) {
        for (std::size_t i = 0; i < dim_; ++i) data_[i] -= o.data_[i];
        return *this;
    }
    Vec& operator*=(double s) {
        for (std::size_t i = 0; i < dim_; ++i) data_[i] *= s;
        return *this;
    }
    Vec& operator/=(double s) {
        for (std::size_t i = 0; i < dim_; ++i) data_[i] /= s;
        return *this;
    }
    // this += s * o
    Vec& axpy(double s, const Vec& o) {
        for (std::size_t i = 0; i < dim_; ++i) data_[i] += s * o.data_[i];
        return *this;
    }

    friend Vec operator+(Vec a, const Vec& b) { return a += b; }
    friend Vec operator-(Vec a, const Vec& b) { return a -= b; }
    friend Vec operator-(Vec a) { return a *= -1.0; }
    friend Vec operator*(Vec a, double s) { return a *= s; }
    friend Vec operator*(double s, Vec a) { return a *= s; }
    friend Vec operator/(Vec a, double s) { return a /= s; }

    friend bool operator==(const Vec& a, const Vec& b) {
        return a.dim_ == b.dim_ && std::equal(a.begin(), a.end(), b.begin());
    }

    friend std::ostream& operator<<(std::ostream& os, const Vec& v) {
        os << '(';
        for (std::size_t i = 0; i < v.dim_; ++i) os << (i ? ", " : "") << v[i];
        return os << ')';
    }

private:
    static std::size_t check_dim(std::size_t dim) {
        if (dim == 0 || dim > kMaxDim)
            throw std::invalid_argument("dimension must be in [1, " + std::to_string(kMaxDim) + "]");
        return dim;
    }

    std::array<double, kMaxDim> data_{};
    std::size_t dim_ = 0;
};

inline double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) s += a[i] * b[i];
    return s;
}
inline double norm2(const Vec& a) { return dot(a, a); }
inline double norm(const Vec& a) { return std::sqrt(norm2(a)); }
inline double dist(const Vec& a, const Vec& b) { return norm(a - b); }

inline bool all_finite(const Vec& v) {
    double s = 0.0;
    for (double x : v) s += x * 0.0;  // NaN iff some entry is non-finite
    return s == 0.0;
}

namespace detail {
[[noreturn, gnu::noinline, gnu::cold]] inline void throw_dim_mismatch(std::size_t got, std::size_t want, const char* what) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (got " + std::to_string(got) + ", expected " +
                                std::to_string(want) + ")");
}
}  // namespace detail

inline void require_same_dim(const Vec& a, std::size_t dim, const char* what) {
    if (a.dim() != dim) [[unlikely]]
        detail::throw_dim_mismatch(a.dim(), dim, what);
}

// Dense d x d matrix, row-major, same capacity as Vec.
class Mat {
public:
    Mat() = default;
    explicit Mat(std::size_t dim) : dim_(dim) {
        if (dim == 0 || dim > kMaxDim) throw std::invalid_argument("matrix dimension out of range");
        std::fill_n(data_.begin(), dim * dim, 0.0);
    }
    static Mat identity(std::size_t dim, double scale = 1.0) {
        Mat m(dim);
        for (std::size_t i = 0; i < dim; ++i) m(i, i) = scale;
        return m;
    }
    static Mat outer(const Vec& a, const Vec& b) {
        Mat m(a.dim());
        for (std::size_t i = 0; i < a.dim(); ++i)
            for (std::size_t j = 0; j < a.dim(); ++j) m(i, j) = a[i] * b[j];
        return m;
    }

    std::size_t dim() const { return dim_; }
    double& operator()(std::size_t i, std::size_t j) { return data_[i * dim_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * dim_ + j]; }

    Mat& operator+=(const Mat& o) {
        for (std::size_t i = 0; i < dim_; ++i)
            for (std::size_t j = 0; j < dim_; ++j) (*this)(i, j) += o(i, j);
        return *this;
    }
    Mat& operator*=(double s) {
        for (std::size_t i = 0; i < dim_; ++i)
            for (std::size_t j = 0; j < dim_; ++j) (*this)(i, j) *= s;
        return *this;
    }
    friend Mat operator+(Mat a, const Mat& b) { return a += b; }
    friend Mat operator*(Mat a, double s) { return a *= s; }
    friend Mat operator*(double s, Mat a) { return a *= s; }

    Vec operator*(const Vec& v) const {
        Vec r(dim_);
        for (std::size_t i = 0; i < dim_; ++i)
            for (std::size_t j = 0; j < dim_; ++j) r[i] += (*this)(i, j) * v[j];
        return r;
    }
    // transpose(this) * v
    Vec tmul(const Vec& v) const {
        Vec r(dim_);
        for (std::size_t i = 0; i < dim_; ++i)
            for (std::size_t j = 0; j < dim_; ++j) r[j] += (*this)(i, j) * v[i];
        return r;
    }

private:
    std::array<double, kMaxDim * kMaxDim> data_;  // first dim_ * dim_ entries in use
    std::size_t dim_ = 0;
};

}  // namespace sidlab
