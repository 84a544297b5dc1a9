#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace mtprompt {

// Dense row-major matrix of doubles. All model parameters and activations
// use this type; vectors are 1 x n matrices.
class Matrix {
public:
    Matrix() = default;
    Matrix(size_t rows, size_t cols, double fill = 0.0) :
        rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    size_t rows() const { return rows_; }
    size_t cols() const { return cols_; }
    size_t size() const { return data_.size(); }

    double &operator()(size_t r, size_t c) {
        assert(r < rows_ && c < cols_);
        return data_[r * cols_ + c];
    }
    double operator()(size_t r, size_t c) const {
        assert(r < rows_ && c < cols_);
        return data_[r * cols_ + c];
    }

    double *data() { return data_.data(); }
    const double *data() const { return data_.data(); }

    std::span<double> row(size_t r) {
        return {data_.data() + r * cols_, cols_};
    }
    std::span<const double> row(size_t r) const {
        return {data_.data() + r * cols_, cols_};
    }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    Matrix zeros_like() const { return Matrix(rows_, cols_); }

    bool same_shape(const Matrix &o) const {
        return rows_ == o.rows_ && cols_ == o.cols_;
    }

    bool all_finite() const {
        for (double v : data_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

private:
    size_t rows_ = 0;
    size_t cols_ = 0;
    std::vector<double> data_;
};

// out = a * b
inline Matrix matmul(const Matrix &a, const Matrix &b) {
    assert(a.cols() == b.rows());
    Matrix out(a.rows(), b.cols());
    for (size_t i = 0; i < a.rows(); ++i) {
        for (size_t k = 0; k < a.cols(); ++k) {
            double aik = a(i, k);
            if (aik == 0.0) continue;
            for (size_t j = 0; j < b.cols(); ++j) {
                out(i, j) += aik * b(k, j);
            }
        }
    }
    return out;
}

// out = a * b^T
inline Matrix matmul_nt(const Matrix &a, const Matrix &b) {
    assert(a.cols() == b.cols());
    Matrix out(a.rows(), b.rows());
    for (size_t i = 0; i < a.rows(); ++i) {
        for (size_t j = 0; j < b.rows(); ++j) {
            double s = 0.0;
            for (size_t k = 0; k < a.cols(); ++k) {
                s += a(i, k) * b(j, k);
            }
            out(i, j) = s;
        }
    }
    return out;
}

// out = a^T * b
inline Matrix matmul_tn(const Matrix &a, const Matrix &b) {
    assert(a.rows() == b.rows());
    Matrix out(a.cols(), b.cols());
    for (size_t k = 0; k < a.rows(); ++k) {
        for (size_t i = 0; i < a.cols(); ++i) {
            double aki = a(k, i);
            if (aki == 0.0) continue;
            for (size_t j = 0; j < b.cols(); ++j) {
                out(i, j) += aki * b(k, j);
            }
        }
    }
    return out;
}

inline void add_inplace(Matrix &a, const Matrix &b) {
    assert(a.same_shape(b));
    for (size_t i = 0; i < a.rows(); ++i) {
        for (size_t j = 0; j < a.cols(); ++j) {
            a(i, j) += b(i, j);
        }
    }
}

// a += scale * b
inline void axpy_inplace(Matrix &a, double scale, const Matrix &b) {
    assert(a.same_shape(b));
    double *pa = a.data();
    const double *pb = b.data();
    for (size_t i = 0; i < a.size(); ++i) {
        pa[i] += scale * pb[i];
    }
}

// Numerically stable softmax (max subtraction).
inline std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> out(logits.size());
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double sum = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        sum += out[i];
    }
    for (double &v : out) v /= sum;
    return out;
}

} // namespace mtprompt
