#include "groc/dense_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "groc/errors.hpp"

namespace groc {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != rows_ * cols_) {
        throw ShapeError("DenseMatrix: value count " + std::to_string(values_.size()) +
                         " does not match shape " + std::to_string(rows_) + "x" +
                         std::to_string(cols_));
    }
}

DenseMatrix::DenseMatrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    values_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) throw ShapeError("DenseMatrix: ragged initializer");
        values_.insert(values_.end(), r.begin(), r.end());
    }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

double DenseMatrix::item() const {
    if (rows_ != 1 || cols_ != 1) {
        throw ShapeError("item() on a " + std::to_string(rows_) + "x" + std::to_string(cols_) +
                         " matrix");
    }
    return values_[0];
}

void DenseMatrix::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

bool DenseMatrix::all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

DenseMatrix DenseMatrix::transposed() const {
    DenseMatrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
}

DenseMatrix& DenseMatrix::operator+=(const DenseMatrix& other) {
    if (!same_shape(other)) throw ShapeError("operator+=: shape mismatch");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
    return *this;
}

DenseMatrix& DenseMatrix::operator*=(double s) {
    for (auto& v : values_) v *= s;
    return *this;
}

DenseMatrix multiply(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("multiply: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         " by " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    }
    DenseMatrix out(a.rows(), b.cols());
    const std::size_t n = b.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* o = out.row(i).data();
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const double* br = b.row(k).data();
            for (std::size_t j = 0; j < n; ++j) o[j] += aik * br[j];
        }
    }
    return out;
}

DenseMatrix multiply_tn(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows() != b.rows()) throw ShapeError("multiply_tn: row counts differ");
    DenseMatrix out(a.cols(), b.cols());
    const std::size_t n = b.cols();
    for (std::size_t k = 0; k < a.rows(); ++k) {
        const double* br = b.row(k).data();
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = a(k, i);
            if (aki == 0.0) continue;
            double* o = out.row(i).data();
            for (std::size_t j = 0; j < n; ++j) o[j] += aki * br[j];
        }
    }
    return out;
}

DenseMatrix multiply_nt(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.cols()) throw ShapeError("multiply_nt: column counts differ");
    DenseMatrix out(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto ar = a.row(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const auto br = b.row(j);
            double s = 0.0;
            for (std::size_t k = 0; k < ar.size(); ++k) s += ar[k] * br[k];
            out(i, j) = s;
        }
    }
    return out;
}

double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
    if (!a.same_shape(b)) throw ShapeError("max_abs_diff: shape mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
    return m;
}

} // namespace groc
