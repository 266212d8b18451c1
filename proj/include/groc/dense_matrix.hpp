#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace groc {

// Row-major matrix of doubles.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> values);
    DenseMatrix(std::initializer_list<std::initializer_list<double>> rows);

    static DenseMatrix identity(std::size_t n);
    static DenseMatrix scalar(double v) { return DenseMatrix(1, 1, v); }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }

    std::vector<double>& values() noexcept { return values_; }
    const std::vector<double>& values() const noexcept { return values_; }

    // Scalar value of a 1x1 matrix.
    double item() const;

    void fill(double v);
    bool all_finite() const;
    bool same_shape(const DenseMatrix& other) const noexcept {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    DenseMatrix transposed() const;

    DenseMatrix& operator+=(const DenseMatrix& other);
    DenseMatrix& operator*=(double s);

    friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
};

// a * b. Zero entries of `a` are skipped, which makes products with sparse
// binary feature matrices cheap.
DenseMatrix multiply(const DenseMatrix& a, const DenseMatrix& b);
// a^T * b
DenseMatrix multiply_tn(const DenseMatrix& a, const DenseMatrix& b);
// a * b^T
DenseMatrix multiply_nt(const DenseMatrix& a, const DenseMatrix& b);

double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b);

} // namespace groc
