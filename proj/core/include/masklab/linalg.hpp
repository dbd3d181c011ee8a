#pragma once

#include <cstddef>
#include <vector>

namespace masklab {

using Vec = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    Vec& data() { return data_; }
    const Vec& data() const { return data_; }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    Vec data_;
};

double dot(const Vec& a, const Vec& b);
double l2_norm(const Vec& v);
bool all_finite(const Vec& v);
bool all_finite(const Matrix& m);

/// Eigendecomposition of a symmetric matrix. Eigenvalues are sorted
/// descending; eigenvectors.column(j) pairs with eigenvalues[j].
struct EigenDecomposition {
    Vec eigenvalues;
    Matrix eigenvectors;  // column-aligned with eigenvalues
};

/// Cyclic Jacobi rotations with a fixed sweep order, so results are
/// deterministic. Intended for the small covariance matrices this
/// project produces (tens of dimensions).
EigenDecomposition jacobi_eigen(const Matrix& symmetric);

}  // namespace masklab
