#include "masklab/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "masklab/error.hpp"

namespace masklab {

double dot(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) {
        throw Error("dot: size mismatch");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

double l2_norm(const Vec& v) {
    return std::sqrt(dot(v, v));
}

bool all_finite(const Vec& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

bool all_finite(const Matrix& m) {
    return all_finite(m.data());
}

namespace {

double off_diagonal_norm(const Matrix& a) {
    double s = 0.0;
    for (std::size_t p = 0; p < a.rows(); ++p) {
        for (std::size_t q = p + 1; q < a.cols(); ++q) {
            s += a(p, q) * a(p, q);
        }
    }
    return std::sqrt(2.0 * s);
}

}  // namespace

EigenDecomposition jacobi_eigen(const Matrix& symmetric) {
    const std::size_t n = symmetric.rows();
    if (n == 0 || symmetric.cols() != n) {
        throw Error("jacobi_eigen: matrix must be square and non-empty");
    }

    Matrix a = symmetric;
    Matrix v(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        v(i, i) = 1.0;
    }

    double frob = 0.0;
    for (double x : a.data()) {
        frob += x * x;
    }
    frob = std::sqrt(frob);
    const double tol = std::max(1e-300, 1e-14 * frob);

    constexpr int kMaxSweeps = 100;
    for (int sweep = 0; sweep < kMaxSweeps && off_diagonal_norm(a) > tol; ++sweep) {
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::abs(apq) <= tol / static_cast<double>(n * n)) {
                    continue;
                }
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

    EigenDecomposition out;
    out.eigenvalues.resize(n);
    out.eigenvectors = Matrix(n, n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        out.eigenvalues[j] = a(order[j], order[j]);
        for (std::size_t i = 0; i < n; ++i) {
            out.eigenvectors(i, j) = v(i, order[j]);
        }
    }
    return out;
}

}  // namespace masklab
