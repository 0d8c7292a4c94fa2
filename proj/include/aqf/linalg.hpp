#pragma once

#include <optional>
#include <vector>

#include "aqf/core.hpp"

namespace aqf {

/// Solves A x = b by Gaussian elimination with partial pivoting on the
/// Jacobi-scaled system. A pivot below `tol` (relative to the unit scaled
/// diagonal) is reported as singular.
inline std::vector<double> solve_linear(Matrix a, std::vector<double> b, double tol = 1e-12) {
    const std::size_t n = a.rows();
    if (a.cols() != n || b.size() != n) throw std::invalid_argument("solve_linear: shape mismatch");
    std::vector<double> scale(n, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double d = std::abs(a(i, i));
        scale[i] = d > 0 ? 1.0 / std::sqrt(d) : 1.0;
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) a(i, j) *= scale[i] * scale[j];
        b[i] *= scale[i];
    }
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
        if (!(std::abs(a(piv, col)) > tol))
            throw NumericError("singular normal equations (collinear features); consider ridge with lambda > 0");
        if (piv != col) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a(col, j), a(piv, j));
            std::swap(b[col], b[piv]);
        }
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a(r, col) / a(col, col);
            if (f == 0.0) continue;
            for (std::size_t j = col; j < n; ++j) a(r, j) -= f * a(col, j);
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t j = i + 1; j < n; ++j) s -= a(i, j) * x[j];
        x[i] = s / a(i, i);
    }
    for (std::size_t i = 0; i < n; ++i) x[i] *= scale[i];
    return x;
}

struct LinearFit {
    std::vector<double> coef;
    double intercept = 0.0;
};

/// Minimizes sum_i w_i (y_i - b - x_i.beta)^2 + lambda |beta|^2 with the
/// intercept unpenalized, by centring on the weighted means and solving
/// (Xc' W Xc + lambda I) beta = Xc' W yc. lambda = 0 gives OLS.
inline LinearFit ridge_normal_equations(const Matrix& x, std::span<const double> y, double lambda,
                                        std::optional<std::span<const double>> weights = std::nullopt) {
    const std::size_t n = x.rows(), d = x.cols();
    if (y.size() != n) throw std::invalid_argument("ridge: row count mismatch");
    if (n == 0) throw InsufficientDataError("ridge: no rows");
    auto w = [&](std::size_t i) { return weights ? (*weights)[i] : 1.0; };
    double wsum = 0.0, ymean = 0.0;
    std::vector<double> xmean(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        wsum += w(i);
        ymean += w(i) * y[i];
        for (std::size_t j = 0; j < d; ++j) xmean[j] += w(i) * x(i, j);
    }
    if (!(wsum > 0)) throw NumericError("ridge: weights sum to zero");
    ymean /= wsum;
    for (auto& m : xmean) m /= wsum;

    Matrix gram(d, d);
    std::vector<double> rhs(d, 0.0);
    std::vector<double> xc(d);
    for (std::size_t i = 0; i < n; ++i) {
        const double wi = w(i);
        for (std::size_t j = 0; j < d; ++j) xc[j] = x(i, j) - xmean[j];
        const double yc = y[i] - ymean;
        for (std::size_t j = 0; j < d; ++j) {
            rhs[j] += wi * xc[j] * yc;
            for (std::size_t k = j; k < d; ++k) gram(j, k) += wi * xc[j] * xc[k];
        }
    }
    for (std::size_t j = 0; j < d; ++j) {
        gram(j, j) += lambda;
        for (std::size_t k = 0; k < j; ++k) gram(j, k) = gram(k, j);
    }
    LinearFit fit;
    if (d > 0) {
        // an all-zero column with lambda = 0 leaves a zero diagonal entry
        for (std::size_t j = 0; j < d; ++j)
            if (!(gram(j, j) > 0))
                throw NumericError("singular normal equations (constant feature column " + std::to_string(j) +
                                   "); consider ridge with lambda > 0");
        fit.coef = solve_linear(gram, rhs);
    }
    fit.intercept = ymean;
    for (std::size_t j = 0; j < d; ++j) fit.intercept -= fit.coef[j] * xmean[j];
    return fit;
}

}  // namespace aqf
