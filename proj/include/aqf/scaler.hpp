#pragma once

#include <vector>

#include "aqf/core.hpp"

namespace aqf {

/// Per-column mean / population std. Columns whose std is 0 are flagged
/// constant and pass through unscaled.
struct ScalerParams {
    std::vector<double> mean;
    std::vector<double> std;
    std::vector<bool> constant;

    std::size_t size() const { return mean.size(); }

    static ScalerParams fit(const Matrix& x) {
        ScalerParams p;
        const std::size_t n = x.rows(), d = x.cols();
        p.mean.assign(d, 0.0);
        p.std.assign(d, 0.0);
        p.constant.assign(d, false);
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < d; ++c) p.mean[c] += x(r, c);
        for (auto& m : p.mean) m /= static_cast<double>(n);
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < d; ++c) {
                const double dv = x(r, c) - p.mean[c];
                p.std[c] += dv * dv;
            }
        for (std::size_t c = 0; c < d; ++c) {
            p.std[c] = std::sqrt(p.std[c] / static_cast<double>(n));
            // relative test so that float noise on a constant column counts as zero
            p.constant[c] = p.std[c] <= 1e-12 * std::max(1.0, std::abs(p.mean[c]));
            if (p.constant[c]) p.std[c] = 0.0;
        }
        return p;
    }

    double apply(std::size_t c, double v) const {
        return constant[c] ? v : (v - mean[c]) / std[c];
    }

    Matrix transform(const Matrix& x) const {
        Matrix out = x;
        for (std::size_t r = 0; r < x.rows(); ++r)
            for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) = apply(c, x(r, c));
        return out;
    }

    std::vector<double> transform_row(std::span<const double> row) const {
        std::vector<double> out(row.size());
        for (std::size_t c = 0; c < row.size(); ++c) out[c] = apply(c, row[c]);
        return out;
    }
};

}  // namespace aqf
