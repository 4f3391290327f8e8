#include "fcl/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fcl/errors.hpp"

namespace fcl {

void check_finite(std::span<const double> values, const char* what) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw NumericError(std::string(what) + ": non-finite entry");
        }
    }
}

double dot(const Vec64& a, const Vec64& b) {
    if (a.size() != b.size()) {
        throw DimensionError("dot: length mismatch (" + std::to_string(a.size()) + " vs " +
                             std::to_string(b.size()) + ")");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

double norm(const Vec64& a) { return std::sqrt(dot(a, a)); }

Vec64 l2_normalize(const Vec64& a) {
    const double n = norm(a);
    if (!(n > 1e-12)) {
        throw DegenerateInputError("l2_normalize: norm below 1e-12");
    }
    Vec64 out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = a[i] / n;
    }
    return out;
}

double log_softmax_denominator(double pos, std::span<const double> negs, double tau) {
    if (!(tau > 0.0)) {
        throw ContractError("log_softmax_denominator: tau must be positive");
    }
    double hi = pos / tau;
    for (double n : negs) {
        hi = std::max(hi, n / tau);
    }
    double acc = std::exp(pos / tau - hi);
    for (double n : negs) {
        acc += std::exp(n / tau - hi);
    }
    return hi + std::log(acc);
}

Vec64 finite_difference_gradient(const std::function<double(const Vec64&)>& f, const Vec64& x,
                                 double h) {
    if (!(h > 0.0)) {
        throw ContractError("finite_difference_gradient: h must be positive");
    }
    Vec64 grad(x.size());
    Vec64 probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = probe[i];
        probe[i] = saved + h;
        const double up = f(probe);
        probe[i] = saved - h;
        const double down = f(probe);
        probe[i] = saved;
        if (!std::isfinite(up) || !std::isfinite(down)) {
            throw NumericError("finite_difference_gradient: non-finite evaluation");
        }
        grad[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

Vec64 matvec(const Mat64& m, const Vec64& x) {
    if (m.cols != x.size()) {
        throw DimensionError("matvec: matrix cols " + std::to_string(m.cols) +
                             " vs vector length " + std::to_string(x.size()));
    }
    Vec64 y(m.rows, 0.0);
    for (std::size_t r = 0; r < m.rows; ++r) {
        const double* row = m.data.data() + r * m.cols;
        double acc = 0.0;
        for (std::size_t c = 0; c < m.cols; ++c) {
            acc += row[c] * x[c];
        }
        y[r] = acc;
    }
    return y;
}

Vec64 matvec_transpose(const Mat64& m, const Vec64& x) {
    if (m.rows != x.size()) {
        throw DimensionError("matvec_transpose: matrix rows " + std::to_string(m.rows) +
                             " vs vector length " + std::to_string(x.size()));
    }
    Vec64 y(m.cols, 0.0);
    for (std::size_t r = 0; r < m.rows; ++r) {
        const double* row = m.data.data() + r * m.cols;
        const double xr = x[r];
        for (std::size_t c = 0; c < m.cols; ++c) {
            y[c] += row[c] * xr;
        }
    }
    return y;
}

void add_outer(Mat64& m, const Vec64& u, const Vec64& v, double scale) {
    if (m.rows != u.size() || m.cols != v.size()) {
        throw DimensionError("add_outer: shape mismatch");
    }
    for (std::size_t r = 0; r < m.rows; ++r) {
        double* row = m.data.data() + r * m.cols;
        const double ur = scale * u[r];
        for (std::size_t c = 0; c < m.cols; ++c) {
            row[c] += ur * v[c];
        }
    }
}

}  // namespace fcl
