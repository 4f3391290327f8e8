#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace fcl {

// Dense 64-bit float vector. All internal math runs in f64; features are
// quantized to f32 only at the exchange wire boundary.
using Vec64 = std::vector<double>;

// Dense row-major 64-bit float matrix.
struct Mat64 {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Mat64() = default;
    Mat64(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }

    bool operator==(const Mat64&) const = default;
};

// Throws NumericError if any entry is non-finite. `what` names the operand
// in the error message.
void check_finite(std::span<const double> values, const char* what);

// Inner product. Throws DimensionError on length mismatch.
double dot(const Vec64& a, const Vec64& b);

double norm(const Vec64& a);

// Projects onto the unit sphere. Throws DegenerateInputError when the norm
// is at or below 1e-12.
Vec64 l2_normalize(const Vec64& a);

// log( exp(pos/tau) + sum_i exp(negs[i]/tau) ), computed with max
// subtraction so arbitrarily large logits never overflow.
double log_softmax_denominator(double pos, std::span<const double> negs, double tau);

// Central differences (f(x+h e_i) - f(x-h e_i)) / 2h per coordinate.
// The gradient-check oracle for every analytic backward pass in the library.
Vec64 finite_difference_gradient(const std::function<double(const Vec64&)>& f, const Vec64& x,
                                 double h);

// y = m x
Vec64 matvec(const Mat64& m, const Vec64& x);

// y = m^T x
Vec64 matvec_transpose(const Mat64& m, const Vec64& x);

// m += scale * u v^T
void add_outer(Mat64& m, const Vec64& u, const Vec64& v, double scale);

}  // namespace fcl
