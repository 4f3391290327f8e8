#include "fcl/encoder.hpp"

#include <cmath>
#include <string>

#include "fcl/errors.hpp"

namespace fcl {

namespace {

void check_dims_consistent(const EncoderParams& p, const char* what) {
    const auto& d = p.dims;
    if (p.w1.rows != d.hidden || p.w1.cols != d.input || p.b1.size() != d.hidden ||
        p.w2.rows != d.embed || p.w2.cols != d.hidden || p.b2.size() != d.embed) {
        throw DimensionError(std::string(what) + ": inconsistent parameter shapes");
    }
}

void fill_uniform(std::vector<double>& values, double bound, Rng& rng) {
    for (double& v : values) {
        v = rng.uniform(-bound, bound);
    }
}

}  // namespace

EncoderParams EncoderParams::zeros(const EncoderDims& dims) {
    EncoderParams p;
    p.dims = dims;
    p.w1 = Mat64(dims.hidden, dims.input);
    p.b1 = Vec64(dims.hidden, 0.0);
    p.w2 = Mat64(dims.embed, dims.hidden);
    p.b2 = Vec64(dims.embed, 0.0);
    return p;
}

EncoderParams EncoderParams::init(const EncoderDims& dims, Rng& rng) {
    EncoderParams p = zeros(dims);
    const double bound1 = 1.0 / std::sqrt(static_cast<double>(dims.input));
    const double bound2 = 1.0 / std::sqrt(static_cast<double>(dims.hidden));
    fill_uniform(p.w1.data, bound1, rng);
    fill_uniform(p.b1, bound1, rng);
    fill_uniform(p.w2.data, bound2, rng);
    fill_uniform(p.b2, bound2, rng);
    return p;
}

std::size_t EncoderParams::param_count() const {
    return dims.hidden * dims.input + dims.hidden + dims.embed * dims.hidden + dims.embed;
}

Vec64 EncoderParams::flatten() const {
    check_dims_consistent(*this, "flatten");
    Vec64 flat;
    flat.reserve(param_count());
    flat.insert(flat.end(), w1.data.begin(), w1.data.end());
    flat.insert(flat.end(), b1.begin(), b1.end());
    flat.insert(flat.end(), w2.data.begin(), w2.data.end());
    flat.insert(flat.end(), b2.begin(), b2.end());
    return flat;
}

EncoderParams EncoderParams::unflatten(const EncoderDims& dims, const Vec64& flat) {
    EncoderParams p = zeros(dims);
    if (flat.size() != p.param_count()) {
        throw DimensionError("unflatten: expected " + std::to_string(p.param_count()) +
                             " values, got " + std::to_string(flat.size()));
    }
    auto it = flat.begin();
    std::copy(it, it + static_cast<std::ptrdiff_t>(p.w1.data.size()), p.w1.data.begin());
    it += static_cast<std::ptrdiff_t>(p.w1.data.size());
    std::copy(it, it + static_cast<std::ptrdiff_t>(p.b1.size()), p.b1.begin());
    it += static_cast<std::ptrdiff_t>(p.b1.size());
    std::copy(it, it + static_cast<std::ptrdiff_t>(p.w2.data.size()), p.w2.data.begin());
    it += static_cast<std::ptrdiff_t>(p.w2.data.size());
    std::copy(it, it + static_cast<std::ptrdiff_t>(p.b2.size()), p.b2.begin());
    return p;
}

ForwardResult forward(const EncoderParams& params, const Vec64& x) {
    check_dims_consistent(params, "forward");
    if (x.size() != params.dims.input) {
        throw DimensionError("forward: input length " + std::to_string(x.size()) +
                             " vs input_dim " + std::to_string(params.dims.input));
    }

    ForwardTape tape;
    tape.input = x;
    tape.pre_hidden = matvec(params.w1, x);
    for (std::size_t i = 0; i < tape.pre_hidden.size(); ++i) {
        tape.pre_hidden[i] += params.b1[i];
    }
    tape.hidden = tape.pre_hidden;
    for (double& h : tape.hidden) {
        h = h > 0.0 ? h : 0.0;
    }
    tape.pre_embed = matvec(params.w2, tape.hidden);
    for (std::size_t i = 0; i < tape.pre_embed.size(); ++i) {
        tape.pre_embed[i] += params.b2[i];
    }
    tape.norm = std::sqrt(dot(tape.pre_embed, tape.pre_embed));
    if (!(tape.norm > 1e-12)) {
        throw DegenerateInputError("forward: pre-normalization embedding is numerically zero");
    }

    ForwardResult result;
    result.embedding = replay_embedding(tape);
    result.tape = std::move(tape);
    return result;
}

Vec64 replay_embedding(const ForwardTape& tape) {
    Vec64 e(tape.pre_embed.size());
    for (std::size_t i = 0; i < e.size(); ++i) {
        e[i] = tape.pre_embed[i] / tape.norm;
    }
    return e;
}

EncoderParams backward(const ForwardTape& tape, const EncoderParams& params,
                       const Vec64& grad_embedding) {
    check_dims_consistent(params, "backward");
    const auto& d = params.dims;
    if (tape.input.size() != d.input || tape.pre_hidden.size() != d.hidden ||
        tape.hidden.size() != d.hidden || tape.pre_embed.size() != d.embed ||
        grad_embedding.size() != d.embed) {
        throw DimensionError("backward: tape does not match parameter shapes");
    }

    const Vec64 e = replay_embedding(tape);

    // Through the normalization: g_z = (g - (g.e) e) / ||z||.
    const double radial = dot(grad_embedding, e);
    Vec64 grad_pre_embed(d.embed);
    for (std::size_t i = 0; i < d.embed; ++i) {
        grad_pre_embed[i] = (grad_embedding[i] - radial * e[i]) / tape.norm;
    }

    EncoderParams grad = EncoderParams::zeros(d);
    add_outer(grad.w2, grad_pre_embed, tape.hidden, 1.0);
    grad.b2 = grad_pre_embed;

    Vec64 grad_hidden = matvec_transpose(params.w2, grad_pre_embed);
    for (std::size_t i = 0; i < d.hidden; ++i) {
        if (tape.pre_hidden[i] <= 0.0) {
            grad_hidden[i] = 0.0;
        }
    }
    add_outer(grad.w1, grad_hidden, tape.input, 1.0);
    grad.b1 = grad_hidden;
    return grad;
}

EncoderParams sgd_step(const EncoderParams& params, const EncoderParams& grad, double lr) {
    if (!(lr > 0.0)) {
        throw ContractError("sgd_step: lr must be positive");
    }
    if (params.dims != grad.dims) {
        throw DimensionError("sgd_step: parameter/gradient shape mismatch");
    }
    check_finite(grad.w1.data, "sgd_step gradient w1");
    check_finite(grad.b1, "sgd_step gradient b1");
    check_finite(grad.w2.data, "sgd_step gradient w2");
    check_finite(grad.b2, "sgd_step gradient b2");

    EncoderParams out = params;
    add_scaled(out, grad, -lr);
    return out;
}

EncoderParams momentum_update(const EncoderParams& momentum, const EncoderParams& main,
                              double m) {
    if (!(m >= 0.0 && m <= 1.0)) {
        throw ContractError("momentum_update: m must lie in [0, 1]");
    }
    if (momentum.dims != main.dims) {
        throw DimensionError("momentum_update: shape mismatch");
    }
    EncoderParams out = momentum;
    auto blend = [m](std::vector<double>& dst, const std::vector<double>& src) {
        for (std::size_t i = 0; i < dst.size(); ++i) {
            dst[i] = m * dst[i] + (1.0 - m) * src[i];
        }
    };
    blend(out.w1.data, main.w1.data);
    blend(out.b1, main.b1);
    blend(out.w2.data, main.w2.data);
    blend(out.b2, main.b2);
    return out;
}

void add_scaled(EncoderParams& acc, const EncoderParams& g, double scale) {
    if (acc.dims != g.dims) {
        throw DimensionError("add_scaled: shape mismatch");
    }
    auto axpy = [scale](std::vector<double>& dst, const std::vector<double>& src) {
        for (std::size_t i = 0; i < dst.size(); ++i) {
            dst[i] += scale * src[i];
        }
    };
    axpy(acc.w1.data, g.w1.data);
    axpy(acc.b1, g.b1);
    axpy(acc.w2.data, g.w2.data);
    axpy(acc.b2, g.b2);
}

}  // namespace fcl
