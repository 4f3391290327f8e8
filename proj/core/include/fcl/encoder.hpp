#pragma once

#include <cstddef>

#include "fcl/rng.hpp"
#include "fcl/tensor.hpp"

namespace fcl {

struct EncoderDims {
    std::size_t input = 64;
    std::size_t hidden = 128;
    std::size_t embed = 32;

    bool operator==(const EncoderDims&) const = default;
};

// Parameters of the two-layer encoder:
//   embedding = l2_normalize(w2 * relu(w1 * x + b1) + b2)
// The same value type doubles as a gradient container. Exists in "main"
// (trained) and "momentum" (slowly-evolving copy) flavors.
struct EncoderParams {
    EncoderDims dims;
    Mat64 w1;  // hidden x input
    Vec64 b1;  // hidden
    Mat64 w2;  // embed x hidden
    Vec64 b2;  // embed

    // All-zero parameters with consistent shapes.
    static EncoderParams zeros(const EncoderDims& dims);

    // Seeded uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) initialization.
    static EncoderParams init(const EncoderDims& dims, Rng& rng);

    std::size_t param_count() const;

    // Flatten order: w1 row-major, b1, w2 row-major, b2. Round-trips exactly.
    Vec64 flatten() const;
    static EncoderParams unflatten(const EncoderDims& dims, const Vec64& flat);

    bool operator==(const EncoderParams&) const = default;
};

// Intermediate values cached by forward() for the backward pass. Replaying
// the tape reproduces the forward embedding bit-exactly.
struct ForwardTape {
    Vec64 input;       // x
    Vec64 pre_hidden;  // w1 x + b1
    Vec64 hidden;      // relu(pre_hidden)
    Vec64 pre_embed;   // w2 hidden + b2
    double norm = 0.0;  // ||pre_embed||
};

struct ForwardResult {
    Vec64 embedding;  // unit norm
    ForwardTape tape;
};

// Encodes one slice into a unit-norm embedding. Throws DimensionError on a
// shape mismatch and DegenerateInputError when the pre-normalization vector
// is numerically zero.
ForwardResult forward(const EncoderParams& params, const Vec64& x);

// Recomputes the embedding from a tape; bit-identical to forward()'s output.
Vec64 replay_embedding(const ForwardTape& tape);

// Gradient of (grad_embedding . embedding) with respect to the parameters,
// including the unit-sphere Jacobian (I - e e^T)/||z||. The tape must come
// from forward() with the same params.
EncoderParams backward(const ForwardTape& tape, const EncoderParams& params,
                       const Vec64& grad_embedding);

// theta <- theta - lr * grad, elementwise. Throws NumericError if the
// gradient carries non-finite entries.
EncoderParams sgd_step(const EncoderParams& params, const EncoderParams& grad, double lr);

// theta_momentum <- m * theta_momentum + (1 - m) * theta_main, elementwise.
EncoderParams momentum_update(const EncoderParams& momentum, const EncoderParams& main, double m);

// acc += scale * g, elementwise. Gradient accumulation across a batch.
void add_scaled(EncoderParams& acc, const EncoderParams& g, double scale);

}  // namespace fcl
