#pragma once

// Encoder -> argmax -> decoder network with hand-derived gradients.
//
//   s     = W_enc x + b_enc
//   a     = W1 [x; mu] + b1
//   h     = act(a)                 act = tanh or identity
//   y_hat = W2 h + b2
//
// The decoder is defined for any real latent point mu, so it can be fed
// vertices, marginals, or pullback iterates.

#include <cstdint>
#include <functional>
#include <iosfwd>

#include "lgl/estimators.hpp"
#include "lgl/linalg.hpp"
#include "lgl/polytope.hpp"

namespace lgl {

enum class LossKind { SquaredError, SoftmaxCrossEntropy };
enum class Activation { Tanh, Identity };

struct ModelShape {
    Index input_dim = 0;
    Index hidden = 32;
    Index output_dim = 0;
};

struct EncoderParams {
    Matrix weight; // K x D_x
    Vector bias;   // K
};

struct DecoderParams {
    Matrix w1; // H x (D_x + K)
    Vector b1; // H
    Matrix w2; // D_y x H
    Vector b2; // D_y
};

struct LatentModel {
    StructureFamily family;
    LossKind loss = LossKind::SquaredError;
    Activation activation = Activation::Tanh;
    // When false the x-block of W1 is pinned to zero and the decoder sees
    // only the latent point.
    bool decoder_uses_x = true;
    EncoderParams encoder;
    DecoderParams decoder;

    Index input_dim() const { return encoder.weight.cols(); }
    Index latent_dim() const { return encoder.weight.rows(); }
    Index hidden_dim() const { return decoder.w1.rows(); }
    Index output_dim() const { return decoder.w2.rows(); }
};

// Glorot-uniform weights, zero biases, all drawn from Rng(seed).
LatentModel make_model(const StructureFamily& family, const ModelShape& shape, LossKind loss,
                       std::uint64_t seed, Activation activation = Activation::Tanh, bool decoder_uses_x = true);

struct ForwardTrace {
    Vector x;
    Vector scores;
    Vector latent;
    Vector decoder_input; // [x; latent]
    Vector hidden_pre;
    Vector hidden;
    Vector prediction;
    Vector target;
    double loss = 0.0;
};

// s = f_phi(x).
Vector encode(const LatentModel& model, VectorView x);

// L(y_hat, y*): 0.5 ||y_hat - y*||^2, or -sum_k y*_k log softmax(y_hat)_k.
double loss_value(LossKind kind, VectorView prediction, VectorView target);
Vector loss_gradient(LossKind kind, VectorView prediction, VectorView target);

// Throws ShapeMismatch on inconsistent lengths.
ForwardTrace forward(const LatentModel& model, VectorView x, VectorView latent, VectorView target);

struct DecoderGradient {
    DecoderParams theta;
    PullbackGradient gamma; // dL / d latent
};

DecoderGradient decoder_backward(const LatentModel& model, const ForwardTrace& trace);

// Chain rule of the affine encoder: dW = g x', db = g.
EncoderParams encoder_backward(const LatentModel& model, const ForwardTrace& trace, VectorView surrogate_grad_s);

// Central differences of fn at point.
Vector numeric_gradient(const std::function<double(const Vector&)>& fn, VectorView point, double step = 1e-5);

// max_i |analytic_i - numeric_i| / max(1, |numeric_i|).
double finite_diff_check(const std::function<double(const Vector&)>& fn, VectorView point, VectorView analytic,
                         double step = 1e-5);

// Flattening helpers used by gradient checks and checkpointing, in the
// order W_enc, b_enc, W1, b1, W2, b2 (column-major within each matrix).
Vector flatten_decoder(const DecoderParams& params);
DecoderParams unflatten_decoder(const DecoderParams& shape_like, VectorView flat);
Vector flatten_encoder(const EncoderParams& params);
EncoderParams unflatten_encoder(const EncoderParams& shape_like, VectorView flat);

// Text checkpoint: "LGLCKPT 1" magic line, a header of model options,
// then one "tensor <name> <rows> <cols>" line per parameter followed by its
// values in row-major order, printed with 17 significant digits.
void save_checkpoint(const LatentModel& model, std::ostream& out);
LatentModel load_checkpoint(std::istream& in);

} // namespace lgl
