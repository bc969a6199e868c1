#include "lgl/model.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "lgl/errors.hpp"
#include "lgl/rng.hpp"

namespace lgl {

namespace {

void glorot_fill(Matrix& m, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
    for (Index r = 0; r < m.rows(); ++r) {
        for (Index c = 0; c < m.cols(); ++c) {
            m(r, c) = rng.uniform(-bound, bound);
        }
    }
}

void expect_len(VectorView v, Index expected, const char* what) {
    if (v.size() != expected) {
        throw ShapeMismatch(std::string(what) + ": expected length " + std::to_string(expected) + ", got " +
                            std::to_string(v.size()));
    }
}

double log_sum_exp(VectorView v) {
    const double top = v.maxCoeff();
    return top + std::log((v.array() - top).exp().sum());
}

const char* loss_name(LossKind kind) {
    return kind == LossKind::SquaredError ? "squared_error" : "softmax_cross_entropy";
}

const char* family_kind_name(FamilyKind kind) {
    switch (kind) {
    case FamilyKind::Categorical:
        return "categorical";
    case FamilyKind::KSubset:
        return "ksubset";
    case FamilyKind::Arborescence:
        return "arborescence";
    }
    return "unknown";
}

void write_tensor(std::ostream& out, const char* name, const Matrix& m) {
    out << "tensor " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (Index r = 0; r < m.rows(); ++r) {
        for (Index c = 0; c < m.cols(); ++c) {
            out << (c == 0 ? "" : " ") << m(r, c);
        }
        out << '\n';
    }
}

Matrix read_tensor(std::istream& in, const char* name) {
    std::string tag;
    std::string got_name;
    Index rows = 0;
    Index cols = 0;
    if (!(in >> tag >> got_name >> rows >> cols) || tag != "tensor" || got_name != name || rows < 0 || cols < 0) {
        throw std::runtime_error(std::string("checkpoint: expected tensor ") + name);
    }
    Matrix m(rows, cols);
    for (Index r = 0; r < rows; ++r) {
        for (Index c = 0; c < cols; ++c) {
            if (!(in >> m(r, c))) {
                throw std::runtime_error(std::string("checkpoint: truncated tensor ") + name);
            }
        }
    }
    return m;
}

template <typename T>
T read_field(std::istream& in, const char* key) {
    std::string got;
    T value{};
    if (!(in >> got >> value) || got != key) {
        throw std::runtime_error(std::string("checkpoint: expected field ") + key);
    }
    return value;
}

} // namespace

LatentModel make_model(const StructureFamily& family, const ModelShape& shape, LossKind loss,
                       std::uint64_t seed, Activation activation, bool decoder_uses_x) {
    if (shape.input_dim < 1 || shape.hidden < 1 || shape.output_dim < 1) {
        throw ShapeMismatch("make_model: all dimensions must be positive");
    }
    const Index K = family.dim();
    Rng rng(seed);
    LatentModel model{family, loss, activation, decoder_uses_x, {}, {}};
    model.encoder.weight.resize(K, shape.input_dim);
    glorot_fill(model.encoder.weight, rng);
    model.encoder.bias = Vector::Zero(K);
    model.decoder.w1.resize(shape.hidden, shape.input_dim + K);
    glorot_fill(model.decoder.w1, rng);
    if (!decoder_uses_x) {
        model.decoder.w1.leftCols(shape.input_dim).setZero();
    }
    model.decoder.b1 = Vector::Zero(shape.hidden);
    model.decoder.w2.resize(shape.output_dim, shape.hidden);
    glorot_fill(model.decoder.w2, rng);
    model.decoder.b2 = Vector::Zero(shape.output_dim);
    return model;
}

Vector encode(const LatentModel& model, VectorView x) {
    expect_len(x, model.input_dim(), "encode: x");
    return model.encoder.weight * x + model.encoder.bias;
}

double loss_value(LossKind kind, VectorView prediction, VectorView target) {
    expect_len(target, prediction.size(), "loss_value: target");
    if (kind == LossKind::SquaredError) {
        return 0.5 * (prediction - target).squaredNorm();
    }
    const double lse = log_sum_exp(prediction);
    return (target.array() * (lse - prediction.array())).sum();
}

Vector loss_gradient(LossKind kind, VectorView prediction, VectorView target) {
    expect_len(target, prediction.size(), "loss_gradient: target");
    if (kind == LossKind::SquaredError) {
        return prediction - target;
    }
    return softmax(prediction) * target.sum() - target;
}

ForwardTrace forward(const LatentModel& model, VectorView x, VectorView latent, VectorView target) {
    expect_len(x, model.input_dim(), "forward: x");
    expect_len(latent, model.latent_dim(), "forward: latent");
    expect_len(target, model.output_dim(), "forward: target");
    ForwardTrace trace;
    trace.x = x;
    trace.scores = encode(model, x);
    trace.latent = latent;
    trace.decoder_input.resize(x.size() + latent.size());
    trace.decoder_input << x, latent;
    trace.hidden_pre = model.decoder.w1 * trace.decoder_input + model.decoder.b1;
    trace.hidden = model.activation == Activation::Tanh ? Vector(trace.hidden_pre.array().tanh()) : trace.hidden_pre;
    trace.prediction = model.decoder.w2 * trace.hidden + model.decoder.b2;
    trace.target = target;
    trace.loss = loss_value(model.loss, trace.prediction, target);
    return trace;
}

DecoderGradient decoder_backward(const LatentModel& model, const ForwardTrace& trace) {
    const Vector d_prediction = loss_gradient(model.loss, trace.prediction, trace.target);
    Vector d_pre = model.decoder.w2.transpose() * d_prediction;
    if (model.activation == Activation::Tanh) {
        d_pre.array() *= 1.0 - trace.hidden.array().square();
    }
    DecoderGradient out;
    out.theta.w2 = d_prediction * trace.hidden.transpose();
    out.theta.b2 = d_prediction;
    out.theta.w1 = d_pre * trace.decoder_input.transpose();
    if (!model.decoder_uses_x) {
        out.theta.w1.leftCols(model.input_dim()).setZero();
    }
    out.theta.b1 = d_pre;
    out.gamma.gamma = model.decoder.w1.rightCols(model.latent_dim()).transpose() * d_pre;
    return out;
}

EncoderParams encoder_backward(const LatentModel& model, const ForwardTrace& trace, VectorView surrogate_grad_s) {
    expect_len(surrogate_grad_s, model.latent_dim(), "encoder_backward: surrogate");
    if (!surrogate_grad_s.allFinite()) {
        throw std::invalid_argument("encoder_backward: surrogate gradient has non-finite entries");
    }
    return EncoderParams{surrogate_grad_s * trace.x.transpose(), surrogate_grad_s};
}

Vector numeric_gradient(const std::function<double(const Vector&)>& fn, VectorView point, double step) {
    Vector probe = point;
    Vector grad(point.size());
    for (Index i = 0; i < point.size(); ++i) {
        const double saved = probe(i);
        probe(i) = saved + step;
        const double up = fn(probe);
        probe(i) = saved - step;
        const double down = fn(probe);
        probe(i) = saved;
        grad(i) = (up - down) / (2.0 * step);
    }
    return grad;
}

double finite_diff_check(const std::function<double(const Vector&)>& fn, VectorView point, VectorView analytic,
                         double step) {
    expect_len(analytic, point.size(), "finite_diff_check: analytic");
    const Vector numeric = numeric_gradient(fn, point, step);
    double worst = 0.0;
    for (Index i = 0; i < numeric.size(); ++i) {
        const double err = std::abs(analytic(i) - numeric(i)) / std::max(1.0, std::abs(numeric(i)));
        worst = std::max(worst, err);
    }
    return worst;
}

Vector flatten_decoder(const DecoderParams& p) {
    Vector flat(p.w1.size() + p.b1.size() + p.w2.size() + p.b2.size());
    flat << p.w1.reshaped(), p.b1, p.w2.reshaped(), p.b2;
    return flat;
}

DecoderParams unflatten_decoder(const DecoderParams& like, VectorView flat) {
    expect_len(flat, like.w1.size() + like.b1.size() + like.w2.size() + like.b2.size(), "unflatten_decoder");
    DecoderParams p;
    Index at = 0;
    p.w1 = flat.segment(at, like.w1.size()).reshaped(like.w1.rows(), like.w1.cols());
    at += like.w1.size();
    p.b1 = flat.segment(at, like.b1.size());
    at += like.b1.size();
    p.w2 = flat.segment(at, like.w2.size()).reshaped(like.w2.rows(), like.w2.cols());
    at += like.w2.size();
    p.b2 = flat.segment(at, like.b2.size());
    return p;
}

Vector flatten_encoder(const EncoderParams& p) {
    Vector flat(p.weight.size() + p.bias.size());
    flat << p.weight.reshaped(), p.bias;
    return flat;
}

EncoderParams unflatten_encoder(const EncoderParams& like, VectorView flat) {
    expect_len(flat, like.weight.size() + like.bias.size(), "unflatten_encoder");
    EncoderParams p;
    p.weight = flat.head(like.weight.size()).reshaped(like.weight.rows(), like.weight.cols());
    p.bias = flat.tail(like.bias.size());
    return p;
}

void save_checkpoint(const LatentModel& model, std::ostream& out) {
    const auto saved_precision = out.precision(17);
    const FamilySpec& spec = model.family.spec();
    out << "LGLCKPT 1\n";
    out << "family " << family_kind_name(spec.kind) << ' ' << spec.size << ' ' << spec.subset << '\n';
    out << "loss " << loss_name(model.loss) << '\n';
    out << "activation " << (model.activation == Activation::Tanh ? "tanh" : "identity") << '\n';
    out << "decoder_uses_x " << (model.decoder_uses_x ? 1 : 0) << '\n';
    write_tensor(out, "encoder.weight", model.encoder.weight);
    write_tensor(out, "encoder.bias", model.encoder.bias);
    write_tensor(out, "decoder.w1", model.decoder.w1);
    write_tensor(out, "decoder.b1", model.decoder.b1);
    write_tensor(out, "decoder.w2", model.decoder.w2);
    write_tensor(out, "decoder.b2", model.decoder.b2);
    out << "end\n";
    out.precision(saved_precision);
}

LatentModel load_checkpoint(std::istream& in) {
    std::string magic;
    int version = 0;
    if (!(in >> magic >> version) || magic != "LGLCKPT" || version != 1) {
        throw std::runtime_error("checkpoint: missing LGLCKPT 1 header");
    }
    std::string tag;
    std::string kind_name;
    FamilySpec spec;
    if (!(in >> tag >> kind_name >> spec.size >> spec.subset) || tag != "family") {
        throw std::runtime_error("checkpoint: expected family line");
    }
    if (kind_name == "categorical") {
        spec.kind = FamilyKind::Categorical;
    } else if (kind_name == "ksubset") {
        spec.kind = FamilyKind::KSubset;
    } else if (kind_name == "arborescence") {
        spec.kind = FamilyKind::Arborescence;
    } else {
        throw std::runtime_error("checkpoint: unknown family " + kind_name);
    }
    const auto loss = read_field<std::string>(in, "loss");
    const auto activation = read_field<std::string>(in, "activation");
    const auto uses_x = read_field<int>(in, "decoder_uses_x");

    LatentModel model{StructureFamily(spec), LossKind::SquaredError, Activation::Tanh, uses_x != 0, {}, {}};
    if (loss == "squared_error") {
        model.loss = LossKind::SquaredError;
    } else if (loss == "softmax_cross_entropy") {
        model.loss = LossKind::SoftmaxCrossEntropy;
    } else {
        throw std::runtime_error("checkpoint: unknown loss " + loss);
    }
    if (activation == "tanh") {
        model.activation = Activation::Tanh;
    } else if (activation == "identity") {
        model.activation = Activation::Identity;
    } else {
        throw std::runtime_error("checkpoint: unknown activation " + activation);
    }
    model.encoder.weight = read_tensor(in, "encoder.weight");
    model.encoder.bias = read_tensor(in, "encoder.bias");
    model.decoder.w1 = read_tensor(in, "decoder.w1");
    model.decoder.b1 = read_tensor(in, "decoder.b1");
    model.decoder.w2 = read_tensor(in, "decoder.w2");
    model.decoder.b2 = read_tensor(in, "decoder.b2");
    if (!(in >> tag) || tag != "end") {
        throw std::runtime_error("checkpoint: missing end marker");
    }
    const Index K = model.family.dim();
    const Index D_x = model.encoder.weight.cols();
    const Index H = model.decoder.w1.rows();
    if (model.encoder.weight.rows() != K || model.encoder.bias.size() != K || model.decoder.w1.cols() != D_x + K ||
        model.decoder.b1.size() != H || model.decoder.w2.cols() != H ||
        model.decoder.b2.size() != model.decoder.w2.rows()) {
        throw ShapeMismatch("checkpoint: tensor shapes are inconsistent");
    }
    return model;
}

} // namespace lgl
