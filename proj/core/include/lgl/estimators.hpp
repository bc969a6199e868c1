#pragma once

// Surrogate gradients for the argmax node. Each rule maps the encoder
// scores s and a pulled-back decoder gradient gamma = dL/dz to a
// replacement for the (zero) gradient dL/ds.
//
// Where gamma must be evaluated differs per rule, and callers are
// responsible for it:
//   spigot_grad, ste_grad              gamma at the MAP vertex z_hat
//   ce_grad_*, eg_grad_*               gamma at softmax(s) / Marg(s)
//   relaxed_grad                       gamma at softmax(s/tau) / Gibbs mean at s/tau
//   minrisk_grad                       no gamma; per-vertex losses instead

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lgl/linalg.hpp"
#include "lgl/polytope.hpp"

namespace lgl {

enum class Rule {
    None, // surrogate forced to zero; encoder receives no signal
    Spigot,
    STE,
    SpigotCE,
    ExpGrad,
    Relaxed,
    MinRisk,
};

// Starting point of the pullback descent.
enum class Init { MapVertex, Marginal, ZeroProjected };

enum class StepSchedule { Constant, InverseSqrt };

struct EstimatorConfig {
    Rule rule = Rule::Spigot;
    double eta = 1.0;
    int steps = 1;
    Init init = Init::MapVertex;
    double temperature = 1.0;
    StepSchedule schedule = StepSchedule::Constant;

    // Throws ConfigError unless eta > 0, steps >= 1, temperature > 0.
    void validate() const;

    bool operator==(const EstimatorConfig&) const = default;
};

std::string_view to_string(Rule rule);
std::string_view to_string(Init init);
std::string_view to_string(StepSchedule schedule);
// Throw ConfigError on unknown names.
Rule parse_rule(std::string_view name);
Init parse_init(std::string_view name);
StepSchedule parse_schedule(std::string_view name);

struct PullbackGradient {
    Vector gamma;
};

// Evaluates the pulled-back gradient at a latent point. Must be pure.
using GammaFn = std::function<PullbackGradient(const Vector& latent)>;

// z_hat - SparseMAP(z_hat - eta * gamma).
Vector spigot_grad(const StructureFamily& family, Index z_hat, const PullbackGradient& gamma, double eta);

// eta * gamma: identity straight-through.
Vector ste_grad(const PullbackGradient& gamma, double eta);

// eta_t for t = 1..steps.
std::vector<double> step_schedule(double eta, int steps, StepSchedule schedule = StepSchedule::Constant);

// mu^(0) for the pullback descent. ZeroProjected is the projection of the
// origin onto conv(Z), which keeps the iterate feasible.
MeanPoint initial_point(const StructureFamily& family, VectorView scores, Init init);

// Projected gradient on min_{mu in conv(Z)} L(y(mu)):
//   mu <- Pi[mu - eta_t * gamma(mu)]  for each eta_t in the schedule.
// Throws DivergedGradient if gamma_fn returns non-finite entries.
MeanPoint pullback_descend(const StructureFamily& family, const MeanPoint& init, const GammaFn& gamma_fn,
                           std::span<const double> etas);

// Same iteration without the projection (the relaxed R^K problem), used by
// multi-step straight-through.
Vector unconstrained_descend(VectorView start, const GammaFn& gamma_fn, std::span<const double> etas);

// Exponentiated gradient over the vertex distribution, run in score space:
//   theta <- theta - eta_t * gamma(Marg(theta)),  theta^(0) = s.
// Returns the final Gibbs mean.
MeanPoint mirror_descend(const StructureFamily& family, VectorView scores, const GammaFn& gamma_fn,
                         std::span<const double> etas);

// Perceptron loss gradient MAP(s) - mu_tilde.
Vector perceptron_grad(const StructureFamily& family, VectorView scores, const MeanPoint& target);
// With the forward pass's cached MAP vertex.
Vector perceptron_grad(const StructureFamily& family, Index z_hat, VectorView target);

// softmax(s) - sparsemax(softmax(s) - eta * gamma).
Vector ce_grad_unstructured(VectorView scores, const PullbackGradient& gamma_at_p, double eta);

// softmax(s) - softmax(s - eta * gamma).
Vector eg_grad_unstructured(VectorView scores, const PullbackGradient& gamma_at_p, double eta);

// Structured analogues (experimental): Marg(s) - SparseMAP(Marg(s) - eta*gamma)
// and Marg(s) - Marg(s - eta*gamma).
Vector ce_grad_structured(const StructureFamily& family, VectorView scores, const PullbackGradient& gamma_at_mu,
                          double eta);
Vector eg_grad_structured(const StructureFamily& family, VectorView scores, const PullbackGradient& gamma_at_mu,
                          double eta);

// Jacobian of s -> softmax(s / tau): (diag(p) - p p') / tau.
Matrix softmax_jacobian(VectorView scores, double temperature = 1.0);

// Exact chain rule through the continuous relaxation.
Vector relaxed_grad(VectorView scores, const PullbackGradient& gamma_at_p, double temperature = 1.0);
// Structured: (E[zz'] - mu mu') gamma / tau under p_z ∝ exp(s'z / tau).
Vector relaxed_grad(const StructureFamily& family, VectorView scores, const PullbackGradient& gamma_at_mu,
                    double temperature = 1.0);

// Gradient of the expected loss sum_z p_z(s) L_z with p_z ∝ exp(s'z / tau),
// via the Jacobian of the vertex distribution.
Vector minrisk_grad(const StructureFamily& family, VectorView scores, VectorView losses, double temperature = 1.0);
// The same quantity in score-function form E[L_z grad log p_z].
Vector minrisk_grad_score_function(const StructureFamily& family, VectorView scores, VectorView losses,
                                   double temperature = 1.0);

} // namespace lgl
