#include "lgl/estimators.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "lgl/errors.hpp"

namespace lgl {

namespace {

constexpr std::array<std::pair<Rule, std::string_view>, 7> kRuleNames{{
    {Rule::None, "none"},
    {Rule::Spigot, "spigot"},
    {Rule::STE, "ste"},
    {Rule::SpigotCE, "spigot_ce"},
    {Rule::ExpGrad, "expgrad"},
    {Rule::Relaxed, "relaxed"},
    {Rule::MinRisk, "minrisk"},
}};

constexpr std::array<std::pair<Init, std::string_view>, 3> kInitNames{{
    {Init::MapVertex, "map"},
    {Init::Marginal, "marginal"},
    {Init::ZeroProjected, "zero_projected"},
}};

constexpr std::array<std::pair<StepSchedule, std::string_view>, 2> kScheduleNames{{
    {StepSchedule::Constant, "constant"},
    {StepSchedule::InverseSqrt, "inverse_sqrt"},
}};

template <typename Enum, std::size_t N>
std::string_view name_of(const std::array<std::pair<Enum, std::string_view>, N>& table, Enum value) {
    for (const auto& [v, name] : table) {
        if (v == value) {
            return name;
        }
    }
    return "unknown";
}

template <typename Enum, std::size_t N>
Enum parse_name(const std::array<std::pair<Enum, std::string_view>, N>& table, std::string_view name,
                const char* what) {
    for (const auto& [v, n] : table) {
        if (n == name) {
            return v;
        }
    }
    std::string valid;
    for (const auto& [v, n] : table) {
        valid += valid.empty() ? "" : ", ";
        valid += n;
    }
    throw ConfigError("unknown " + std::string(what) + " '" + std::string(name) + "' (expected one of: " + valid +
                      ")");
}

void require_gamma(const PullbackGradient& gamma, Index dim, const char* what) {
    if (gamma.gamma.size() != dim) {
        throw ShapeMismatch(std::string(what) + ": gamma has length " + std::to_string(gamma.gamma.size()) +
                            ", expected " + std::to_string(dim));
    }
}

void require_temperature(double temperature) {
    if (!(temperature > 0.0)) {
        throw std::invalid_argument("temperature must be positive");
    }
}

PullbackGradient checked_gamma(const GammaFn& gamma_fn, const Vector& latent) {
    PullbackGradient g = gamma_fn(latent);
    if (g.gamma.size() != latent.size()) {
        throw ShapeMismatch("gamma callback returned length " + std::to_string(g.gamma.size()) + ", expected " +
                            std::to_string(latent.size()));
    }
    if (!g.gamma.allFinite()) {
        throw DivergedGradient("gamma callback returned non-finite values");
    }
    return g;
}

} // namespace

void EstimatorConfig::validate() const {
    if (!(eta > 0.0) || !std::isfinite(eta)) {
        throw ConfigError("estimator eta must be a positive finite number");
    }
    if (steps < 1) {
        throw ConfigError("estimator steps must be >= 1");
    }
    if (!(temperature > 0.0) || !std::isfinite(temperature)) {
        throw ConfigError("estimator temperature must be a positive finite number");
    }
}

std::string_view to_string(Rule rule) { return name_of(kRuleNames, rule); }
std::string_view to_string(Init init) { return name_of(kInitNames, init); }
std::string_view to_string(StepSchedule schedule) { return name_of(kScheduleNames, schedule); }
Rule parse_rule(std::string_view name) { return parse_name(kRuleNames, name, "rule"); }
Init parse_init(std::string_view name) { return parse_name(kInitNames, name, "init"); }
StepSchedule parse_schedule(std::string_view name) { return parse_name(kScheduleNames, name, "schedule"); }

Vector spigot_grad(const StructureFamily& family, Index z_hat, const PullbackGradient& gamma, double eta) {
    require_gamma(gamma, family.dim(), "spigot_grad");
    const Vector vertex = family.vertex(z_hat);
    return vertex - sparsemap(family, vertex - eta * gamma.gamma).mu;
}

Vector ste_grad(const PullbackGradient& gamma, double eta) {
    return eta * gamma.gamma;
}

std::vector<double> step_schedule(double eta, int steps, StepSchedule schedule) {
    if (steps < 1) {
        throw std::invalid_argument("step_schedule: steps must be >= 1");
    }
    std::vector<double> etas(static_cast<std::size_t>(steps), eta);
    if (schedule == StepSchedule::InverseSqrt) {
        for (int t = 0; t < steps; ++t) {
            etas[static_cast<std::size_t>(t)] = eta / std::sqrt(static_cast<double>(t + 1));
        }
    }
    return etas;
}

MeanPoint initial_point(const StructureFamily& family, VectorView scores, Init init) {
    switch (init) {
    case Init::MapVertex:
        return MeanPoint::at_vertex(family, map_decode(family, scores));
    case Init::Marginal:
        return gibbs_marginals(family, scores).mean;
    case Init::ZeroProjected:
        return project_polytope(family, Vector::Zero(family.dim()));
    }
    throw std::invalid_argument("unknown init");
}

MeanPoint pullback_descend(const StructureFamily& family, const MeanPoint& init, const GammaFn& gamma_fn,
                           std::span<const double> etas) {
    if (etas.empty()) {
        throw std::invalid_argument("pullback_descend: need at least one step");
    }
    MeanPoint point = init;
    for (double eta : etas) {
        const Vector step = eta * checked_gamma(gamma_fn, point.mu).gamma;
        // A zero step leaves a feasible point where it is.
        if (step.isZero(0.0)) {
            continue;
        }
        point = project_polytope(family, point.mu - step);
    }
    return point;
}

Vector unconstrained_descend(VectorView start, const GammaFn& gamma_fn, std::span<const double> etas) {
    if (etas.empty()) {
        throw std::invalid_argument("unconstrained_descend: need at least one step");
    }
    Vector point = start;
    for (double eta : etas) {
        point -= eta * checked_gamma(gamma_fn, point).gamma;
    }
    return point;
}

MeanPoint mirror_descend(const StructureFamily& family, VectorView scores, const GammaFn& gamma_fn,
                         std::span<const double> etas) {
    if (etas.empty()) {
        throw std::invalid_argument("mirror_descend: need at least one step");
    }
    Vector theta = scores;
    MeanPoint point = gibbs_marginals(family, theta).mean;
    for (double eta : etas) {
        theta -= eta * checked_gamma(gamma_fn, point.mu).gamma;
        point = gibbs_marginals(family, theta).mean;
    }
    return point;
}

Vector perceptron_grad(const StructureFamily& family, VectorView scores, const MeanPoint& target) {
    return perceptron_grad(family, map_decode(family, scores), target.mu);
}

Vector perceptron_grad(const StructureFamily& family, Index z_hat, VectorView target) {
    if (target.size() != family.dim()) {
        throw ShapeMismatch("perceptron_grad: target has wrong length");
    }
    return family.vertex(z_hat) - target;
}

Vector ce_grad_unstructured(VectorView scores, const PullbackGradient& gamma_at_p, double eta) {
    require_gamma(gamma_at_p, scores.size(), "ce_grad_unstructured");
    const Vector p = softmax(scores);
    return p - project_simplex(p - eta * gamma_at_p.gamma);
}

Vector eg_grad_unstructured(VectorView scores, const PullbackGradient& gamma_at_p, double eta) {
    require_gamma(gamma_at_p, scores.size(), "eg_grad_unstructured");
    return softmax(scores) - softmax(scores - eta * gamma_at_p.gamma);
}

Vector ce_grad_structured(const StructureFamily& family, VectorView scores, const PullbackGradient& gamma_at_mu,
                          double eta) {
    require_gamma(gamma_at_mu, family.dim(), "ce_grad_structured");
    const Vector mu = gibbs_marginals(family, scores).mean.mu;
    return mu - sparsemap(family, mu - eta * gamma_at_mu.gamma).mu;
}

Vector eg_grad_structured(const StructureFamily& family, VectorView scores, const PullbackGradient& gamma_at_mu,
                          double eta) {
    require_gamma(gamma_at_mu, family.dim(), "eg_grad_structured");
    return gibbs_marginals(family, scores).mean.mu -
           gibbs_marginals(family, scores - eta * gamma_at_mu.gamma).mean.mu;
}

Matrix softmax_jacobian(VectorView scores, double temperature) {
    require_temperature(temperature);
    const Vector p = softmax(scores / temperature);
    Matrix jacobian = -p * p.transpose();
    jacobian.diagonal() += p;
    return jacobian / temperature;
}

Vector relaxed_grad(VectorView scores, const PullbackGradient& gamma_at_p, double temperature) {
    require_gamma(gamma_at_p, scores.size(), "relaxed_grad");
    return softmax_jacobian(scores, temperature) * gamma_at_p.gamma;
}

Vector relaxed_grad(const StructureFamily& family, VectorView scores, const PullbackGradient& gamma_at_mu,
                    double temperature) {
    require_gamma(gamma_at_mu, family.dim(), "relaxed_grad");
    require_temperature(temperature);
    const GibbsMarginals gibbs = gibbs_marginals(family, scores / temperature);
    const Matrix& vertices = family.vertices();
    const Vector& p = gibbs.distribution.probs;
    const Vector& mu = gibbs.mean.mu;
    const Vector projected = vertices.transpose() * gamma_at_mu.gamma;
    const Vector second_moment = vertices * p.cwiseProduct(projected);
    return (second_moment - mu * mu.dot(gamma_at_mu.gamma)) / temperature;
}

Vector minrisk_grad(const StructureFamily& family, VectorView scores, VectorView losses, double temperature) {
    if (losses.size() != family.size()) {
        throw ShapeMismatch("minrisk_grad: need one loss per vertex");
    }
    require_temperature(temperature);
    const Vector p = gibbs_marginals(family, scores / temperature).distribution.probs;
    // d p / d s = (diag(p) - p p') Z' / tau, so grad = Z (diag(p) - p p') L / tau.
    const Vector weighted = p.cwiseProduct(losses) - p * p.dot(losses);
    return family.vertices() * weighted / temperature;
}

Vector minrisk_grad_score_function(const StructureFamily& family, VectorView scores, VectorView losses,
                                   double temperature) {
    if (losses.size() != family.size()) {
        throw ShapeMismatch("minrisk_grad_score_function: need one loss per vertex");
    }
    require_temperature(temperature);
    const GibbsMarginals gibbs = gibbs_marginals(family, scores / temperature);
    const Vector& p = gibbs.distribution.probs;
    const Vector& mu = gibbs.mean.mu;
    Vector grad = Vector::Zero(family.dim());
    for (Index z = 0; z < family.size(); ++z) {
        // grad_s log p_z = (z - mu) / tau
        grad += p(z) * losses(z) * (family.vertex(z) - mu);
    }
    return grad / temperature;
}

} // namespace lgl
