#include "checks.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>
#include <sstream>

#include "lgl/errors.hpp"
#include "lgl/estimators.hpp"
#include "lgl/model.hpp"
#include "lgl/polytope.hpp"
#include "lgl/rng.hpp"
#include "oracles.hpp"

namespace lgl::cli {

namespace {

std::string show(const Vector& v) {
    std::ostringstream out;
    out.precision(17);
    out << '[';
    for (Index i = 0; i < v.size(); ++i) {
        out << (i ? ", " : "") << v(i);
    }
    out << ']';
    return out.str();
}

Vector random_vector(Index n, double scale, Rng& rng) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) {
        v(i) = scale * rng.normal();
    }
    return v;
}

double max_abs_diff(const Vector& a, const Vector& b) {
    return a.size() == b.size() ? (a - b).cwiseAbs().maxCoeff() : INFINITY;
}

class Reporter {
public:
    Reporter(std::string name, std::ostream& log, int max_reported)
        : log_(log), max_reported_(max_reported) {
        result_.name = std::move(name);
    }

    void record(bool ok, const std::function<std::string()>& describe) {
        if (ok) {
            ++result_.passed;
            return;
        }
        if (result_.failed < max_reported_) {
            log_ << "  FAIL [" << result_.name << "] " << describe() << '\n';
        }
        ++result_.failed;
    }

    SuiteResult finish() const { return result_; }

private:
    std::ostream& log_;
    int max_reported_;
    SuiteResult result_;
};

using Projector = std::function<Vector(const Vector&)>;

SuiteResult simplex_suite(const CheckOptions& opt, std::ostream& log) {
    Projector project = [](const Vector& v) { return project_simplex(v); };
    if (opt.inject_fault == "simplex") {
        project = [](const Vector& v) {
            Vector p = project_simplex(v);
            p(0) += 1e-6;
            return p;
        };
    }
    Reporter rep("simplex", log, opt.max_reported_failures);
    Rng rng(Rng::derive(opt.seed, 1));
    for (int i = 0; i < 1000; ++i) {
        const Index K = 2 + static_cast<Index>(rng.index(7));
        const Vector v = random_vector(K, 1.5, rng);
        const Vector got = project(v);
        const Vector want = oracle::simplex_projection_kkt(v);
        const double err = max_abs_diff(got, want);
        rep.record(err <= 1e-10 && std::abs(got.sum() - 1.0) <= 1e-12 && got.minCoeff() >= 0.0, [&] {
            return "v=" + show(v) + " got=" + show(got) + " kkt=" + show(want) + " err=" + std::to_string(err);
        });
    }
    return rep.finish();
}

SuiteResult polytope_suite(const CheckOptions& opt, std::ostream& log) {
    const bool faulty = opt.inject_fault == "polytope";
    Reporter rep("polytope", log, opt.max_reported_failures);
    Rng rng(Rng::derive(opt.seed, 2));
    for (const auto& family : {StructureFamily::arborescence(3), StructureFamily::k_subset(6, 3)}) {
        for (int i = 0; i < 100; ++i) {
            const Vector v = random_vector(family.dim(), 1.0, rng);
            MeanPoint got = project_polytope(family, v);
            if (faulty) {
                got.mu(0) += 1e-2;
            }
            const auto want = oracle::polytope_projection_pg(family.vertices(), v);
            const double gap = std::abs((got.mu - v).squaredNorm() - want.objective);
            const double cert = certificate_error(family, got);
            rep.record(gap <= 1e-6 && cert <= 1e-9, [&] {
                return family.spec().name() + " v=" + show(v) + " mu=" + show(got.mu) + " objective gap=" +
                       std::to_string(gap) + " certificate error=" + std::to_string(cert);
            });
        }
    }
    return rep.finish();
}

SuiteResult categorical_suite(const CheckOptions& opt, std::ostream& log) {
    Reporter rep("categorical", log, opt.max_reported_failures);
    Rng rng(Rng::derive(opt.seed, 3));
    for (int i = 0; i < 500; ++i) {
        const int K = 2 + static_cast<int>(rng.index(7));
        const auto family = StructureFamily::categorical(K);
        const Vector s = random_vector(K, 2.0, rng);
        Index argmax = 0;
        for (Index k = 1; k < K; ++k) {
            argmax = s(k) > s(argmax) ? k : argmax;
        }
        const double sm = max_abs_diff(sparsemap(family, s).mu, oracle::simplex_projection_kkt(s));
        const double gm = max_abs_diff(gibbs_marginals(family, s).mean.mu, oracle::softmax_direct(s));
        const bool map_ok = map_decode(family, s) == argmax;
        rep.record(sm <= 1e-10 && gm <= 1e-10 && map_ok, [&] {
            return "s=" + show(s) + " sparsemap err=" + std::to_string(sm) + " gibbs err=" + std::to_string(gm) +
                   " map " + (map_ok ? "ok" : "mismatch");
        });
    }
    return rep.finish();
}

LatentModel random_model(const StructureFamily& family, Index input_dim, Index output_dim, LossKind loss,
                         Rng& rng, Activation activation = Activation::Tanh) {
    LatentModel model = make_model(family, {input_dim, 6, output_dim}, loss, rng.next_u64(), activation, true);
    model.decoder.b1 = random_vector(model.hidden_dim(), 0.3, rng);
    model.decoder.b2 = random_vector(output_dim, 0.3, rng);
    return model;
}

Vector random_target(LossKind loss, Index dim, Rng& rng) {
    if (loss == LossKind::SquaredError) {
        return random_vector(dim, 1.0, rng);
    }
    Vector y = Vector::Zero(dim);
    y(static_cast<Index>(rng.index(static_cast<std::size_t>(dim)))) = 1.0;
    return y;
}

SuiteResult gradients_suite(const CheckOptions& opt, std::ostream& log) {
    Reporter rep("gradients", log, opt.max_reported_failures);
    Rng rng(Rng::derive(opt.seed, 4));
    const std::vector<StructureFamily> families{StructureFamily::categorical(4), StructureFamily::k_subset(5, 2),
                                                StructureFamily::arborescence(3)};

    // Relaxed: end-to-end through the decoder at the (tempered) marginal.
    for (int i = 0; i < 100; ++i) {
        const StructureFamily& family = families[static_cast<std::size_t>(i) % families.size()];
        const LossKind loss = i % 2 ? LossKind::SquaredError : LossKind::SoftmaxCrossEntropy;
        const LatentModel model = random_model(family, 3, 3, loss, rng);
        const Vector x = random_vector(3, 1.0, rng);
        const Vector y = random_target(loss, 3, rng);
        const Vector s = random_vector(family.dim(), 1.0, rng);
        const double tau = 0.5 + rng.uniform();
        const bool categorical = family.kind() == FamilyKind::Categorical;
        auto relaxed_point = [&](const Vector& scores) {
            return categorical ? softmax(scores / tau) : gibbs_marginals(family, scores / tau).mean.mu;
        };
        const auto objective = [&](const Vector& scores) {
            return forward(model, x, relaxed_point(scores), y).loss;
        };
        const PullbackGradient gamma = decoder_backward(model, forward(model, x, relaxed_point(s), y)).gamma;
        const Vector analytic = categorical ? relaxed_grad(s, gamma, tau) : relaxed_grad(family, s, gamma, tau);
        const double err = finite_diff_check(objective, s, analytic);
        rep.record(err <= 1e-6, [&] {
            return "relaxed " + family.spec().name() + " s=" + show(s) + " rel err=" + std::to_string(err);
        });
    }

    // MinRisk: expected loss under the Gibbs distribution.
    for (int i = 0; i < 100; ++i) {
        const StructureFamily& family = families[static_cast<std::size_t>(i) % families.size()];
        const Vector s = random_vector(family.dim(), 1.0, rng);
        const Vector losses = random_vector(family.size(), 1.0, rng).cwiseAbs();
        const double tau = 0.5 + rng.uniform();
        const auto objective = [&](const Vector& scores) {
            return oracle::gibbs_probs_direct(family.vertices(), scores / tau).dot(losses);
        };
        const Vector analytic = minrisk_grad(family, s, losses, tau);
        const Vector score_form = minrisk_grad_score_function(family, s, losses, tau);
        const double err = finite_diff_check(objective, s, analytic);
        const double forms = max_abs_diff(analytic, score_form);
        rep.record(err <= 1e-6 && forms <= 1e-10, [&] {
            return "minrisk " + family.spec().name() + " s=" + show(s) + " rel err=" + std::to_string(err) +
                   " form mismatch=" + std::to_string(forms);
        });
    }

    // Decoder: gamma and theta.
    for (int i = 0; i < 50; ++i) {
        const StructureFamily& family = families[static_cast<std::size_t>(i) % families.size()];
        const LossKind loss = i % 2 ? LossKind::SquaredError : LossKind::SoftmaxCrossEntropy;
        const LatentModel model = random_model(family, 4, 3, loss, rng);
        const Vector x = random_vector(4, 1.0, rng);
        const Vector y = random_target(loss, 3, rng);
        const Vector mu = gibbs_marginals(family, random_vector(family.dim(), 1.0, rng)).mean.mu;
        const DecoderGradient g = decoder_backward(model, forward(model, x, mu, y));
        const double gamma_err = finite_diff_check(
            [&](const Vector& latent) { return forward(model, x, latent, y).loss; }, mu, g.gamma.gamma);
        const double theta_err = finite_diff_check(
            [&](const Vector& flat) {
                LatentModel probe = model;
                probe.decoder = unflatten_decoder(model.decoder, flat);
                return forward(probe, x, mu, y).loss;
            },
            flatten_decoder(model.decoder), flatten_decoder(g.theta));
        rep.record(gamma_err <= 1e-6 && theta_err <= 1e-6, [&] {
            return "decoder " + family.spec().name() + " gamma err=" + std::to_string(gamma_err) +
                   " theta err=" + std::to_string(theta_err);
        });
    }
    return rep.finish();
}

SuiteResult identities_suite(const CheckOptions& opt, std::ostream& log) {
    Reporter rep("identities", log, opt.max_reported_failures);
    Rng rng(Rng::derive(opt.seed, 5));
    const std::vector<StructureFamily> families{StructureFamily::categorical(4), StructureFamily::k_subset(5, 2),
                                                StructureFamily::arborescence(3)};
    for (int i = 0; i < 200; ++i) {
        const StructureFamily& family = families[static_cast<std::size_t>(i) % families.size()];
        const Vector s = random_vector(family.dim(), 1.0, rng);
        const PullbackGradient gamma{random_vector(family.dim(), 1.0, rng)};
        const double eta = std::exp(rng.uniform(-3.0, 2.0));
        const Index z_hat = map_decode(family, s);

        const Vector spigot = spigot_grad(family, z_hat, gamma, eta);
        const double etas[] = {eta};
        const MeanPoint target = pullback_descend(
            family, MeanPoint::at_vertex(family, z_hat), [&](const Vector&) { return gamma; }, etas);
        const double spigot_err = max_abs_diff(spigot, perceptron_grad(family, s, target));
        rep.record(spigot_err <= 1e-12, [&] {
            return "spigot " + family.spec().name() + " s=" + show(s) + " gamma=" + show(gamma.gamma) +
                   " eta=" + std::to_string(eta) + " err=" + std::to_string(spigot_err);
        });

        const Vector ste = ste_grad(gamma, eta);
        const Vector relaxed_target = family.vertex(z_hat) - eta * gamma.gamma;
        const bool ste_exact = ste == Vector(eta * gamma.gamma);
        const double ste_err = max_abs_diff(ste, perceptron_grad(family, z_hat, relaxed_target));
        rep.record(ste_exact && ste_err <= 1e-15, [&] {
            return "ste " + family.spec().name() + " err=" + std::to_string(ste_err);
        });

        const Vector p = oracle::softmax_direct(s);
        const Vector eg = eg_grad_unstructured(s, gamma, eta);
        const double eg_err = max_abs_diff(eg, p - oracle::softmax_direct(s - eta * gamma.gamma));
        rep.record(eg_err <= 1e-12 && std::abs(eg.sum()) <= 1e-14, [&] {
            return "expgrad s=" + show(s) + " err=" + std::to_string(eg_err) + " sum=" + std::to_string(eg.sum());
        });

        const Vector ce = ce_grad_unstructured(s, gamma, eta);
        const double ce_err = max_abs_diff(ce, p - oracle::simplex_projection_kkt(p - eta * gamma.gamma));
        rep.record(ce_err <= 1e-12, [&] { return "spigot_ce s=" + show(s) + " err=" + std::to_string(ce_err); });

        // Structured exponentiated gradient against an iterative KL-prox solve.
        const Vector probs = oracle::gibbs_probs_direct(family.vertices(), s);
        const Vector prox = oracle::kl_prox_iterative(probs, eta * family.vertices().transpose() * gamma.gamma);
        const Vector eg_struct = eg_grad_structured(family, s, gamma, eta);
        const double eg_struct_err = max_abs_diff(eg_struct, family.vertices() * (probs - prox));
        rep.record(eg_struct_err <= 1e-9, [&] {
            return "expgrad(structured) " + family.spec().name() + " err=" + std::to_string(eg_struct_err);
        });
    }
    return rep.finish();
}

using SuiteFn = SuiteResult (*)(const CheckOptions&, std::ostream&);

const std::vector<std::pair<std::string, SuiteFn>>& suites() {
    static const std::vector<std::pair<std::string, SuiteFn>> table{
        {"simplex", simplex_suite},       {"polytope", polytope_suite},     {"categorical", categorical_suite},
        {"gradients", gradients_suite}, {"identities", identities_suite},
    };
    return table;
}

} // namespace

const std::vector<std::string>& suite_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        for (const auto& [name, fn] : suites()) {
            out.push_back(name);
        }
        return out;
    }();
    return names;
}

std::vector<SuiteResult> run_checks(const CheckOptions& options, std::ostream& log) {
    const auto& names = suite_names();
    if (options.suite && std::find(names.begin(), names.end(), *options.suite) == names.end()) {
        throw ConfigError("unknown suite '" + *options.suite + "'");
    }
    if (options.inject_fault && *options.inject_fault != "simplex" && *options.inject_fault != "polytope") {
        throw ConfigError("unknown fault '" + *options.inject_fault + "' (expected simplex or polytope)");
    }
    std::vector<SuiteResult> results;
    for (const auto& [name, fn] : suites()) {
        if (options.suite && *options.suite != name) {
            continue;
        }
        results.push_back(fn(options, log));
        const SuiteResult& r = results.back();
        log << "suite " << r.name << ": " << r.passed << "/" << (r.passed + r.failed) << " passed"
            << (r.failed ? "  FAILED" : "") << '\n';
    }
    return results;
}

} // namespace lgl::cli
