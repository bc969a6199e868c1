#include "oracles.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

namespace lgl::oracle {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

VectorXd simplex_projection_kkt(const VectorXd& v) {
    const Index n = v.size();
    if (n < 1 || n > 16) {
        throw std::invalid_argument("simplex_projection_kkt: 1 <= K <= 16");
    }
    VectorXd best;
    double best_violation = std::numeric_limits<double>::infinity();
    for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
        double sum = 0.0;
        int count = 0;
        for (Index i = 0; i < n; ++i) {
            if (mask & (1u << i)) {
                sum += v(i);
                ++count;
            }
        }
        const double t = (sum - 1.0) / count;
        // Primal feasibility on S, dual feasibility off S.
        double violation = 0.0;
        VectorXd p = VectorXd::Zero(n);
        for (Index i = 0; i < n; ++i) {
            if (mask & (1u << i)) {
                p(i) = v(i) - t;
                violation = std::max(violation, -p(i));
            } else {
                violation = std::max(violation, v(i) - t);
            }
        }
        if (violation < best_violation) {
            best_violation = violation;
            best = p;
        }
    }
    return best.cwiseMax(0.0);
}

VectorXd simplex_projection_michelot(const VectorXd& v) {
    const Index n = v.size();
    std::vector<bool> active(static_cast<std::size_t>(n), true);
    double t = 0.0;
    bool changed = true;
    while (changed) {
        changed = false;
        double sum = 0.0;
        int count = 0;
        for (Index i = 0; i < n; ++i) {
            if (active[static_cast<std::size_t>(i)]) {
                sum += v(i);
                ++count;
            }
        }
        t = (sum - 1.0) / count;
        for (Index i = 0; i < n; ++i) {
            if (active[static_cast<std::size_t>(i)] && v(i) <= t) {
                active[static_cast<std::size_t>(i)] = false;
                changed = true;
            }
        }
    }
    VectorXd p(n);
    for (Index i = 0; i < n; ++i) {
        p(i) = active[static_cast<std::size_t>(i)] ? v(i) - t : 0.0;
    }
    return p;
}

PolytopeProjection polytope_projection_pg(const MatrixXd& vertices, const VectorXd& v, int iterations) {
    const Index m = vertices.cols();
    const MatrixXd gram = vertices.transpose() * vertices;
    const VectorXd linear = vertices.transpose() * v;
    const double lipschitz = Eigen::SelfAdjointEigenSolver<MatrixXd>(gram, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
    const double step = 1.0 / lipschitz;
    VectorXd p = VectorXd::Constant(m, 1.0 / static_cast<double>(m));
    for (int it = 0; it < iterations; ++it) {
        p = simplex_projection_michelot(p - step * (gram * p - linear));
    }
    PolytopeProjection out;
    out.weights = p;
    out.mu = vertices * p;
    out.objective = (out.mu - v).squaredNorm();
    return out;
}

namespace {

bool has_cycle(const std::vector<int>& head, int num_words) {
    // 0 = unvisited, 1 = on the current path, 2 = known to reach the root.
    std::vector<int> state(static_cast<std::size_t>(num_words + 1), 0);
    state[0] = 2;
    for (int start = 1; start <= num_words; ++start) {
        std::vector<int> path;
        int node = start;
        while (state[static_cast<std::size_t>(node)] == 0) {
            state[static_cast<std::size_t>(node)] = 1;
            path.push_back(node);
            node = head[static_cast<std::size_t>(node)];
        }
        if (state[static_cast<std::size_t>(node)] == 1) {
            return true;
        }
        for (int p : path) {
            state[static_cast<std::size_t>(p)] = 2;
        }
    }
    return false;
}

} // namespace

std::vector<VectorXd> arborescences_brute_force(int num_words) {
    const int L = num_words;
    // Running arc numbering.
    std::vector<std::vector<int>> part(static_cast<std::size_t>(L + 1), std::vector<int>(static_cast<std::size_t>(L + 1), -1));
    int counter = 0;
    for (int h = 0; h <= L; ++h) {
        for (int m = 1; m <= L; ++m) {
            if (h != m) {
                part[static_cast<std::size_t>(h)][static_cast<std::size_t>(m)] = counter++;
            }
        }
    }
    std::vector<VectorXd> trees;
    std::uint64_t total = 1;
    for (int i = 0; i < L; ++i) {
        total *= static_cast<std::uint64_t>(L);
    }
    std::vector<int> head(static_cast<std::size_t>(L + 1), 0);
    for (std::uint64_t code = 0; code < total; ++code) {
        std::uint64_t rest = code;
        for (int m = 1; m <= L; ++m) {
            // choice in [0, L) among the L nodes other than m
            const int choice = static_cast<int>(rest % static_cast<std::uint64_t>(L));
            rest /= static_cast<std::uint64_t>(L);
            head[static_cast<std::size_t>(m)] = choice >= m ? choice + 1 : choice;
        }
        if (has_cycle(head, L)) {
            continue;
        }
        VectorXd z = VectorXd::Zero(static_cast<Index>(counter));
        for (int m = 1; m <= L; ++m) {
            z(part[static_cast<std::size_t>(head[static_cast<std::size_t>(m)])][static_cast<std::size_t>(m)]) = 1.0;
        }
        trees.push_back(std::move(z));
    }
    return trees;
}

std::vector<VectorXd> k_subsets_brute_force(int num_parts, int k) {
    if (num_parts > 24) {
        throw std::invalid_argument("k_subsets_brute_force: K <= 24");
    }
    std::vector<VectorXd> out;
    for (std::uint32_t mask = 0; mask < (1u << num_parts); ++mask) {
        if (std::popcount(mask) != k) {
            continue;
        }
        VectorXd z = VectorXd::Zero(num_parts);
        for (int i = 0; i < num_parts; ++i) {
            if (mask & (1u << i)) {
                z(i) = 1.0;
            }
        }
        out.push_back(std::move(z));
    }
    return out;
}

VectorXd gibbs_probs_direct(const MatrixXd& vertices, const VectorXd& scores) {
    const Index m = vertices.cols();
    std::vector<long double> weight(static_cast<std::size_t>(m));
    long double total = 0.0L;
    for (Index j = 0; j < m; ++j) {
        long double dot = 0.0L;
        for (Index i = 0; i < vertices.rows(); ++i) {
            dot += static_cast<long double>(vertices(i, j)) * static_cast<long double>(scores(i));
        }
        weight[static_cast<std::size_t>(j)] = std::exp(dot);
        total += weight[static_cast<std::size_t>(j)];
    }
    VectorXd p(m);
    for (Index j = 0; j < m; ++j) {
        p(j) = static_cast<double>(weight[static_cast<std::size_t>(j)] / total);
    }
    return p;
}

VectorXd gibbs_mean_direct(const MatrixXd& vertices, const VectorXd& scores) {
    return vertices * gibbs_probs_direct(vertices, scores);
}

VectorXd softmax_direct(const VectorXd& scores) {
    return gibbs_probs_direct(MatrixXd::Identity(scores.size(), scores.size()), scores);
}

VectorXd kl_prox_iterative(const VectorXd& p0, const VectorXd& linear, int iterations) {
    // Mirror descent on f(p) = <c, p> + KL(p || p0) with step 1/2:
    // log p <- (log p + log p0 - c) / 2, renormalized.
    VectorXd log_p = p0.array().log().matrix();
    const VectorXd anchor = log_p - linear;
    for (int it = 0; it < iterations; ++it) {
        log_p = 0.5 * (log_p + anchor);
        const double top = log_p.maxCoeff();
        log_p.array() -= top + std::log((log_p.array() - top).exp().sum());
    }
    return log_p.array().exp().matrix();
}

VectorXd central_difference(const std::function<double(const VectorXd&)>& fn, const VectorXd& point, double step) {
    VectorXd grad(point.size());
    for (Index i = 0; i < point.size(); ++i) {
        VectorXd up = point;
        VectorXd down = point;
        up(i) += step;
        down(i) -= step;
        grad(i) = (fn(up) - fn(down)) / (2.0 * step);
    }
    return grad;
}

double vertex_difference_residual(const MatrixXd& vertices, const VectorXd& g) {
    if (vertices.cols() < 2) {
        return g.norm();
    }
    MatrixXd basis(vertices.rows(), vertices.cols() - 1);
    for (Index j = 1; j < vertices.cols(); ++j) {
        basis.col(j - 1) = vertices.col(j) - vertices.col(0);
    }
    const VectorXd coeffs = basis.completeOrthogonalDecomposition().solve(g);
    return (basis * coeffs - g).norm();
}

} // namespace lgl::oracle
