#pragma once

// Slow reference computations used to check the production routines. Each
// one takes a different algorithmic route from the code it checks and
// depends only on Eigen, never on the lgl solvers.

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace lgl::oracle {

// Euclidean projection onto the simplex by trying every support set S,
// solving p_S = v_S - t with sum(p_S) = 1, and keeping the unique candidate
// that satisfies the KKT conditions. Exponential in v.size(); K <= 16.
Eigen::VectorXd simplex_projection_kkt(const Eigen::VectorXd& v);

// Michelot's iterative support-shrinking simplex projection.
Eigen::VectorXd simplex_projection_michelot(const Eigen::VectorXd& v);

struct PolytopeProjection {
    Eigen::VectorXd weights; // over the columns of the vertex matrix
    Eigen::VectorXd mu;
    double objective = 0.0;  // ||mu - v||^2
};

// min_p ||M p - v||^2 over the probability simplex by fixed-step projected
// gradient (step 1 / lambda_max(M'M)), started at the uniform distribution.
PolytopeProjection polytope_projection_pg(const Eigen::MatrixXd& vertices, const Eigen::VectorXd& v,
                                          int iterations = 100'000);

// Every spanning arborescence of the complete digraph on {0(root), 1..L},
// found by testing all L^L parent maps for cycles. Parts are numbered by a
// running counter over arcs (h, m) in lexicographic order, h != m.
std::vector<Eigen::VectorXd> arborescences_brute_force(int num_words);

// All {0,1}^K vectors with exactly k ones, by scanning bitmasks.
std::vector<Eigen::VectorXd> k_subsets_brute_force(int num_parts, int k);

// sum_z exp(s'z) z / sum_z exp(s'z) in long double without stabilization.
Eigen::VectorXd gibbs_mean_direct(const Eigen::MatrixXd& vertices, const Eigen::VectorXd& scores);
Eigen::VectorXd gibbs_probs_direct(const Eigen::MatrixXd& vertices, const Eigen::VectorXd& scores);

// exp(s) / sum exp(s) in long double.
Eigen::VectorXd softmax_direct(const Eigen::VectorXd& scores);

// argmin_p <c, p> + KL(p || p0) over the simplex by 500 (by default)
// damped exponentiated-gradient iterations.
Eigen::VectorXd kl_prox_iterative(const Eigen::VectorXd& p0, const Eigen::VectorXd& linear, int iterations = 500);

// Central differences.
Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd&)>& fn,
                                   const Eigen::VectorXd& point, double step = 1e-5);

// Basis residual: distance from g to span{z - z_0 : z in Z}, by least squares.
double vertex_difference_residual(const Eigen::MatrixXd& vertices, const Eigen::VectorXd& g);

} // namespace lgl::oracle
