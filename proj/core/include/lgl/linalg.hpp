#pragma once

#include <Eigen/Dense>

namespace lgl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

// Read-only view accepted by every numerical entry point.
using VectorView = Eigen::Ref<const Eigen::VectorXd>;
using MatrixView = Eigen::Ref<const Eigen::MatrixXd>;

inline bool all_finite(VectorView v) { return v.allFinite(); }

} // namespace lgl
