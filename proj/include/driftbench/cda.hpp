#pragma once

#include "driftbench/linalg.hpp"
#include "driftbench/model.hpp"

namespace driftbench::cda {

using linalg::Matrix;
using linalg::Vector;

// Running pooled statistics of the feature stream plus the tracked top-k
// principal component basis. Updated by exactly one owner, sequentially.
struct DomainTracker {
    long n_seen = 0;
    Vector mean;        // d
    Matrix cov;         // d x d, symmetric PSD
    Matrix components;  // d x k, orthonormal sign-fixed columns
    std::size_t k = 8;
    double last_distance = 0.0;

    bool initialized() const { return n_seen > 0; }
};

DomainTracker make_tracker(std::size_t dim, std::size_t k);

// Pooled mean/covariance update (exact for population normalization),
// eigendecomposition of the new covariance, and the squared Frobenius
// distance between consecutive component bases. The first batch initializes
// the tracker and reports distance 0.
double ipca_update(DomainTracker& tracker, const Matrix& x_batch);

struct AlphaPolicy {
    enum class Kind { linear_clamp, exp_decay };
    Kind kind = Kind::linear_clamp;
    double alpha_bound = 0.99;  // floor of the EMA weight
    double kappa = 0.1;         // decay scale (exp_decay only)
};

// Maps the domain-shift distance to the teacher EMA weight in [alpha_bound, 1]:
// linear_clamp: clamp(1 - distance); exp_decay: bound + (1-bound) e^{-d/kappa}.
double alpha_from_distance(double distance, const AlphaPolicy& policy);

// Diagnostic trade-off objective
//   F = dist * ||T_next - S_next||^2 + (1 - dist) * ||T_next - T_prev||^2,
// minimized by the EMA blend with alpha = 1 - dist. distance is clipped to
// [0, 1] here.
double tradeoff_objective(const model::ModelParams& theta_t_next,
                          const model::ModelParams& theta_s_next,
                          const model::ModelParams& theta_t_prev, double distance);

}  // namespace driftbench::cda
