#pragma once

#include <cstdint>
#include <optional>

#include "driftbench/linalg.hpp"
#include "driftbench/model.hpp"

namespace driftbench::rfp {

using linalg::Matrix;
using linalg::Vector;

struct RfpConfig {
    std::size_t n_passes = 8;   // N dropout forward passes
    double gamma = 0.4;         // entropy screen factor; threshold is gamma * log C
    double tau = 1.2;           // consistency filter threshold on s_max
    double dropout_rate = 0.1;
};

// SVD summary of one sample's N x C dropout prediction matrix.
struct ConsistencyReport {
    Matrix p_matrix;    // N x C, row-stochastic
    Vector sigma;       // singular values, descending
    Matrix v;           // C x r right singular vectors (columns)
    Vector s;           // consistency distribution, length C
    double s_max = 0.0;
    double eps_bound = 0.0;  // tightness term of the s_max upper bound
    Vector p_bar;       // column means of p_matrix
};

struct RfpDecision {
    enum class Kind { direct_guide, refined_guide, discard };
    Kind kind = Kind::direct_guide;
    Vector guidance;  // empty when discard
    std::optional<ConsistencyReport> report;
};

// Stacks N dropout forward passes of the teacher on one input; masks are
// drawn deterministically from the seed with draw indices 0..N-1.
Matrix consistency_matrix(const model::ModelParams& teacher, const Vector& x,
                          const RfpConfig& cfg, std::uint64_t seed);

// s_j = sum_i sigma_i V_{j,i} over ranks above the spectrum cutoff, plus the
// upper-bound tightness term eps = max_j sum_k sigma_k |v_{k,j}| |1 - u_k^T 1/N|.
ConsistencyReport consistency_distribution(const Matrix& p_matrix);

// softmax(softmax(s) ⊙ teacher_probs); always a strictly positive distribution.
Vector refine(const Vector& teacher_probs, const Vector& s);

// Full per-sample flow: entropy screen -> consistency -> filter or refine.
// Entropy exactly at the threshold routes to direct_guide.
RfpDecision decide(const model::ModelParams& teacher, const Vector& x, const RfpConfig& cfg,
                   std::uint64_t seed);

}  // namespace driftbench::rfp
