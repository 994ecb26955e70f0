#pragma once

#include <string>
#include <vector>

#include "driftbench/linalg.hpp"

namespace driftbench::ascoot {

using linalg::Matrix;
using linalg::Vector;

// Co-optimal transport instance with a soft-KL source marginal and a hard
// target marginal on both the sample coupling (N x M) and the feature
// coupling (d1 x d2). Cost is the squared-difference family
// L_ijkl = (X_ik - E_jl)^2.
struct TransportProblem {
    Matrix x;        // N x d1 sample features
    Matrix e;        // M x d2 target ("expert") features
    Vector mu;       // N, > 0, sums to 1; soft sample-row marginal
    Vector nu;       // M, > 0, sums to 1; hard sample-column marginal
    Vector mu_f;     // d1; soft feature-row marginal
    Vector nu_f;     // d2; hard feature-column marginal
    double lambda1 = 1.0;   // soft-marginal strength; +inf selects the balanced limit
    double epsilon = 0.05;  // entropic regularization

    void validate() const;
    static TransportProblem with_uniform_marginals(Matrix x, Matrix e, double lambda1,
                                                   double epsilon);
};

struct TransportPlan {
    Matrix pi;       // nonnegative coupling, pi_ij = u_i K_ij v_j mu_i nu_j
    Vector u;        // row scaling
    Vector v;        // column scaling
    int iterations = 0;
    double marginal_residual = 0.0;  // max_j |col_sum_j - nu_j|
    bool converged = false;
};

struct BcdHistory {
    std::vector<double> objective;         // J_k per outer iteration, J_0 at init
    std::vector<double> sample_residual;   // per outer iteration
    std::vector<double> feature_residual;
    bool converged = false;
};

// C^s_ij = sum_kl (X_ik - E_jl)^2 pi_f_kl, evaluated by the closed-form
// contraction with r = pi_f 1 and c = pi_f^T 1.
Matrix cost_from_plan(const Matrix& x, const Matrix& e, const Matrix& pi_f);

// Symmetric contraction for the feature block: C^f_kl = sum_ij L_ijkl pi_s_ij.
Matrix cost_from_plan_features(const Matrix& x, const Matrix& e, const Matrix& pi_s);

// Generalized Sinkhorn on one block: alternates the soft u-update
//   u_i = (sum_j K_ij nu_j v_j)^(-lambda1/(lambda1+eps))
// and the hard v-update
//   v_j = 1 / (sum_i mu_i K_ij u_i)
// in the log domain. The v-update runs last, so the assembled plan meets the
// hard column marginal up to float round-off.
TransportPlan sinkhorn_asym(const Matrix& c, const Vector& mu, const Vector& nu, double lambda1,
                            double epsilon, double tol = 1e-10, int max_iter = 10000);

// Full As-COOT objective
//   J = <L, pi_s ⊗ pi_f> + lambda1 KL(pi_s 1 | mu) + lambda1 KL(pi_f 1 | mu_f)
//     + eps [KL(pi_s | mu ⊗ nu) + KL(pi_f | mu_f ⊗ nu_f)],
// +inf when a hard column marginal is violated beyond 1e-8.
double objective(const Matrix& pi_s, const Matrix& pi_f, const TransportProblem& problem);

// Dual of the sample sub-problem:
//   -lambda1 sum_i mu_i (e^{-alpha_i/lambda1} - 1) + <beta, nu>
//   - eps sum_ij mu_i nu_j e^{(alpha_i + beta_j - C_ij)/eps}.
double dual_objective(const Vector& alpha, const Vector& beta, const Matrix& c, const Vector& mu,
                      const Vector& nu, double lambda1, double epsilon);

struct BcdResult {
    Matrix pi_s;
    Matrix pi_f;
    BcdHistory history;
};

// Block coordinate descent alternating exact sub-problem solves; stops when
// |J_k - J_{k-1}| <= tol (1 + |J_k|) or max_outer.
BcdResult bcd_solve(const TransportProblem& problem, double tol = 1e-8, int max_outer = 200,
                    double inner_tol = 1e-10, int inner_max_iter = 20000);

// Text round-trip for problems and plans (dims header, whitespace-separated
// floats). Parse failures report the byte offset.
TransportProblem load_problem(const std::string& path);
void save_problem(const TransportProblem& problem, const std::string& path);
void save_plan(const Matrix& pi, const std::string& path);
Matrix load_plan(const std::string& path);

}  // namespace driftbench::ascoot
