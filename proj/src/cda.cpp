#include "driftbench/cda.hpp"

#include <algorithm>
#include <cmath>

#include "driftbench/errors.hpp"

namespace driftbench::cda {

namespace {

// Top-k eigenvectors of a symmetric PSD matrix as sign-fixed columns.
Matrix top_components(const Matrix& cov, std::size_t k) {
    linalg::EigResult eig = linalg::sym_eig(cov);
    const std::size_t d = cov.rows;
    Matrix v(d, k);
    for (std::size_t j = 0; j < k; ++j)
        for (std::size_t i = 0; i < d; ++i) v(i, j) = eig.vectors(i, j);
    return v;
}

}  // namespace

DomainTracker make_tracker(std::size_t dim, std::size_t k) {
    if (k < 1 || k > dim) throw InvalidInputError("make_tracker: need 1 <= k <= dim");
    DomainTracker t;
    t.mean = Vector(dim, 0.0);
    t.cov = Matrix(dim, dim);
    t.components = Matrix(dim, k);
    t.k = k;
    return t;
}

double ipca_update(DomainTracker& tracker, const Matrix& x_batch) {
    const std::size_t d = tracker.mean.size();
    if (x_batch.rows < 1) throw EmptyInputError("ipca_update: empty batch");
    if (x_batch.cols != d) throw InvalidInputError("ipca_update: feature dim mismatch");

    linalg::MeanCov batch = linalg::covariance(x_batch);
    const double n_new = static_cast<double>(x_batch.rows);

    if (!tracker.initialized()) {
        tracker.n_seen = static_cast<long>(x_batch.rows);
        tracker.mean = batch.mean;
        tracker.cov = batch.cov;
        tracker.components = top_components(tracker.cov, tracker.k);
        tracker.last_distance = 0.0;
        return 0.0;
    }

    const double n_old = static_cast<double>(tracker.n_seen);
    const double n_tot = n_old + n_new;

    // Pooled covariance: (N C_t + n C_new)/(N+n) + N n/(N+n)^2 (mu - mu_new)(mu - mu_new)^T.
    Matrix cov_next(d, d);
    const double cross_w = n_old * n_new / (n_tot * n_tot);
    for (std::size_t a = 0; a < d; ++a) {
        const double da = tracker.mean[a] - batch.mean[a];
        for (std::size_t b = 0; b < d; ++b) {
            const double db = tracker.mean[b] - batch.mean[b];
            cov_next(a, b) =
                (n_old * tracker.cov(a, b) + n_new * batch.cov(a, b)) / n_tot + cross_w * da * db;
        }
    }
    Vector mean_next(d);
    for (std::size_t a = 0; a < d; ++a)
        mean_next[a] = (n_old * tracker.mean[a] + n_new * batch.mean[a]) / n_tot;

    Matrix comp_next = top_components(cov_next, tracker.k);
    double dist = 0.0;
    for (std::size_t i = 0; i < comp_next.size(); ++i) {
        const double dv = tracker.components.data[i] - comp_next.data[i];
        dist += dv * dv;
    }

    tracker.n_seen += static_cast<long>(x_batch.rows);
    tracker.mean = std::move(mean_next);
    tracker.cov = std::move(cov_next);
    tracker.components = std::move(comp_next);
    tracker.last_distance = dist;
    return dist;
}

double alpha_from_distance(double distance, const AlphaPolicy& policy) {
    if (distance < 0.0) throw InvalidInputError("alpha_from_distance: negative distance");
    if (policy.alpha_bound <= 0.0 || policy.alpha_bound >= 1.0)
        throw InvalidInputError("alpha_from_distance: alpha_bound must be in (0,1)");
    double alpha;
    if (policy.kind == AlphaPolicy::Kind::linear_clamp) {
        alpha = 1.0 - distance;
    } else {
        if (policy.kappa <= 0.0) throw InvalidInputError("alpha_from_distance: kappa must be > 0");
        alpha = policy.alpha_bound + (1.0 - policy.alpha_bound) * std::exp(-distance / policy.kappa);
    }
    return std::clamp(alpha, policy.alpha_bound, 1.0);
}

double tradeoff_objective(const model::ModelParams& theta_t_next,
                          const model::ModelParams& theta_s_next,
                          const model::ModelParams& theta_t_prev, double distance) {
    const double w = std::clamp(distance, 0.0, 1.0);
    return w * model::sq_distance(theta_t_next, theta_s_next) +
           (1.0 - w) * model::sq_distance(theta_t_next, theta_t_prev);
}

}  // namespace driftbench::cda
