#include "driftbench/rfp.hpp"

#include <algorithm>
#include <cmath>

#include "driftbench/errors.hpp"

namespace driftbench::rfp {

Matrix consistency_matrix(const model::ModelParams& teacher, const Vector& x,
                          const RfpConfig& cfg, std::uint64_t seed) {
    if (cfg.n_passes < 2) throw InvalidInputError("consistency_matrix: need N >= 2 passes");
    const std::size_t c = teacher.num_classes();
    Matrix p(cfg.n_passes, c);
    for (std::size_t n = 0; n < cfg.n_passes; ++n) {
        model::DropoutMask mask = model::make_dropout_mask(teacher, cfg.dropout_rate, seed, n);
        model::Prediction pred = model::forward(teacher, x, &mask);
        for (std::size_t j = 0; j < c; ++j) p(n, j) = pred.probs[j];
    }
    return p;
}

ConsistencyReport consistency_distribution(const Matrix& p_matrix) {
    if (p_matrix.rows < 1 || p_matrix.cols < 1)
        throw InvalidInputError("consistency_distribution: empty matrix");
    if (linalg::frobenius_norm_sq(p_matrix) == 0.0)
        throw InvalidInputError("consistency_distribution: all-zero matrix");

    const std::size_t n = p_matrix.rows;
    const std::size_t c = p_matrix.cols;
    linalg::SvdResult dec = linalg::svd(p_matrix);
    const std::size_t r = dec.rank();

    ConsistencyReport rep;
    rep.p_matrix = p_matrix;
    rep.sigma = dec.sigma;
    rep.v = linalg::transpose(dec.vt);  // C x r_full, columns are right vectors

    rep.p_bar = Vector(c, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < c; ++j) rep.p_bar[j] += p_matrix(i, j);
    for (double& v : rep.p_bar) v /= static_cast<double>(n);

    // s_j = sum_k sigma_k v_{k,j} over retained ranks; eps follows the same
    // truncation so the bound identity stays exact.
    rep.s = Vector(c, 0.0);
    Vector u_align(r, 0.0);  // 1 - (1/N) u_k^T 1_N per retained rank
    for (std::size_t k = 0; k < r; ++k) {
        double usum = 0.0;
        for (std::size_t i = 0; i < n; ++i) usum += dec.u(i, k);
        u_align[k] = 1.0 - usum / static_cast<double>(n);
    }
    rep.eps_bound = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
        double sj = 0.0;
        double ej = 0.0;
        for (std::size_t k = 0; k < r; ++k) {
            sj += dec.sigma[k] * dec.vt(k, j);
            ej += dec.sigma[k] * std::fabs(dec.vt(k, j)) * std::fabs(u_align[k]);
        }
        rep.s[j] = sj;
        rep.eps_bound = std::max(rep.eps_bound, ej);
    }
    rep.s_max = *std::max_element(rep.s.begin(), rep.s.end());
    return rep;
}

Vector refine(const Vector& teacher_probs, const Vector& s) {
    if (teacher_probs.size() != s.size()) throw InvalidInputError("refine: length mismatch");
    // inner softmax(s)
    double smax = s[0];
    for (double v : s) smax = std::max(smax, v);
    Vector w(s.size());
    double wsum = 0.0;
    for (std::size_t j = 0; j < s.size(); ++j) {
        w[j] = std::exp(s[j] - smax);
        wsum += w[j];
    }
    // weighted logits, outer softmax
    double zmax = -1e300;
    for (std::size_t j = 0; j < s.size(); ++j) {
        w[j] = (w[j] / wsum) * teacher_probs[j];
        zmax = std::max(zmax, w[j]);
    }
    Vector out(s.size());
    double osum = 0.0;
    for (std::size_t j = 0; j < s.size(); ++j) {
        out[j] = std::exp(w[j] - zmax);
        osum += out[j];
    }
    for (double& v : out) v /= osum;
    return out;
}

RfpDecision decide(const model::ModelParams& teacher, const Vector& x, const RfpConfig& cfg,
                   std::uint64_t seed) {
    if (cfg.gamma <= 0.0) throw InvalidInputError("decide: gamma must be > 0");
    if (cfg.tau < 0.0) throw InvalidInputError("decide: tau must be >= 0");

    model::Prediction clean = model::forward(teacher, x);
    const double gamma_c = cfg.gamma * std::log(static_cast<double>(teacher.num_classes()));

    RfpDecision d;
    if (model::entropy(clean.probs) <= gamma_c) {
        d.kind = RfpDecision::Kind::direct_guide;
        d.guidance = clean.probs;
        return d;
    }

    Matrix pc = consistency_matrix(teacher, x, cfg, seed);
    d.report = consistency_distribution(pc);
    if (d.report->s_max < cfg.tau) {
        d.kind = RfpDecision::Kind::discard;
        return d;
    }
    d.kind = RfpDecision::Kind::refined_guide;
    d.guidance = refine(clean.probs, d.report->s);
    return d;
}

}  // namespace driftbench::rfp
