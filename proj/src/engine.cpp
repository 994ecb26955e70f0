#include "driftbench/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "driftbench/errors.hpp"
#include "driftbench/rng.hpp"

namespace driftbench::engine {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Seed tags for the per-step substreams.
constexpr std::uint64_t kTagRestore = 0x72657374ULL;       // "rest"
constexpr std::uint64_t kTagRfpBase = 0x100000ULL;
constexpr std::uint64_t kTagStudentMaskBase = 0x200000ULL;

int argmax(const linalg::Vector& v) {
    return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

std::string mode_name(Mode m) {
    switch (m) {
        case Mode::ctta_t: return "ctta_t";
        case Mode::no_adapt: return "no_adapt";
        case Mode::fixed_alpha: return "fixed_alpha";
        case Mode::entropy_min: return "entropy_min";
    }
    return "?";
}

Mode mode_from_name(const std::string& name) {
    if (name == "ctta_t") return Mode::ctta_t;
    if (name == "no_adapt") return Mode::no_adapt;
    if (name == "fixed_alpha") return Mode::fixed_alpha;
    if (name == "entropy_min") return Mode::entropy_min;
    throw InvalidInputError("unknown engine mode '" + name + "'");
}

EngineState init_state(const EngineConfig& cfg, const ModelParams& theta0) {
    if (cfg.mode == Mode::fixed_alpha &&
        (cfg.fixed_alpha_value < 0.0 || cfg.fixed_alpha_value > 1.0))
        throw InvalidInputError("init_state: fixed alpha must be in [0,1]");
    if (cfg.restore_prob < 0.0 || cfg.restore_prob > 1.0)
        throw InvalidInputError("init_state: restore_prob must be in [0,1]");

    EngineState st;
    st.theta_source = theta0;
    st.theta_teacher = theta0;
    st.theta_student = theta0;
    const std::size_t d = theta0.input_dim();
    const std::size_t k = cfg.cda_k > 0 ? cfg.cda_k : std::min<std::size_t>(d, 8);
    st.tracker = cda::make_tracker(d, k);
    st.optimizer = cfg.optimizer_kind == model::OptimizerState::Kind::adam
                       ? model::OptimizerState::adam(cfg.lr, theta0)
                       : model::OptimizerState::sgd(cfg.lr);
    st.optimizer.weight_decay = cfg.weight_decay;
    return st;
}

ModelParams ema_update(const ModelParams& theta_t, const ModelParams& theta_s, double alpha) {
    if (alpha < 0.0 || alpha > 1.0) throw InvalidInputError("ema_update: alpha must be in [0,1]");
    ModelParams out = theta_t;
    model::scale(out, alpha);
    model::axpy(out, 1.0 - alpha, theta_s);
    return out;
}

std::pair<ModelParams, double> stochastic_restore(const ModelParams& theta_t,
                                                  const ModelParams& theta_0, double p,
                                                  std::uint64_t seed) {
    if (p < 0.0 || p > 1.0) throw InvalidInputError("stochastic_restore: p must be in [0,1]");
    ModelParams out = theta_t;
    if (p == 0.0) return {std::move(out), 0.0};
    Rng rng(seed, kTagRestore);
    long restored = 0;
    long total = 0;
    auto src_it = [&theta_0]() {
        std::vector<const double*> ptrs;
        model::for_each_scalar(theta_0, [&](const double& x) { ptrs.push_back(&x); });
        return ptrs;
    }();
    std::size_t idx = 0;
    model::for_each_scalar(out, [&](double& x) {
        ++total;
        if (rng.next_bernoulli(p)) {
            x = *src_it[idx];
            ++restored;
        }
        ++idx;
    });
    return {std::move(out), total > 0 ? static_cast<double>(restored) / total : 0.0};
}

namespace {

struct Guidance {
    std::size_t sample;
    linalg::Vector probs;
};

// Student gradient step on the mean cross-entropy toward the guidance probs.
// Returns the mean loss. Throws PoisonedUpdateError on non-finite values.
double student_update(EngineState& st, const Batch& batch, const std::vector<Guidance>& kept,
                      const EngineConfig& cfg, std::uint64_t step_seed) {
    ModelParams grad_sum = ModelParams::zeros_like(st.theta_student);
    double loss_sum = 0.0;
    for (const Guidance& g : kept) {
        const linalg::Vector x = batch.x.row(g.sample);
        model::DropoutMask mask;
        const model::DropoutMask* mask_ptr = nullptr;
        if (cfg.student_update_dropout && cfg.rfp.dropout_rate > 0.0) {
            mask = model::make_dropout_mask(st.theta_student, cfg.rfp.dropout_rate,
                                            substream(step_seed, kTagStudentMaskBase + g.sample), 0);
            mask_ptr = &mask;
        }
        model::Prediction pred = model::forward(st.theta_student, x, mask_ptr);
        loss_sum += model::cross_entropy(g.probs, pred.probs);
        model::axpy(grad_sum, 1.0, model::grad(st.theta_student, x, g.probs, mask_ptr));
    }
    const double inv = 1.0 / static_cast<double>(kept.size());
    model::scale(grad_sum, inv);
    const double loss = loss_sum * inv;
    if (!std::isfinite(loss)) throw PoisonedUpdateError("student_update: non-finite loss");
    model::optimizer_step(st.theta_student, grad_sum, st.optimizer);
    if (!model::all_finite(st.theta_student))
        throw PoisonedUpdateError("student_update: non-finite parameters");
    return loss;
}

double entropy_min_update(EngineState& st, const Batch& batch) {
    ModelParams grad_sum = ModelParams::zeros_like(st.theta_student);
    double loss_sum = 0.0;
    for (std::size_t i = 0; i < batch.x.rows; ++i) {
        const linalg::Vector x = batch.x.row(i);
        loss_sum += model::entropy(model::forward(st.theta_student, x).probs);
        model::axpy(grad_sum, 1.0, model::grad_entropy(st.theta_student, x));
    }
    const double inv = 1.0 / static_cast<double>(batch.x.rows);
    model::scale(grad_sum, inv);
    const double loss = loss_sum * inv;
    if (!std::isfinite(loss)) throw PoisonedUpdateError("entropy_min_update: non-finite loss");
    model::optimizer_step(st.theta_student, grad_sum, st.optimizer);
    if (!model::all_finite(st.theta_student))
        throw PoisonedUpdateError("entropy_min_update: non-finite parameters");
    return loss;
}

}  // namespace

StepReport step(EngineState& state, const Batch& batch, const EngineConfig& cfg) {
    const std::size_t n = batch.x.rows;
    if (n == 0) throw EmptyInputError("engine step: empty batch");

    StepReport rep;
    rep.step = state.step;
    rep.domain_id = batch.domain_id;
    rep.loss = kNaN;
    rep.distance = kNaN;
    rep.alpha = kNaN;
    rep.restored_fraction = kNaN;

    // (1) The student's maskless prediction is the reported output; it
    // precedes every update in the step.
    rep.predictions.resize(n);
    int correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
        rep.predictions[i] = argmax(model::forward(state.theta_student, batch.x.row(i)).probs);
        if (batch.y.size() == n && rep.predictions[i] == batch.y[i]) ++correct;
    }
    rep.online_accuracy = static_cast<double>(correct) / static_cast<double>(n);

    if (cfg.mode == Mode::no_adapt) {
        rep.direct_count = static_cast<int>(n);
        ++state.step;
        return rep;
    }

    const std::uint64_t step_seed = substream(cfg.master_seed, static_cast<std::uint64_t>(state.step));

    // Snapshot for rollback on poisoned updates.
    const ModelParams student_before = state.theta_student;
    const ModelParams teacher_before = state.theta_teacher;
    const cda::DomainTracker tracker_before = state.tracker;
    const model::OptimizerState optimizer_before = state.optimizer;

    try {
        if (cfg.mode == Mode::entropy_min) {
            rep.direct_count = static_cast<int>(n);
            rep.loss = entropy_min_update(state, batch);
            ++state.step;
            return rep;
        }

        // (2)-(3) per-sample guidance.
        std::vector<Guidance> kept;
        kept.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            const linalg::Vector x = batch.x.row(i);
            if (cfg.mode == Mode::fixed_alpha) {
                kept.push_back({i, model::forward(state.theta_teacher, x).probs});
                ++rep.direct_count;
                continue;
            }
            rfp::RfpDecision d =
                rfp::decide(state.theta_teacher, x, cfg.rfp, substream(step_seed, kTagRfpBase + i));
            switch (d.kind) {
                case rfp::RfpDecision::Kind::direct_guide:
                    ++rep.direct_count;
                    kept.push_back({i, std::move(d.guidance)});
                    break;
                case rfp::RfpDecision::Kind::refined_guide:
                    ++rep.refined_count;
                    kept.push_back({i, std::move(d.guidance)});
                    break;
                case rfp::RfpDecision::Kind::discard:
                    ++rep.discarded_count;
                    break;
            }
        }

        // (4) student step; a fully discarded batch skips it but still runs
        // the teacher accumulation and restoration below.
        if (!kept.empty()) rep.loss = student_update(state, batch, kept, cfg, step_seed);

        // (5) domain-aware teacher accumulation.
        double alpha;
        if (cfg.mode == Mode::ctta_t) {
            rep.distance = cda::ipca_update(state.tracker, batch.x);
            rep.tracker_n_seen = state.tracker.n_seen;
            alpha = cda::alpha_from_distance(rep.distance, cfg.alpha_policy);
        } else {
            alpha = cfg.fixed_alpha_value;
        }
        rep.alpha = alpha;
        state.theta_teacher = ema_update(state.theta_teacher, state.theta_student, alpha);

        // (6) stochastic restoration.
        auto [restored, frac] = stochastic_restore(state.theta_teacher, state.theta_source,
                                                   cfg.restore_prob, step_seed);
        state.theta_teacher = std::move(restored);
        rep.restored_fraction = frac;
        if (!model::all_finite(state.theta_teacher))
            throw PoisonedUpdateError("step: non-finite teacher parameters");
    } catch (const PoisonedUpdateError&) {
        state.theta_student = student_before;
        state.theta_teacher = teacher_before;
        state.tracker = tracker_before;
        state.optimizer = optimizer_before;
        rep.skipped = true;
        rep.loss = kNaN;
        rep.distance = kNaN;
        rep.alpha = kNaN;
        rep.restored_fraction = kNaN;
    }

    ++state.step;
    return rep;
}

RunResult run(const EngineConfig& cfg, const stream::StreamSchedule& schedule,
              const ModelParams& theta0) {
    RunResult result;
    result.final_state = init_state(cfg, theta0);
    stream::Stream s(schedule);
    result.log.reports.reserve(static_cast<std::size_t>(schedule.total_steps()));
    while (!s.done()) {
        Batch b = s.next();
        result.log.reports.push_back(step(result.final_state, b, cfg));
    }
    return result;
}

}  // namespace driftbench::engine
