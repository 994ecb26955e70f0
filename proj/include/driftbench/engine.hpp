#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "driftbench/cda.hpp"
#include "driftbench/model.hpp"
#include "driftbench/rfp.hpp"
#include "driftbench/stream.hpp"

namespace driftbench::engine {

using model::ModelParams;
using stream::Batch;

enum class Mode { ctta_t, no_adapt, fixed_alpha, entropy_min };

std::string mode_name(Mode m);
Mode mode_from_name(const std::string& name);

struct EngineConfig {
    Mode mode = Mode::ctta_t;
    double fixed_alpha_value = 0.99;  // fixed_alpha mode only
    rfp::RfpConfig rfp;
    cda::AlphaPolicy alpha_policy;
    std::size_t cda_k = 0;            // 0 = min(input_dim, 8)
    double restore_prob = 0.01;       // Bernoulli restoration probability
    model::OptimizerState::Kind optimizer_kind = model::OptimizerState::Kind::adam;
    double lr = 1e-5;
    double weight_decay = 0.0;
    // Dropout on the student's update-pass forward (training-mode student,
    // same rate as the teacher's consistency passes). Without it the loss
    // gradient vanishes identically while student == teacher.
    bool student_update_dropout = true;
    std::uint64_t master_seed = 0;
};

struct EngineState {
    ModelParams theta_source;   // frozen after init
    ModelParams theta_teacher;
    ModelParams theta_student;
    cda::DomainTracker tracker;
    model::OptimizerState optimizer;
    long step = 0;
};

// Per-batch record. NaN marks a field the mode does not produce.
struct StepReport {
    long step = 0;
    int domain_id = 0;
    int direct_count = 0;
    int refined_count = 0;
    int discarded_count = 0;
    double online_accuracy = 0.0;
    double loss = 0.0;
    double distance = 0.0;
    double alpha = 0.0;
    double restored_fraction = 0.0;
    long tracker_n_seen = 0;  // cumulative samples absorbed by the tracker
    bool skipped = false;
    std::vector<int> predictions;  // student argmax per sample, pre-update
};

struct MetricsLog {
    std::vector<StepReport> reports;
};

struct RunResult {
    MetricsLog log;
    EngineState final_state;
};

EngineState init_state(const EngineConfig& cfg, const ModelParams& theta0);

// theta_T <- alpha * theta_T + (1 - alpha) * theta_S, elementwise.
ModelParams ema_update(const ModelParams& theta_t, const ModelParams& theta_s, double alpha);

// Per-scalar Bernoulli(p) reset to the source value; returns the new params
// and the realized restored fraction. Deterministic in the seed.
std::pair<ModelParams, double> stochastic_restore(const ModelParams& theta_t,
                                                  const ModelParams& theta_0, double p,
                                                  std::uint64_t seed);

// One batch: predict (pre-update), guide, update student, accumulate teacher,
// restore. Rolls the whole state back and flags the report when an update
// would go non-finite.
StepReport step(EngineState& state, const Batch& batch, const EngineConfig& cfg);

RunResult run(const EngineConfig& cfg, const stream::StreamSchedule& schedule,
              const ModelParams& theta0);

}  // namespace driftbench::engine
