#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "driftbench/cda.hpp"
#include "driftbench/engine.hpp"
#include "driftbench/model.hpp"

namespace driftbench::cli {

// Per-domain overrides for stream.preset = custom.
struct CustomDomain {
    double rotation = 0.0;
    double shift = 0.0;       // magnitude along the normalized all-ones direction
    double cov_scale = 1.0;
    double label_noise = 0.0;
    long steps = 0;           // 0 = stream.steps_per_domain
};

// Everything a `run` invocation needs: engine + stream + model dims + seeds.
// Parsed from a flat "section.key = value" file; unknown keys are rejected.
struct RunConfig {
    // model.*
    std::size_t input_dim = 16;
    std::size_t num_classes = 4;
    std::size_t hidden_dim = 0;
    double dropout_rate = 0.1;

    // rfp.*
    std::size_t n_passes = 8;
    double gamma = 0.4;
    double tau = 1.2;

    // cda.*
    cda::AlphaPolicy::Kind alpha_policy = cda::AlphaPolicy::Kind::linear_clamp;
    double alpha_bound = 0.99;
    double kappa = 0.1;
    std::size_t cda_k = 0;  // 0 = min(input_dim, 8)

    // engine.*
    std::vector<engine::Mode> modes = {engine::Mode::ctta_t};
    double fixed_alpha = -1.0;  // required when a fixed_alpha mode is listed
    double restore_prob = 0.01;
    bool student_update_dropout = true;

    // optimizer.*
    model::OptimizerState::Kind optimizer_kind = model::OptimizerState::Kind::adam;
    double lr = 1e-5;
    double weight_decay = 0.0;

    // stream.*
    std::string preset = "long";  // short | long | custom
    long steps_per_domain = 100;
    std::size_t batch_size = 16;
    double separation = 3.0;
    double cov_scale = 1.0;
    double label_noise = 0.0;
    std::uint64_t order_seed = 0;  // 0 = natural order, else Fisher-Yates shuffle
    std::vector<CustomDomain> custom_domains;

    // pretrain.*
    long pretrain_steps = 300;
    double pretrain_lr = 0.05;
    std::size_t pretrain_batch = 32;

    // run.*
    std::vector<std::uint64_t> seeds = {1, 2, 3};
    std::size_t jobs = 1;
};

// Parses and validates; throws ConfigError naming the key and line.
RunConfig parse_config(const std::string& path);

// Parses config text directly (used by parse_config and tests).
RunConfig parse_config_text(const std::string& text, const std::string& origin = "<memory>");

// Comma-separated helpers shared with the CLI flags.
std::vector<std::uint64_t> parse_seed_list(const std::string& csv);
std::vector<engine::Mode> parse_mode_list(const std::string& csv);

}  // namespace driftbench::cli
