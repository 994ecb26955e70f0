#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "driftbench/linalg.hpp"

namespace driftbench::model {

using linalg::Matrix;
using linalg::Vector;

// Weights and biases of the toy classifier. Linear d->C by default; with a
// hidden layer the shapes become d->h (w1, b1) and h->C (w2, b2) with ReLU
// in between. Three live copies exist at engine level: source, teacher,
// student.
struct ModelParams {
    Matrix w1;   // d x C, or d x h when hidden
    Vector b1;   // C, or h when hidden
    Matrix w2;   // h x C; empty for the linear model
    Vector b2;   // C; empty for the linear model

    bool has_hidden() const { return !w2.empty(); }
    std::size_t input_dim() const { return w1.rows; }
    std::size_t num_classes() const { return has_hidden() ? w2.cols : w1.cols; }
    std::size_t hidden_dim() const { return has_hidden() ? w1.cols : 0; }
    std::size_t scalar_count() const { return w1.size() + b1.size() + w2.size() + b2.size(); }

    static ModelParams zeros_like(const ModelParams& p);
};

ModelParams make_linear(std::size_t input_dim, std::size_t num_classes);
ModelParams make_hidden(std::size_t input_dim, std::size_t hidden_dim, std::size_t num_classes);
ModelParams random_init(std::size_t input_dim, std::size_t hidden_dim, std::size_t num_classes,
                        double scale, std::uint64_t seed);

// Binary dropout mask over the model's droppable units: the d input features
// followed by h hidden units when a hidden layer exists. bits[i] == 1 marks a
// dropped unit. Deterministic in (seed, draw_index).
struct DropoutMask {
    std::vector<std::uint8_t> bits;
    double rate = 0.0;
    std::uint64_t seed = 0;
};

DropoutMask make_dropout_mask(const ModelParams& params, double rate, std::uint64_t seed,
                              std::uint64_t draw_index);

struct Prediction {
    Vector probs;
    Vector logits;
};

// Forward pass; masked units contribute zero and survivors are scaled by
// 1/(1-rate) (inverted dropout), so maskless inference needs no rescale.
Prediction forward(const ModelParams& params, const Vector& x,
                   const DropoutMask* mask = nullptr);

// -sum_y target_y * log(max(student_y, 1e-30))
double cross_entropy(const Vector& target_probs, const Vector& student_probs);

// Natural-log entropy of a distribution, in [0, log C].
double entropy(const Vector& probs);

// Analytic gradient of cross_entropy(target, forward(params, x, mask))
// with respect to params.
ModelParams grad(const ModelParams& params, const Vector& x, const Vector& target_probs,
                 const DropoutMask* mask = nullptr);

// Analytic gradient of entropy(forward(params, x)) with respect to params;
// used by the entropy-minimization baseline.
ModelParams grad_entropy(const ModelParams& params, const Vector& x);

struct OptimizerState {
    enum class Kind { sgd, adam };
    Kind kind = Kind::adam;
    double lr = 1e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
    long step_count = 0;
    ModelParams m;  // first moment (adam)
    ModelParams v;  // second moment (adam)

    static OptimizerState sgd(double lr);
    static OptimizerState adam(double lr, const ModelParams& shape);
};

// In-place parameter update. Throws PoisonedUpdateError on a non-finite
// gradient and leaves params and state untouched.
void optimizer_step(ModelParams& params, const ModelParams& g, OptimizerState& state);

// Elementwise helpers shared by the engine (EMA, restoration, diagnostics).
void axpy(ModelParams& dst, double a, const ModelParams& x);       // dst += a*x
void scale(ModelParams& p, double a);                              // p *= a
double sq_distance(const ModelParams& a, const ModelParams& b);    // sum (a-b)^2
bool all_finite(const ModelParams& p);
bool equal_bits(const ModelParams& a, const ModelParams& b);

// Visits every scalar parameter in a fixed order (w1, b1, w2, b2 row-major).
template <typename F>
void for_each_scalar(ModelParams& p, F&& f) {
    for (double& x : p.w1.data) f(x);
    for (double& x : p.b1) f(x);
    for (double& x : p.w2.data) f(x);
    for (double& x : p.b2) f(x);
}
template <typename F>
void for_each_scalar(const ModelParams& p, F&& f) {
    for (const double& x : p.w1.data) f(x);
    for (const double& x : p.b1) f(x);
    for (const double& x : p.w2.data) f(x);
    for (const double& x : p.b2) f(x);
}

// Flat little-endian float64 checkpoint with a 16-byte header
// (magic "DBM1", then u32 input_dim, u32 hidden_dim, u32 num_classes).
void save_params(const ModelParams& params, const std::string& path);
ModelParams load_params(const std::string& path);

}  // namespace driftbench::model
