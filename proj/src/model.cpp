#include "driftbench/model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "driftbench/errors.hpp"
#include "driftbench/rng.hpp"

namespace driftbench::model {

namespace {

constexpr double kLogitClamp = 50.0;
constexpr double kLogFloor = 1e-30;

Vector softmax(const Vector& z) {
    double zmax = z[0];
    for (double v : z) zmax = std::max(zmax, v);
    Vector p(z.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        p[i] = std::exp(z[i] - zmax);
        sum += p[i];
    }
    for (double& v : p) v /= sum;
    return p;
}

struct ForwardCache {
    Vector x_eff;      // input after dropout scaling
    Vector h_pre;      // hidden pre-activation (empty for linear)
    Vector h_eff;      // hidden after ReLU + dropout
    Vector raw_logits; // before clamping
    Prediction pred;
};

ForwardCache forward_cached(const ModelParams& params, const Vector& x, const DropoutMask* mask) {
    const std::size_t d = params.input_dim();
    const std::size_t h = params.hidden_dim();
    if (x.size() != d)
        throw InvalidInputError("forward: input has dim " + std::to_string(x.size()) +
                                ", model expects " + std::to_string(d));
    if (mask) {
        if (mask->rate < 0.0 || mask->rate >= 1.0)
            throw InvalidInputError("forward: dropout rate must be in [0,1)");
        if (mask->bits.size() != d + h)
            throw InvalidInputError("forward: mask covers " + std::to_string(mask->bits.size()) +
                                    " units, model has " + std::to_string(d + h));
    }

    ForwardCache c;
    const double keep_scale = mask ? 1.0 / (1.0 - mask->rate) : 1.0;
    c.x_eff = x;
    if (mask) {
        for (std::size_t i = 0; i < d; ++i) c.x_eff[i] = mask->bits[i] ? 0.0 : x[i] * keep_scale;
    }

    const Vector* last = &c.x_eff;
    if (params.has_hidden()) {
        c.h_pre = Vector(h, 0.0);
        for (std::size_t i = 0; i < d; ++i) {
            const double xi = c.x_eff[i];
            if (xi == 0.0) continue;
            for (std::size_t j = 0; j < h; ++j) c.h_pre[j] += params.w1(i, j) * xi;
        }
        for (std::size_t j = 0; j < h; ++j) c.h_pre[j] += params.b1[j];
        c.h_eff = Vector(h);
        for (std::size_t j = 0; j < h; ++j) {
            double v = c.h_pre[j] > 0.0 ? c.h_pre[j] : 0.0;
            if (mask && mask->bits[d + j]) v = 0.0;
            else if (mask) v *= keep_scale;
            c.h_eff[j] = v;
        }
        last = &c.h_eff;
    }

    const Matrix& w_out = params.has_hidden() ? params.w2 : params.w1;
    const Vector& b_out = params.has_hidden() ? params.b2 : params.b1;
    const std::size_t n_classes = w_out.cols;
    c.raw_logits = Vector(n_classes, 0.0);
    for (std::size_t i = 0; i < w_out.rows; ++i) {
        const double vi = (*last)[i];
        if (vi == 0.0) continue;
        for (std::size_t j = 0; j < n_classes; ++j) c.raw_logits[j] += w_out(i, j) * vi;
    }
    for (std::size_t j = 0; j < n_classes; ++j) c.raw_logits[j] += b_out[j];

    c.pred.logits = c.raw_logits;
    for (double& z : c.pred.logits) z = std::clamp(z, -kLogitClamp, kLogitClamp);
    c.pred.probs = softmax(c.pred.logits);
    return c;
}

// Backpropagates a gradient on the clamped logits down to the parameters.
ModelParams backprop(const ModelParams& params, const ForwardCache& c, const Vector& dlogits) {
    ModelParams g = ModelParams::zeros_like(params);
    const std::size_t d = params.input_dim();
    Vector dz = dlogits;
    for (std::size_t j = 0; j < dz.size(); ++j) {
        if (std::fabs(c.raw_logits[j]) >= kLogitClamp) dz[j] = 0.0;  // clamp is flat
    }

    if (!params.has_hidden()) {
        for (std::size_t i = 0; i < d; ++i) {
            const double xi = c.x_eff[i];
            if (xi == 0.0) continue;
            for (std::size_t j = 0; j < dz.size(); ++j) g.w1(i, j) = xi * dz[j];
        }
        g.b1 = dz;
        return g;
    }

    const std::size_t h = params.hidden_dim();
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < dz.size(); ++j) g.w2(i, j) = c.h_eff[i] * dz[j];
    g.b2 = dz;

    Vector dh(h, 0.0);
    for (std::size_t i = 0; i < h; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < dz.size(); ++j) s += params.w2(i, j) * dz[j];
        dh[i] = s;
    }
    // Undo dropout scaling and ReLU. h_eff = scale * relu(h_pre) (or 0 when
    // dropped); h_eff > 0 exactly when the unit survived and fired.
    Vector dh_pre(h, 0.0);
    for (std::size_t i = 0; i < h; ++i) {
        if (c.h_pre[i] > 0.0 && c.h_eff[i] > 0.0) {
            dh_pre[i] = dh[i] * (c.h_eff[i] / c.h_pre[i]);
        }
    }
    for (std::size_t i = 0; i < d; ++i) {
        const double xi = c.x_eff[i];
        if (xi == 0.0) continue;
        for (std::size_t j = 0; j < h; ++j) g.w1(i, j) = xi * dh_pre[j];
    }
    g.b1 = dh_pre;
    return g;
}

std::array<const std::vector<double>*, 4> containers(const ModelParams& p) {
    return {&p.w1.data, &p.b1, &p.w2.data, &p.b2};
}
std::array<std::vector<double>*, 4> containers(ModelParams& p) {
    return {&p.w1.data, &p.b1, &p.w2.data, &p.b2};
}

}  // namespace

ModelParams ModelParams::zeros_like(const ModelParams& p) {
    ModelParams z;
    z.w1 = Matrix(p.w1.rows, p.w1.cols);
    z.b1 = Vector(p.b1.size(), 0.0);
    z.w2 = Matrix(p.w2.rows, p.w2.cols);
    z.b2 = Vector(p.b2.size(), 0.0);
    return z;
}

ModelParams make_linear(std::size_t input_dim, std::size_t num_classes) {
    ModelParams p;
    p.w1 = Matrix(input_dim, num_classes);
    p.b1 = Vector(num_classes, 0.0);
    return p;
}

ModelParams make_hidden(std::size_t input_dim, std::size_t hidden_dim, std::size_t num_classes) {
    ModelParams p;
    p.w1 = Matrix(input_dim, hidden_dim);
    p.b1 = Vector(hidden_dim, 0.0);
    p.w2 = Matrix(hidden_dim, num_classes);
    p.b2 = Vector(num_classes, 0.0);
    return p;
}

ModelParams random_init(std::size_t input_dim, std::size_t hidden_dim, std::size_t num_classes,
                        double scale, std::uint64_t seed) {
    ModelParams p = hidden_dim > 0 ? make_hidden(input_dim, hidden_dim, num_classes)
                                   : make_linear(input_dim, num_classes);
    Rng rng(seed, 0x6d6f64656cULL);  // "model"
    for_each_scalar(p, [&](double& x) { x = scale * rng.next_gaussian(); });
    return p;
}

DropoutMask make_dropout_mask(const ModelParams& params, double rate, std::uint64_t seed,
                              std::uint64_t draw_index) {
    if (rate < 0.0 || rate >= 1.0) throw InvalidInputError("dropout rate must be in [0,1)");
    DropoutMask m;
    m.rate = rate;
    m.seed = seed;
    const std::size_t units = params.input_dim() + params.hidden_dim();
    m.bits.resize(units);
    Rng rng(seed, draw_index);
    for (std::size_t i = 0; i < units; ++i) m.bits[i] = rng.next_bernoulli(rate) ? 1 : 0;
    return m;
}

Prediction forward(const ModelParams& params, const Vector& x, const DropoutMask* mask) {
    return forward_cached(params, x, mask).pred;
}

double cross_entropy(const Vector& target_probs, const Vector& student_probs) {
    if (target_probs.size() != student_probs.size())
        throw InvalidInputError("cross_entropy: length mismatch");
    double loss = 0.0;
    for (std::size_t i = 0; i < target_probs.size(); ++i) {
        loss -= target_probs[i] * std::log(std::max(student_probs[i], kLogFloor));
    }
    return loss;
}

double entropy(const Vector& probs) {
    double h = 0.0;
    for (double p : probs) {
        if (p > 0.0) h -= p * std::log(p);
    }
    return h;
}

ModelParams grad(const ModelParams& params, const Vector& x, const Vector& target_probs,
                 const DropoutMask* mask) {
    if (target_probs.size() != params.num_classes())
        throw InvalidInputError("grad: target has wrong length");
    ForwardCache c = forward_cached(params, x, mask);
    Vector dz(target_probs.size());
    for (std::size_t j = 0; j < dz.size(); ++j) dz[j] = c.pred.probs[j] - target_probs[j];
    return backprop(params, c, dz);
}

ModelParams grad_entropy(const ModelParams& params, const Vector& x) {
    ForwardCache c = forward_cached(params, x, nullptr);
    const Vector& p = c.pred.probs;
    const double h = entropy(p);
    // dH/dz_j = -p_j (log p_j + H)
    Vector dz(p.size());
    for (std::size_t j = 0; j < p.size(); ++j) {
        dz[j] = -p[j] * (std::log(std::max(p[j], kLogFloor)) + h);
    }
    return backprop(params, c, dz);
}

OptimizerState OptimizerState::sgd(double lr) {
    OptimizerState s;
    s.kind = Kind::sgd;
    s.lr = lr;
    return s;
}

OptimizerState OptimizerState::adam(double lr, const ModelParams& shape) {
    OptimizerState s;
    s.kind = Kind::adam;
    s.lr = lr;
    s.m = ModelParams::zeros_like(shape);
    s.v = ModelParams::zeros_like(shape);
    return s;
}

void optimizer_step(ModelParams& params, const ModelParams& g, OptimizerState& state) {
    bool finite = true;
    for_each_scalar(g, [&](const double& x) { finite = finite && std::isfinite(x); });
    if (!finite) throw PoisonedUpdateError("optimizer_step: non-finite gradient");

    auto pc = containers(params);
    auto gc = containers(g);
    if (state.kind == OptimizerState::Kind::sgd) {
        for (std::size_t c = 0; c < 4; ++c) {
            if (pc[c]->size() != gc[c]->size())
                throw InvalidInputError("optimizer_step: shape mismatch");
            for (std::size_t i = 0; i < pc[c]->size(); ++i) {
                double& p = (*pc[c])[i];
                p -= state.lr * ((*gc[c])[i] + state.weight_decay * p);
            }
        }
        ++state.step_count;
        return;
    }

    auto mc = containers(state.m);
    auto vc = containers(state.v);
    const long t = state.step_count + 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(t));
    for (std::size_t c = 0; c < 4; ++c) {
        if (pc[c]->size() != gc[c]->size() || pc[c]->size() != mc[c]->size())
            throw InvalidInputError("optimizer_step: shape mismatch");
        for (std::size_t i = 0; i < pc[c]->size(); ++i) {
            const double gi = (*gc[c])[i];
            double& m = (*mc[c])[i];
            double& v = (*vc[c])[i];
            double& p = (*pc[c])[i];
            m = state.beta1 * m + (1.0 - state.beta1) * gi;
            v = state.beta2 * v + (1.0 - state.beta2) * gi * gi;
            const double mhat = m / bc1;
            const double vhat = v / bc2;
            p -= state.lr * (mhat / (std::sqrt(vhat) + state.eps) + state.weight_decay * p);
        }
    }
    state.step_count = t;
}

void axpy(ModelParams& dst, double a, const ModelParams& x) {
    auto dc = containers(dst);
    auto xc = containers(x);
    for (std::size_t c = 0; c < 4; ++c) {
        if (dc[c]->size() != xc[c]->size()) throw InvalidInputError("axpy: shape mismatch");
        for (std::size_t i = 0; i < dc[c]->size(); ++i) (*dc[c])[i] += a * (*xc[c])[i];
    }
}

void scale(ModelParams& p, double a) {
    for_each_scalar(p, [a](double& x) { x *= a; });
}

double sq_distance(const ModelParams& a, const ModelParams& b) {
    auto ac = containers(a);
    auto bc = containers(b);
    double s = 0.0;
    for (std::size_t c = 0; c < 4; ++c) {
        if (ac[c]->size() != bc[c]->size()) throw InvalidInputError("sq_distance: shape mismatch");
        for (std::size_t i = 0; i < ac[c]->size(); ++i) {
            const double d = (*ac[c])[i] - (*bc[c])[i];
            s += d * d;
        }
    }
    return s;
}

bool all_finite(const ModelParams& p) {
    bool ok = true;
    for_each_scalar(p, [&](const double& x) { ok = ok && std::isfinite(x); });
    return ok;
}

bool equal_bits(const ModelParams& a, const ModelParams& b) {
    return a.w1.rows == b.w1.rows && a.w1.cols == b.w1.cols && a.w1.data == b.w1.data &&
           a.b1 == b.b1 && a.w2.rows == b.w2.rows && a.w2.cols == b.w2.cols &&
           a.w2.data == b.w2.data && a.b2 == b.b2;
}

namespace {

void put_u32_le(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64_le(std::string& out, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32_le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

double get_f64_le(const unsigned char* p) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
}

}  // namespace

void save_params(const ModelParams& params, const std::string& path) {
    std::string out;
    out += "DBM1";
    put_u32_le(out, static_cast<std::uint32_t>(params.input_dim()));
    put_u32_le(out, static_cast<std::uint32_t>(params.hidden_dim()));
    put_u32_le(out, static_cast<std::uint32_t>(params.num_classes()));
    for_each_scalar(params, [&](const double& x) { put_f64_le(out, x); });
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("save_params: cannot open " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("save_params: write failed for " + path);
}

ModelParams load_params(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_params: cannot open " + path);
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (buf.size() < 16 || buf.compare(0, 4, "DBM1") != 0)
        throw InvalidInputError("load_params: bad header in " + path);
    const auto* p = reinterpret_cast<const unsigned char*>(buf.data());
    const std::uint32_t d = get_u32_le(p + 4);
    const std::uint32_t h = get_u32_le(p + 8);
    const std::uint32_t c = get_u32_le(p + 12);
    ModelParams params = h > 0 ? make_hidden(d, h, c) : make_linear(d, c);
    const std::size_t expect = 16 + 8 * params.scalar_count();
    if (buf.size() != expect)
        throw InvalidInputError("load_params: file size " + std::to_string(buf.size()) +
                                " does not match dims (expected " + std::to_string(expect) + ")");
    std::size_t off = 16;
    for_each_scalar(params, [&](double& x) {
        x = get_f64_le(p + off);
        off += 8;
    });
    return params;
}

}  // namespace driftbench::model
