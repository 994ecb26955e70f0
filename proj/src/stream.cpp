#include "driftbench/stream.hpp"

#include <cmath>
#include <utility>

#include "driftbench/errors.hpp"
#include "driftbench/rng.hpp"

namespace driftbench::stream {

namespace {

// Block Givens rotation over coordinate pairs (0,1), (2,3), ...; a single
// angle parameterizes the whole domain rotation.
Vector rotate(const Vector& v, double angle) {
    Vector out = v;
    if (angle == 0.0 || v.size() < 2) return out;
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    for (std::size_t j = 0; j + 1 < v.size(); j += 2) {
        const double a = v[j];
        const double b = v[j + 1];
        out[j] = c * a - s * b;
        out[j + 1] = s * a + c * b;
    }
    return out;
}

}  // namespace

Batch sample_batch(const DomainSpec& spec, std::size_t n, std::uint64_t seed,
                   std::uint64_t counter) {
    if (n == 0) throw InvalidInputError("sample_batch: n must be >= 1");
    const std::size_t c = spec.num_classes();
    const std::size_t d = spec.dim();
    if (c < 2) throw InvalidInputError("sample_batch: need at least 2 classes");
    if (!spec.shift.empty() && spec.shift.size() != d)
        throw InvalidInputError("sample_batch: shift dim mismatch");

    // Rotated means computed once per batch.
    std::vector<Vector> means(c);
    for (std::size_t y = 0; y < c; ++y) {
        means[y] = rotate(spec.class_means.row(y), spec.rotation_angle);
        for (std::size_t j = 0; j < d && j < spec.shift.size(); ++j) means[y][j] += spec.shift[j];
    }

    Rng rng(substream(seed, counter));
    Batch b;
    b.x = Matrix(n, d);
    b.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t y_gen = i % c;  // class-balanced
        for (std::size_t j = 0; j < d; ++j) {
            b.x(i, j) = means[y_gen][j] + spec.class_cov_scale * rng.next_gaussian();
        }
        int y = static_cast<int>(y_gen);
        if (spec.label_noise > 0.0 && rng.next_bernoulli(spec.label_noise)) {
            y = static_cast<int>(rng.next_below(c));  // may redraw the same label
        }
        b.y[i] = y;
    }
    return b;
}

Stream::Stream(StreamSchedule schedule) : schedule_(std::move(schedule)) {
    if (schedule_.segments.empty() || schedule_.total_steps() < 1)
        throw InvalidInputError("Stream: schedule has no steps");
    if (schedule_.batch_size < 1) throw InvalidInputError("Stream: batch_size must be >= 1");
    for (const auto& [spec, steps] : schedule_.segments) {
        if (steps < 0) throw InvalidInputError("Stream: negative step count");
        (void)spec;
    }
}

Batch Stream::next() {
    if (done()) throw InvalidInputError("Stream: exhausted");
    while (step_in_segment_ >= schedule_.segments[segment_].second) {
        ++segment_;
        step_in_segment_ = 0;
    }
    const DomainSpec& spec = schedule_.segments[segment_].first;
    Batch b = sample_batch(spec, schedule_.batch_size, schedule_.seed,
                           static_cast<std::uint64_t>(step_));
    b.domain_id = static_cast<int>(segment_);
    b.step = step_;
    ++step_;
    ++step_in_segment_;
    return b;
}

std::vector<std::size_t> fisher_yates_permutation(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    Rng rng(seed, 0x73687566666c65ULL);  // "shuffle"
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
        std::swap(perm[i - 1], perm[j]);
    }
    return perm;
}

Matrix base_class_means(std::size_t num_classes, std::size_t dim, double separation) {
    if (dim < num_classes)
        throw InvalidInputError("base_class_means: need dim >= num_classes");
    Matrix m(num_classes, dim);
    for (std::size_t y = 0; y < num_classes; ++y) {
        // Distinct radii keep the scatter spectrum non-degenerate, which
        // keeps the tracked principal components stable within a domain.
        m(y, y) = separation * (1.0 + 0.3 * static_cast<double>(y));
    }
    return m;
}

std::vector<DomainSpec> preset_domains(const std::string& kind, std::size_t dim,
                                       std::size_t num_classes, double separation,
                                       double cov_scale, double label_noise) {
    std::size_t count = 0;
    if (kind == "short") count = 3;
    else if (kind == "long") count = 5;
    else throw InvalidInputError("preset_domains: unknown preset '" + kind + "'");

    const Matrix means = base_class_means(num_classes, dim, separation);
    std::vector<DomainSpec> out;
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        DomainSpec spec;
        spec.name = kind + std::to_string(k);
        spec.class_means = means;
        spec.class_cov_scale = cov_scale;
        spec.rotation_angle = 0.30 * static_cast<double>(k);
        spec.shift = Vector(dim, 0.0);
        const double shift_mag = 0.5 * static_cast<double>(k);
        for (std::size_t j = 0; j < dim; ++j)
            spec.shift[j] = shift_mag / std::sqrt(static_cast<double>(dim));
        spec.label_noise = label_noise;
        out.push_back(std::move(spec));
    }
    return out;
}

}  // namespace driftbench::stream
