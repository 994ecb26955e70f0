#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "driftbench/linalg.hpp"

namespace driftbench::stream {

using linalg::Matrix;
using linalg::Vector;

// One synthetic domain: a Gaussian-mixture classification task whose class
// means are rotated (block Givens over coordinate pairs) and translated
// relative to the base layout. label_noise resamples that fraction of the
// reported labels uniformly; the inputs themselves are unaffected.
struct DomainSpec {
    std::string name;
    Matrix class_means;          // C x d
    double class_cov_scale = 1.0;
    double rotation_angle = 0.0; // radians
    Vector shift;                // d
    double label_noise = 0.0;

    std::size_t num_classes() const { return class_means.rows; }
    std::size_t dim() const { return class_means.cols; }
};

struct Batch {
    Matrix x;                 // batch x d
    std::vector<int> y;       // ground truth, metrics only — never for adaptation
    int domain_id = 0;
    long step = 0;
};

struct StreamSchedule {
    std::vector<std::pair<DomainSpec, long>> segments;  // (domain, step_count)
    std::size_t batch_size = 16;
    std::uint64_t seed = 0;

    long total_steps() const {
        long n = 0;
        for (const auto& s : segments) n += s.second;
        return n;
    }
};

// Deterministic in (seed, counter); class-balanced before label noise.
Batch sample_batch(const DomainSpec& spec, std::size_t n, std::uint64_t seed,
                   std::uint64_t counter);

// Sequential batch iterator over a schedule; owns no shared state.
class Stream {
public:
    explicit Stream(StreamSchedule schedule);

    bool done() const { return step_ >= schedule_.total_steps(); }
    Batch next();

    const StreamSchedule& schedule() const { return schedule_; }

private:
    StreamSchedule schedule_;
    long step_ = 0;
    std::size_t segment_ = 0;
    long step_in_segment_ = 0;
};

// Fisher-Yates permutation of {0, .., n-1}, deterministic in the seed.
std::vector<std::size_t> fisher_yates_permutation(std::size_t n, std::uint64_t seed);

// Base class layout shared by all domains of a preset: class y sits at
// separation * e_y (requires d >= C).
Matrix base_class_means(std::size_t num_classes, std::size_t dim, double separation);

// Built-in domain lists with shift magnitudes increasing down the list.
// "short" has 3 domains, "long" has 5; domain 0 is the unshifted source.
std::vector<DomainSpec> preset_domains(const std::string& kind, std::size_t dim,
                                       std::size_t num_classes, double separation,
                                       double cov_scale, double label_noise);

}  // namespace driftbench::stream
