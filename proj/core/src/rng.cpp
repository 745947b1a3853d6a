#include "rfr/rng.hpp"

#include <cmath>

#include "rfr/errors.hpp"

namespace rfr {

std::uint64_t hash_name(std::uint64_t root, std::string_view name) {
    std::uint64_t h = 14695981039346656037ull;
    auto mix = [&h](unsigned char byte) {
        h ^= byte;
        h *= 1099511628211ull;
    };
    for (int i = 0; i < 8; ++i) mix(static_cast<unsigned char>(root >> (8 * i)));
    for (char c : name) mix(static_cast<unsigned char>(c));
    // FNV can land on 0, which mt19937_64 maps to a degenerate-looking
    // default; nudge away from it.
    return h ? h : 0x9e3779b97f4a7c15ull;
}

RngStream::RngStream(std::uint64_t seed) : engine_(seed), seed_(seed) {}

RngStream::RngStream(std::uint64_t root, std::string_view name)
    : RngStream(hash_name(root, name)) {}

RngStream RngStream::substream(std::uint64_t index) const {
    char buf[2 + 20];
    int len = std::snprintf(buf, sizeof buf, "#%llu", static_cast<unsigned long long>(index));
    return RngStream(hash_name(seed_, std::string_view(buf, static_cast<std::size_t>(len))));
}

double RngStream::uniform01() {
    // 53 random bits into [0, 1).
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double a, double b) {
    return a + (b - a) * uniform01();
}

double RngStream::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double angle = 2.0 * M_PI * u2;
    spare_ = r * std::sin(angle);
    has_spare_ = true;
    return r * std::cos(angle);
}

std::uint64_t RngStream::integer(std::uint64_t bound) {
    if (bound == 0) throw ValidationError("RngStream::integer: bound must be positive");
    // Rejection sampling below the largest multiple of bound keeps the
    // result exactly uniform.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t v = engine_();
    while (v >= limit) v = engine_();
    return v % bound;
}

Eigen::VectorXd RngStream::sphere_dir(int dim) {
    if (dim <= 0) throw ValidationError("RngStream::sphere_dir: dim must be positive");
    Eigen::VectorXd v(dim);
    double norm2 = 0.0;
    do {
        for (int i = 0; i < dim; ++i) v[i] = normal();
        norm2 = v.squaredNorm();
    } while (norm2 == 0.0);
    return v / std::sqrt(norm2);
}

} // namespace rfr
