#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include <Eigen/Dense>

namespace rfr {

// FNV-1a on the root seed bytes followed by the name bytes. Used to derive
// independent sub-stream seeds so that every consumer of randomness can be
// re-seeded individually from one experiment seed.
std::uint64_t hash_name(std::uint64_t root, std::string_view name);

// Deterministic random stream. All variates are produced from raw
// mt19937_64 output with fixed algorithms (no std::*_distribution, whose
// results vary between standard library implementations).
class RngStream {
public:
    explicit RngStream(std::uint64_t seed);
    RngStream(std::uint64_t root, std::string_view name);

    // Child stream for work item `index`; children are independent of the
    // order in which the parent is consumed.
    RngStream substream(std::uint64_t index) const;

    std::uint64_t seed() const noexcept { return seed_; }

    double uniform01();                    // [0, 1)
    double uniform(double a, double b);    // [a, b)
    double normal();                       // Box-Muller, mean 0, std 1
    std::uint64_t integer(std::uint64_t bound);  // uniform in [0, bound)

    // Uniform direction on the unit sphere in `dim` dimensions.
    Eigen::VectorXd sphere_dir(int dim);

private:
    std::mt19937_64 engine_;
    std::uint64_t seed_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace rfr
