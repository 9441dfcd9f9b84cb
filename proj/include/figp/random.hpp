#ifndef FIGP_RANDOM_HPP
#define FIGP_RANDOM_HPP

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace figp {

/// Seeded random stream with a fixed seed-to-output mapping.
///
/// The engine is std::mt19937_64 seeded with splitmix64(seed), whose output sequence
/// the standard pins down. Uniforms take the top 53 bits of one engine output; normals
/// use the Box-Muller transform on two uniforms, consuming both outputs of each pair.
/// Standard library distributions are avoided because their algorithms are unspecified.
///
/// Sub-streams: substream(seed, k) seeds an independent stream from (seed, k), so
/// per-path or per-cell draws do not depend on execution order.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    static Rng substream(std::uint64_t seed, std::uint64_t index);

    /// Uniform on [0, 1).
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal();
    Eigen::VectorXd normal_vector(Eigen::Index n);

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace figp

#endif  // FIGP_RANDOM_HPP
