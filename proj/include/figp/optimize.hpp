#ifndef FIGP_OPTIMIZE_HPP
#define FIGP_OPTIMIZE_HPP

#include <functional>
#include <span>
#include <vector>

#include "figp/random.hpp"

namespace figp {

struct Box {
    std::vector<double> lo;
    std::vector<double> hi;

    [[nodiscard]] std::size_t dim() const { return lo.size(); }
    [[nodiscard]] std::vector<double> clamp(std::vector<double> x) const;
};

struct OptimResult {
    std::vector<double> x;
    double value = 0.0;
    int evaluations = 0;
    bool converged = false;
};

using Objective = std::function<double(std::span<const double>)>;

/// Nelder-Mead minimization with every trial point projected onto the box.
/// Non-finite objective values are treated as +infinity.
OptimResult nelder_mead(const Objective& f, std::vector<double> x0, const Box& box, int max_iters,
                        double xtol = 1e-8, double ftol = 1e-12);

/// n stratified points in the box, one per stratum along every axis.
std::vector<std::vector<double>> latin_hypercube(const Box& box, int n, Rng& rng);

}  // namespace figp

#endif  // FIGP_OPTIMIZE_HPP
