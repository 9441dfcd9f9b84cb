#ifndef FIGP_DESIGNS_HPP
#define FIGP_DESIGNS_HPP

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "figp/domain.hpp"
#include "figp/kernels.hpp"
#include "figp/sampling.hpp"

namespace figp {

struct KnotSet {
    Eigen::MatrixXd knots;  // n x d
    double fill_distance = 0.0;

    [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(knots.rows()); }
};

/// sup over a dense lattice in the domain of the distance to the nearest knot.
double fill_distance(const Eigen::MatrixXd& knots, const Domain& domain);

/// Regular lattice with both interval endpoints included: equispaced in 1-d, m x ... x m with
/// m^d = n otherwise (n must be a perfect d-th power).
KnotSet lattice_knots(const Domain& domain, std::size_t n);

KnotSet make_knot_set(Eigen::MatrixXd knots, const Domain& domain);

/// First n eigenfunctions phi_1..phi_n.
std::vector<FunctionalInput> eigenfunction_design(const EigenSystem& eig, std::size_t n);

/// g_j = Psi(., x_j) on the grid. Coincident knots produce identical inputs; a note is appended
/// to `warnings` when given.
std::vector<FunctionalInput> knot_design(const KnotSet& knots, const MaternParams& params, const GridPtr& grid,
                                         std::vector<std::string>* warnings = nullptr);

/// Posterior variance K(g,g) - k^T K^-1 k with mu = 0, averaged over the test functions.
/// For truths drawn from the prior this is the mean squared prediction error of the BLUP.
double exact_mspe(const std::vector<FunctionalInput>& design, const std::vector<FunctionalInput>& tests,
                  const KernelSpec& spec);

/// Factor A with A^T A = Psi on the grid nodes, from a symmetric eigen-decomposition with
/// negative round-off eigenvalues clipped to zero.
Eigen::MatrixXd base_kernel_root(const MaternParams& params, const GridPtr& grid);

/// Exact MSPE for the linear kernel with no nugget: ||(I - P) A W g||^2 averaged over the tests,
/// where P projects onto the span of the design's A W g_j. Stays accurate far below the level
/// at which a nugget-regularized Cholesky solve stalls.
double projection_mspe(const std::vector<FunctionalInput>& design, const std::vector<FunctionalInput>& tests,
                       const LinearKernel& kernel);

/// Per-test squared errors behind projection_mspe.
Eigen::VectorXd projection_errors(const std::vector<FunctionalInput>& design, const std::vector<FunctionalInput>& tests,
                                  const LinearKernel& kernel);

/// Realizations of the base process GP(0, Psi) on the grid nodes, one sub-stream per draw.
std::vector<FunctionalInput> prior_draws(const MaternParams& params, const GridPtr& grid, std::size_t count,
                                         std::uint64_t seed);

struct LogLogSlope {
    double slope = 0.0;
    double slope_se = 0.0;
    double intercept = 0.0;
};

/// Least-squares fit of log(y) = intercept + slope * log(x).
LogLogSlope fit_loglog_slope(std::span<const double> x, std::span<const double> y);

struct DecayCurve {
    std::vector<std::size_t> sizes;
    std::vector<double> mspe;     // exact, from the posterior variance
    std::vector<double> nugget_mspe;  // exact_mspe with the spec's nugget, the MC target
    std::vector<double> mc_mspe;  // Monte Carlo estimate; empty when replicates == 0
    std::vector<double> mc_se;
    double slope = 0.0;           // fitted on the exact MSPE
    double slope_se = 0.0;
    double theoretical_rate = 0.0;
    std::size_t replicates = 0;
};

using DesignBuilder = std::function<std::vector<FunctionalInput>(std::size_t n)>;

/// MSPE decay experiment with the kernel held fixed. For each size the exact MSPE is computed
/// from the posterior variance (projection_mspe for a linear kernel, exact_mspe otherwise); with replicates > 0, GP truths are also drawn jointly over
/// design and test inputs (sub-stream per (size index, replicate)) and the squared BLUP error
/// is averaged as a cross-check. Monte Carlo truths carry the nugget on every input, so their
/// expectation is the exact MSPE plus the nugget.
DecayCurve empirical_mspe(const DesignBuilder& builder, const std::vector<std::size_t>& sizes,
                          const std::vector<FunctionalInput>& tests, const KernelSpec& spec, std::size_t replicates,
                          std::uint64_t seed, double theoretical_rate = 0.0);

/// "n,mspe,se" rows followed by a '#' summary line with slope, slope_se and theoretical_rate.
void write_decay_csv(std::ostream& out, const DecayCurve& curve);

}  // namespace figp

#endif  // FIGP_DESIGNS_HPP
