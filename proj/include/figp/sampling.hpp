#ifndef FIGP_SAMPLING_HPP
#define FIGP_SAMPLING_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "figp/domain.hpp"
#include "figp/kernels.hpp"

namespace figp {

/// Truncated Mercer eigenpairs of the base kernel on a quadrature grid.
struct EigenSystem {
    GridPtr grid;
    MaternParams params;
    Eigen::VectorXd eigenvalues;     // descending, all positive
    Eigen::MatrixXd eigenfunctions;  // n_q x m, column j holds phi_j at the grid nodes
    double tail_mass = 0.0;          // sum of the discarded positive eigenvalues

    [[nodiscard]] std::size_t truncation() const { return static_cast<std::size_t>(eigenvalues.size()); }
    [[nodiscard]] FunctionalInput eigenfunction(std::size_t j) const;
};

/// min(n_q, 100)
std::size_t default_truncation(std::size_t grid_size);

/// Nyström eigenpairs: eigen-decomposes W^1/2 Psi W^1/2 and maps eigenvectors back with
/// W^-1/2, so the eigenfunctions are orthonormal under the quadrature weights.
EigenSystem nystrom_eig(const MaternParams& params, const GridPtr& grid, std::optional<std::size_t> truncation = std::nullopt);

/// Sample paths of f over an indexed family of inputs.
struct PathFamily {
    Eigen::VectorXd index_values;        // e.g. the alpha of sin(alpha x)
    std::vector<FunctionalInput> inputs;
    Eigen::MatrixXd draws;               // n_paths x n_inputs
    std::uint64_t seed = 0;
    std::string description;             // parameter set written into the CSV header
};

/// Draws via the Cholesky factor of the (nugget-regularized) Gram matrix. Path p consumes
/// the sub-stream Rng::substream(seed, p).
PathFamily sample_paths_gram(const std::vector<FunctionalInput>& inputs, const KernelSpec& spec, std::size_t n_paths,
                             std::uint64_t seed);

/// Draws via the truncated Karhunen-Loève expansion f(g) = sum_j sqrt(lambda_j) <phi_j, g> Z_j.
/// Only valid for the linear kernel whose base kernel produced the eigensystem.
PathFamily sample_paths_kl(const EigenSystem& eig, const std::vector<FunctionalInput>& inputs, std::size_t n_paths,
                           std::uint64_t seed);

/// KL coefficient matrix C with C(i, j) = sqrt(lambda_j) <phi_j, g_i>; cov = C C^T.
Eigen::MatrixXd kl_coefficients(const EigenSystem& eig, const std::vector<FunctionalInput>& inputs);

/// g_alpha(x) = sin(alpha * x1) for every alpha.
std::vector<FunctionalInput> sine_family(const GridPtr& grid, const Eigen::VectorXd& alphas);

Eigen::VectorXd equispaced(double lo, double hi, std::size_t count);

/// Second-moment matrix D^T D / N of zero-mean draws (rows are draws).
Eigen::MatrixXd empirical_covariance(const Eigen::MatrixXd& draws);

/// Standard error of each entry of empirical_covariance for Gaussian draws with covariance
/// `cov`: sqrt((cov_ii cov_jj + cov_ij^2) / N).
Eigen::MatrixXd covariance_standard_error(const Eigen::MatrixXd& cov, std::size_t n_draws);

/// Number of sign changes of the first difference of a path, i.e. its count of interior extrema.
std::size_t count_extrema(const Eigen::VectorXd& path);

/// CSV: a '#' metadata line, then "index,path_1,...", then one row per index value.
void write_path_csv(std::ostream& out, const PathFamily& family);

}  // namespace figp

#endif  // FIGP_SAMPLING_HPP
