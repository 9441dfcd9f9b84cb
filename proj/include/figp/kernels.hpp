#ifndef FIGP_KERNELS_HPP
#define FIGP_KERNELS_HPP

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "figp/domain.hpp"
#include "figp/matern.hpp"

namespace figp {

/// Gram matrix could not be factorized, even after nugget escalation.
class CholeskyFailure : public Error {
public:
    using Error::Error;
};

/// Named pointwise transformation M applied to an input before the linear kernel.
struct PointwiseMap {
    std::string name;
    std::function<double(double)> fn;
};

/// Looks up one of: identity, square, cube, sin, cos, exp, abs, tanh.
PointwiseMap pointwise_map(const std::string& name);

enum class KernelFamily { Linear, Nonlinear };

std::string to_string(KernelFamily family);
KernelFamily kernel_family_from_string(const std::string& name);

/// K(g1, g2) = int int M(g1)(x) M(g2)(x') Psi(x, x') dx dx'
struct LinearKernel {
    MaternParams base;
    std::optional<PointwiseMap> premap;
};

/// K(g1, g2) = psi(gamma * ||g1 - g2||_L2)
struct NonlinearKernel {
    MaternParams outer;
    double gamma = 1.0;
};

/// Default nugget, as a fraction of the kernel variance.
inline constexpr double kDefaultRelativeNugget = 1e-8;
/// Largest nugget the escalation policy tries, as a fraction of the kernel variance.
inline constexpr double kMaxRelativeNugget = 1e-4;

struct KernelSpec {
    std::variant<LinearKernel, NonlinearKernel> kernel;
    /// Absolute diagonal regularization added to Gram matrices.
    double nugget = kDefaultRelativeNugget;

    static KernelSpec linear(MaternParams base, std::optional<PointwiseMap> premap = std::nullopt);
    static KernelSpec nonlinear(MaternParams outer, double gamma);

    [[nodiscard]] KernelFamily family() const;
    [[nodiscard]] const MaternParams& matern() const;
    [[nodiscard]] MaternParams& matern();
    [[nodiscard]] double sigma2() const { return matern().sigma2; }

    /// Copy with variance set to sigma2 and the nugget rescaled to keep its ratio to the variance.
    [[nodiscard]] KernelSpec with_sigma2(double sigma2) const;

    void validate() const;
};

double linear_kernel(const FunctionalInput& g1, const FunctionalInput& g2, const MaternParams& params,
                     const std::optional<PointwiseMap>& premap = std::nullopt);

double nonlinear_kernel(const FunctionalInput& g1, const FunctionalInput& g2, const MaternParams& outer, double gamma);

/// Evaluates a functional kernel against one fixed grid.
///
/// For the linear kernel the node matrix Psi(x_i, x_j) is built once and each input is reduced
/// to its weighted feature vector W M(g), so K(g1, g2) = f1^T Psi f2.
class KernelEvaluator {
public:
    KernelEvaluator(KernelSpec spec, GridPtr grid);

    [[nodiscard]] const KernelSpec& spec() const { return spec_; }
    [[nodiscard]] const GridPtr& grid() const { return grid_; }

    [[nodiscard]] double operator()(const FunctionalInput& g1, const FunctionalInput& g2) const;
    [[nodiscard]] double diag(const FunctionalInput& g) const;

    /// K(inputs_i, inputs_j) without nugget. Exactly symmetric.
    [[nodiscard]] Eigen::MatrixXd matrix(std::span<const FunctionalInput> inputs) const;

    /// K(rows_i, cols_j).
    [[nodiscard]] Eigen::MatrixXd cross(std::span<const FunctionalInput> rows, std::span<const FunctionalInput> cols) const;

    /// Vector k(g) = (K(inputs_i, g))_i.
    [[nodiscard]] Eigen::VectorXd cross(std::span<const FunctionalInput> inputs, const FunctionalInput& g) const;

    // Linear kernel only. node_field returns Psi W M(inputs) c on the nodes, and
    // apply_field(g, node_field(inputs, c)) = sum_i c_i K(inputs_i, g).
    [[nodiscard]] Eigen::VectorXd node_field(std::span<const FunctionalInput> inputs, const Eigen::VectorXd& c) const;
    [[nodiscard]] double apply_field(const FunctionalInput& g, const Eigen::VectorXd& field) const;

private:
    [[nodiscard]] Eigen::MatrixXd features(std::span<const FunctionalInput> inputs) const;
    void check(const FunctionalInput& g) const;

    KernelSpec spec_;
    GridPtr grid_;
    Eigen::MatrixXd psi_nodes_;  // linear kernel only
};

/// Gram matrix K_n + nugget * I with its Cholesky factor.
struct GramFactorization {
    Eigen::MatrixXd gram;  // includes the nugget on the diagonal
    Eigen::MatrixXd chol;  // lower triangular, chol * chol^T = gram
    double log_det = 0.0;
    double nugget = 0.0;   // nugget actually used

    [[nodiscard]] Eigen::Index size() const { return gram.rows(); }
    [[nodiscard]] Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
    [[nodiscard]] Eigen::MatrixXd solve(const Eigen::MatrixXd& b) const;
    [[nodiscard]] Eigen::MatrixXd inverse() const;
};

/// Factorizes K + nugget * I. With a positive nugget, failures escalate the nugget tenfold
/// up to kMaxRelativeNugget * sigma2 before giving up; a zero nugget gets a single attempt.
GramFactorization factorize(const Eigen::MatrixXd& kernel_matrix, double nugget, double sigma2);

GramFactorization gram(std::span<const FunctionalInput> inputs, const KernelSpec& spec);

}  // namespace figp

#endif  // FIGP_KERNELS_HPP
