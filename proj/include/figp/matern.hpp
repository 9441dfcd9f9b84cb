#ifndef FIGP_MATERN_HPP
#define FIGP_MATERN_HPP

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace figp {

/// Which closed form to use for the nu = 5/2 radial function.
///   Standard: (1 + z + z^2/3) exp(-z) with z = sqrt(10) r, the general Bessel form at nu = 5/2.
///   Exp5:     (1 + sqrt(5) r + 5 r^2 / 3) exp(-5 r). Kept for reproducing published tables that
///             used this variant; it does not belong to the same family as the other nu values.
enum class PsiForm { Standard, Exp5 };

std::string to_string(PsiForm form);
PsiForm psi_form_from_string(const std::string& name);

/// Matérn radial function parameters.
///
/// psi(r) = sigma2 / (Gamma(nu) 2^(nu-1)) * z^nu * K_nu(z),  z = 2 sqrt(nu) r
///
/// `scales` holds the diagonal of the scale matrix Theta. The distance fed to psi is
/// ||Theta (x - x')||, so larger entries give rougher functions. When the parameters
/// are used as the outer function of the nonlinear functional kernel, `scales` is unused.
struct MaternParams {
    double nu = 2.5;
    double sigma2 = 1.0;
    std::vector<double> scales;
    PsiForm form = PsiForm::Standard;

    void validate() const;
};

/// psi(r) for the given smoothness and variance. Half-integer nu in {1/2, 3/2, 5/2}
/// use closed forms; other nu go through the modified Bessel function of the second kind.
double matern_psi(double r, double nu, double sigma2 = 1.0);
double matern_psi(double r, const MaternParams& params);

/// (1 + sqrt(5) r + (5/3) r^2) exp(-5 r), unit variance.
double matern52_exp5(double r);

/// Psi(x, x') = psi(||Theta (x - x')||).
double base_kernel(std::span<const double> x, std::span<const double> xp, const MaternParams& params);

/// Psi evaluated between all rows of `a` and all rows of `b`.
Eigen::MatrixXd base_kernel_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const MaternParams& params);

/// Symmetric Psi matrix over the rows of `nodes`.
Eigen::MatrixXd base_kernel_matrix(const Eigen::MatrixXd& nodes, const MaternParams& params);

}  // namespace figp

#endif  // FIGP_MATERN_HPP
