#ifndef FIGP_GP_HPP
#define FIGP_GP_HPP

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "figp/domain.hpp"
#include "figp/kernels.hpp"

namespace figp {

/// How the constant mean mu is handled.
///   Profiled: generalized least squares estimate (1^T K^-1 y) / (1^T K^-1 1).
///   Zero:     mu fixed at 0.
enum class MeanMode { Profiled, Zero };

struct FitConfig {
    /// Search box for log(theta_k), one entry per input dimension, linear family.
    std::pair<double, double> log_scale_bounds{-3.0, 3.0};
    /// Search box for log(gamma), nonlinear family.
    std::pair<double, double> log_gamma_bounds{-5.0, 2.0};
    int multistarts = 8;
    int max_iters = 200;
    std::uint64_t seed = 42;
    double nu = 2.5;
    PsiForm form = PsiForm::Standard;
    double relative_nugget = kDefaultRelativeNugget;
    MeanMode mean = MeanMode::Profiled;
    /// Optional pre-map for the linear family.
    std::optional<PointwiseMap> premap;

    void validate() const;
};

struct LikelihoodTerms {
    double log_likelihood = 0.0;
    double mu = 0.0;
    double sigma2 = 0.0;
};

/// Concentrated Gaussian log-likelihood given the factorization of the correlation matrix R
/// (K_n = sigma2 R). mu and sigma2 are profiled out:
///   mu     = (1^T R^-1 y) / (1^T R^-1 1)    (0 under MeanMode::Zero)
///   sigma2 = (y - mu 1)^T R^-1 (y - mu 1) / n
///   l      = -n/2 log sigma2 - 1/2 log|R| - n/2 (1 + log 2 pi)
LikelihoodTerms profiled_likelihood(const GramFactorization& correlation, const Eigen::VectorXd& y,
                                    MeanMode mean = MeanMode::Profiled);

/// Profiled log-likelihood of the data under the correlation structure of `spec`.
/// The variance in `spec` is irrelevant; only its ratio to the nugget matters.
double log_marginal_likelihood(const KernelSpec& spec, std::span<const FunctionalInput> inputs,
                               const Eigen::VectorXd& y, MeanMode mean = MeanMode::Profiled);

struct Prediction {
    double mean = 0.0;
    double variance = 0.0;
};

/// Conditioned functional-input GP. Immutable once built.
class GPModel {
public:
    /// Conditions on data with the kernel held fixed (variance included).
    static GPModel condition(KernelSpec spec, std::vector<FunctionalInput> inputs, Eigen::VectorXd y,
                             MeanMode mean = MeanMode::Profiled);

    [[nodiscard]] const KernelSpec& spec() const { return evaluator_->spec(); }
    [[nodiscard]] KernelFamily family() const { return spec().family(); }
    [[nodiscard]] const std::vector<FunctionalInput>& inputs() const { return inputs_; }
    [[nodiscard]] const Eigen::VectorXd& y() const { return y_; }
    [[nodiscard]] double mu() const { return mu_; }
    [[nodiscard]] double sigma2() const { return spec().sigma2(); }
    [[nodiscard]] MeanMode mean_mode() const { return mean_mode_; }
    [[nodiscard]] const GramFactorization& factorization() const { return factorization_; }
    /// K_n^-1 (y - mu 1), with K_n including the nugget.
    [[nodiscard]] const Eigen::VectorXd& alpha() const { return alpha_; }
    /// Posterior mean minus mu at g.
    [[nodiscard]] double mean_offset(const FunctionalInput& g, const Eigen::VectorXd& k) const;
    [[nodiscard]] const KernelEvaluator& evaluator() const { return *evaluator_; }
    [[nodiscard]] std::size_t size() const { return inputs_.size(); }
    /// Profiled log-likelihood at the conditioned hyperparameters.
    [[nodiscard]] double log_likelihood() const { return log_likelihood_; }

private:
    GPModel() = default;

    std::shared_ptr<const KernelEvaluator> evaluator_;
    std::vector<FunctionalInput> inputs_;
    Eigen::VectorXd y_;
    double mu_ = 0.0;
    MeanMode mean_mode_ = MeanMode::Profiled;
    GramFactorization factorization_;
    Eigen::VectorXd alpha_;
    Eigen::VectorXd mean_field_;  // linear kernel: node_field(inputs, alpha)
    double log_likelihood_ = 0.0;
};

/// Maximum-likelihood fit. nu is fixed by the config; the free parameters (theta for Linear,
/// gamma for Nonlinear) are searched in log space from Latin-hypercube starts.
GPModel fit(std::vector<FunctionalInput> inputs, Eigen::VectorXd y, KernelFamily family, const FitConfig& config = {});

/// Posterior mean and variance at g. Negative variances within 1e-8 * sigma2 of zero are
/// clamped; anything more negative throws.
Prediction predict(const GPModel& model, const FunctionalInput& g);
std::vector<Prediction> predict(const GPModel& model, std::span<const FunctionalInput> gs);

/// Closed-form leave-one-out residuals y_i - y~_i = (K^-1 (y - mu 1))_i / (K^-1)_ii with mu and
/// the kernel frozen.
Eigen::VectorXd loocv_residuals(const GPModel& model);

/// Mean of the squared leave-one-out residuals.
double loocv_error(const GPModel& model);

struct FamilyResult {
    KernelFamily family = KernelFamily::Linear;
    bool ok = false;
    double loocv = 0.0;
    double log_likelihood = 0.0;
    std::string message;  // failure reason when !ok
};

struct Selection {
    GPModel best;
    std::vector<FamilyResult> report;
    std::vector<std::string> warnings;
};

/// Fits each family and returns the one with the smallest LOOCV error. Ties go to Linear.
/// Families that fail to fit are skipped with a warning; throws only if all fail.
Selection select_kernel(const std::vector<FunctionalInput>& inputs, const Eigen::VectorXd& y,
                        std::span<const KernelFamily> families, const FitConfig& config = {});

}  // namespace figp

#endif  // FIGP_GP_HPP
