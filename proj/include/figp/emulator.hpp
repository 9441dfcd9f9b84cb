#ifndef FIGP_EMULATOR_HPP
#define FIGP_EMULATOR_HPP

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "figp/domain.hpp"
#include "figp/gp.hpp"

namespace figp {

/// n training runs, each a functional input and a flattened output field of p pixels.
struct FieldDataset {
    std::vector<FunctionalInput> inputs;
    Eigen::MatrixXd fields;               // n x p
    std::vector<std::size_t> field_shape; // product equals p

    [[nodiscard]] std::size_t size() const { return inputs.size(); }
    [[nodiscard]] std::size_t pixels() const { return static_cast<std::size_t>(fields.cols()); }
    void validate() const;
};

struct PcaReduction {
    Eigen::VectorXd mean_field;   // p
    Eigen::MatrixXd components;   // p x k, orthonormal columns
    Eigen::MatrixXd scores;       // n x k
    Eigen::VectorXd ratios;       // explained-variance ratio of each retained component
    std::size_t rank = 0;         // numerical rank of the centered fields
};

/// Centered SVD; keeps the smallest k whose cumulative explained variance reaches `threshold`,
/// never more than the numerical rank. Component signs are fixed so the largest-magnitude
/// entry is positive.
PcaReduction pca_reduce(const FieldDataset& dataset, double threshold);

struct FieldPrediction {
    Eigen::VectorXd mean;       // p
    Eigen::VectorXd variance;   // p, sum_l var_l u_l^2
    /// p x k with columns sqrt(var_l) u_l, so the full predictive covariance is F F^T.
    std::optional<Eigen::MatrixXd> covariance_factors;
    Eigen::VectorXd score_mean;
    Eigen::VectorXd score_variance;
};

class PCAEmulator {
public:
    /// Checks shapes and orthonormality of the components (1e-10).
    static PCAEmulator assemble(Eigen::VectorXd mean_field, Eigen::MatrixXd components, std::vector<GPModel> models,
                                Eigen::VectorXd ratios, std::vector<std::size_t> field_shape);

    [[nodiscard]] const Eigen::VectorXd& mean_field() const { return mean_field_; }
    [[nodiscard]] const Eigen::MatrixXd& components() const { return components_; }
    [[nodiscard]] const std::vector<GPModel>& score_models() const { return models_; }
    [[nodiscard]] const Eigen::VectorXd& explained_variance_ratio() const { return ratios_; }
    [[nodiscard]] const std::vector<std::size_t>& field_shape() const { return field_shape_; }
    [[nodiscard]] std::size_t components_kept() const { return models_.size(); }
    [[nodiscard]] std::size_t pixels() const { return static_cast<std::size_t>(mean_field_.size()); }

    /// Emulator restricted to the listed components.
    [[nodiscard]] PCAEmulator subset(std::span<const std::size_t> which) const;

private:
    PCAEmulator() = default;
    Eigen::VectorXd mean_field_;
    Eigen::MatrixXd components_;
    std::vector<GPModel> models_;
    Eigen::VectorXd ratios_;
    std::vector<std::size_t> field_shape_;
};

struct EmulatorFit {
    PCAEmulator emulator;
    std::vector<std::vector<FamilyResult>> selection;  // per component; empty when one family given
    std::vector<std::string> warnings;
};

/// One GP per retained score. A single family is fitted directly; several are compared with
/// select_kernel independently for each component.
EmulatorFit fit_emulator(const FieldDataset& dataset, double threshold, std::span<const KernelFamily> families,
                         const FitConfig& config = {});

/// mean = mean_field + sum_l m_l(g) u_l, where m_l is the full GP posterior mean of score l
/// (including its constant mean). variance = sum_l v_l(g) u_l^2.
FieldPrediction predict_field(const PCAEmulator& emulator, const FunctionalInput& g, bool with_factors = false);

struct MapeResult {
    double percent = 0.0;
    std::size_t used = 0;
    std::size_t excluded = 0;  // entries with |truth| < 1e-8 max|truth|
};

MapeResult field_mape(const Eigen::VectorXd& predicted, const Eigen::VectorXd& truth);

/// Smooth map from a functional input to a side x side field with intrinsic rank `rank`
/// (at most 6): F(g) = m + sum_l c_l(g) v_l with fixed pixel patterns v_l and scalar
/// functionals c_l of decreasing scale, some linear in g and some not.
class SyntheticFieldMap {
public:
    SyntheticFieldMap(std::size_t side, std::size_t rank);

    [[nodiscard]] Eigen::VectorXd operator()(const FunctionalInput& g) const;
    [[nodiscard]] Eigen::VectorXd scores(const FunctionalInput& g) const;
    [[nodiscard]] FieldDataset dataset(const std::vector<FunctionalInput>& inputs) const;
    [[nodiscard]] const Eigen::MatrixXd& patterns() const { return patterns_; }
    [[nodiscard]] std::vector<std::size_t> shape() const { return {side_, side_}; }

private:
    std::size_t side_;
    std::size_t rank_;
    Eigen::VectorXd mean_;
    Eigen::MatrixXd patterns_;  // p x rank
};

}  // namespace figp

#endif  // FIGP_EMULATOR_HPP
