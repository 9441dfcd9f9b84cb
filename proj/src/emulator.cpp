#include "figp/emulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace figp {

void FieldDataset::validate() const {
    if (inputs.empty()) throw std::invalid_argument("field dataset has no runs");
    if (static_cast<std::size_t>(fields.rows()) != inputs.size()) {
        throw std::invalid_argument("field dataset: " + std::to_string(fields.rows()) + " field rows for " +
                                    std::to_string(inputs.size()) + " inputs");
    }
    if (fields.cols() == 0) throw std::invalid_argument("field dataset: fields have no pixels");
    if (!fields.allFinite()) throw Error("field dataset contains non-finite values");
    std::size_t p = 1;
    for (std::size_t s : field_shape) p *= s;
    if (!field_shape.empty() && p != pixels()) throw std::invalid_argument("field dataset: field_shape does not match pixel count");
    require_same_grid(inputs);
}

PcaReduction pca_reduce(const FieldDataset& dataset, double threshold) {
    dataset.validate();
    if (dataset.size() < 2) throw std::invalid_argument("pca_reduce: need at least two runs");
    if (!(threshold > 0.0 && threshold <= 1.0)) throw std::invalid_argument("pca_reduce: threshold must lie in (0, 1]");

    PcaReduction out;
    out.mean_field = dataset.fields.colwise().mean().transpose();
    const Eigen::MatrixXd centered = dataset.fields.rowwise() - out.mean_field.transpose();
    const Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();

    const double scale = std::max(1.0, dataset.fields.cwiseAbs().maxCoeff());
    const double tol = static_cast<double>(std::max(centered.rows(), centered.cols())) *
                       std::numeric_limits<double>::epsilon() * std::max(sv[0], scale);
    std::size_t rank = 0;
    while (rank < static_cast<std::size_t>(sv.size()) && sv[static_cast<Eigen::Index>(rank)] > tol) ++rank;
    if (rank == 0) {
        throw Error("pca_reduce: all fields are identical (rank 0); use the constant mean field instead of an emulator");
    }
    out.rank = rank;

    const Eigen::VectorXd var = sv.head(static_cast<Eigen::Index>(rank)).cwiseAbs2();
    const double total = var.sum();
    std::size_t k = 0;
    double cum = 0.0;
    while (k < rank) {
        cum += var[static_cast<Eigen::Index>(k)] / total;
        ++k;
        if (cum >= threshold - 1e-12) break;
    }

    const auto kk = static_cast<Eigen::Index>(k);
    out.components = svd.matrixV().leftCols(kk);
    for (Eigen::Index l = 0; l < kk; ++l) {
        Eigen::Index at = 0;
        out.components.col(l).cwiseAbs().maxCoeff(&at);
        if (out.components(at, l) < 0.0) out.components.col(l) *= -1.0;
    }
    out.scores = centered * out.components;
    out.ratios = var.head(kk) / total;
    return out;
}

PCAEmulator PCAEmulator::assemble(Eigen::VectorXd mean_field, Eigen::MatrixXd components, std::vector<GPModel> models,
                                  Eigen::VectorXd ratios, std::vector<std::size_t> field_shape) {
    const auto k = static_cast<Eigen::Index>(models.size());
    if (k == 0) throw std::invalid_argument("emulator needs at least one component");
    if (components.rows() != mean_field.size() || components.cols() != k || ratios.size() != k) {
        throw std::invalid_argument("emulator: inconsistent component, model and ratio counts");
    }
    const Eigen::MatrixXd gram = components.transpose() * components;
    if ((gram - Eigen::MatrixXd::Identity(k, k)).cwiseAbs().maxCoeff() > 1e-10) {
        throw Error("emulator: components are not orthonormal");
    }
    for (std::size_t l = 1; l < models.size(); ++l) require_same_grid(models[0].inputs()[0], models[l].inputs()[0]);
    PCAEmulator e;
    e.mean_field_ = std::move(mean_field);
    e.components_ = std::move(components);
    e.models_ = std::move(models);
    e.ratios_ = std::move(ratios);
    e.field_shape_ = std::move(field_shape);
    return e;
}

PCAEmulator PCAEmulator::subset(std::span<const std::size_t> which) const {
    std::vector<GPModel> models;
    Eigen::MatrixXd comps(components_.rows(), static_cast<Eigen::Index>(which.size()));
    Eigen::VectorXd ratios(static_cast<Eigen::Index>(which.size()));
    for (std::size_t i = 0; i < which.size(); ++i) {
        if (which[i] >= models_.size()) throw std::out_of_range("emulator subset: component index out of range");
        models.push_back(models_[which[i]]);
        comps.col(static_cast<Eigen::Index>(i)) = components_.col(static_cast<Eigen::Index>(which[i]));
        ratios[static_cast<Eigen::Index>(i)] = ratios_[static_cast<Eigen::Index>(which[i])];
    }
    return assemble(mean_field_, std::move(comps), std::move(models), std::move(ratios), field_shape_);
}

EmulatorFit fit_emulator(const FieldDataset& dataset, double threshold, std::span<const KernelFamily> families,
                         const FitConfig& config) {
    if (families.empty()) throw std::invalid_argument("fit_emulator: no kernel family given");
    const PcaReduction pca = pca_reduce(dataset, threshold);
    std::vector<GPModel> models;
    std::vector<std::vector<FamilyResult>> selection;
    std::vector<std::string> warnings;
    for (Eigen::Index l = 0; l < pca.components.cols(); ++l) {
        const Eigen::VectorXd y = pca.scores.col(l);
        try {
            if (families.size() == 1) {
                models.push_back(fit(dataset.inputs, y, families[0], config));
            } else {
                Selection s = select_kernel(dataset.inputs, y, families, config);
                for (const auto& w : s.warnings) warnings.push_back("component " + std::to_string(l + 1) + ": " + w);
                selection.push_back(std::move(s.report));
                models.push_back(std::move(s.best));
            }
        } catch (const Error& e) {
            throw Error("fitting principal component " + std::to_string(l + 1) + " failed: " + e.what());
        }
    }
    return EmulatorFit{PCAEmulator::assemble(pca.mean_field, pca.components, std::move(models), pca.ratios,
                                             dataset.field_shape),
                       std::move(selection), std::move(warnings)};
}

FieldPrediction predict_field(const PCAEmulator& emulator, const FunctionalInput& g, bool with_factors) {
    const auto k = static_cast<Eigen::Index>(emulator.components_kept());
    FieldPrediction out;
    out.score_mean.resize(k);
    out.score_variance.resize(k);
    for (Eigen::Index l = 0; l < k; ++l) {
        const GPModel& m = emulator.score_models()[static_cast<std::size_t>(l)];
        require_same_grid(m.inputs()[0], g);
        const Prediction p = predict(m, g);
        out.score_mean[l] = p.mean;
        out.score_variance[l] = p.variance;
    }
    const Eigen::MatrixXd& u = emulator.components();
    out.mean = emulator.mean_field() + u * out.score_mean;
    out.variance = u.cwiseAbs2() * out.score_variance;
    if (with_factors) out.covariance_factors = u * out.score_variance.cwiseSqrt().asDiagonal();
    return out;
}

MapeResult field_mape(const Eigen::VectorXd& predicted, const Eigen::VectorXd& truth) {
    if (predicted.size() != truth.size()) throw std::invalid_argument("field_mape: length mismatch");
    if (truth.size() == 0) throw std::invalid_argument("field_mape: empty fields");
    const double eps = 1e-8 * truth.cwiseAbs().maxCoeff();
    MapeResult out;
    double total = 0.0;
    for (Eigen::Index i = 0; i < truth.size(); ++i) {
        if (!(std::abs(truth[i]) >= eps) || truth[i] == 0.0) {
            ++out.excluded;
            continue;
        }
        total += std::abs(truth[i] - predicted[i]) / std::abs(truth[i]);
        ++out.used;
    }
    if (out.used == 0) throw Error("field_mape: every truth entry is zero");
    out.percent = 100.0 * total / static_cast<double>(out.used);
    return out;
}

namespace {

constexpr std::size_t kMaxSyntheticRank = 6;

double weighted_integral(const FunctionalInput& g, const std::function<double(std::span<const double>)>& w) {
    const auto& grid = g.grid();
    double s = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        const Eigen::VectorXd x = grid.nodes().row(r).transpose();
        s += grid.weights()[r] * g.values()[r] * w(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
    }
    return s;
}

}  // namespace

SyntheticFieldMap::SyntheticFieldMap(std::size_t side, std::size_t rank) : side_(side), rank_(rank) {
    if (side < 2) throw std::invalid_argument("synthetic field: side must be >= 2");
    if (rank < 1 || rank > kMaxSyntheticRank) throw std::invalid_argument("synthetic field: rank must be in 1..6");
    const auto p = static_cast<Eigen::Index>(side * side);
    const double pi = std::numbers::pi;
    mean_.resize(p);
    patterns_.resize(p, static_cast<Eigen::Index>(rank));
    for (std::size_t r = 0; r < side; ++r) {
        for (std::size_t c = 0; c < side; ++c) {
            const double u = (static_cast<double>(c) + 0.5) / static_cast<double>(side);
            const double v = (static_cast<double>(r) + 0.5) / static_cast<double>(side);
            const auto i = static_cast<Eigen::Index>(r * side + c);
            mean_[i] = 4.0 + 0.5 * std::sin(pi * u) * std::sin(pi * v);
            const double all[kMaxSyntheticRank] = {std::cos(pi * u),         std::cos(pi * v),
                                                   std::cos(pi * u) * std::cos(pi * v), std::sin(2 * pi * u),
                                                   std::sin(2 * pi * v),     std::cos(2 * pi * (u + v))};
            for (std::size_t l = 0; l < rank; ++l) patterns_(i, static_cast<Eigen::Index>(l)) = all[l];
        }
    }
}

Eigen::VectorXd SyntheticFieldMap::scores(const FunctionalInput& g) const {
    const std::size_t d = g.grid().dim();
    const auto x1 = [](std::span<const double> x) { return x[0]; };
    const auto xd = [d](std::span<const double> x) { return x[d - 1]; };
    Eigen::VectorXd c(static_cast<Eigen::Index>(rank_));
    for (std::size_t l = 0; l < rank_; ++l) {
        double v = 0.0;
        switch (l) {
            case 0: v = integrate(g); break;
            case 1: v = 2.0 * std::pow(weighted_integral(g, x1), 2); break;
            case 2: v = std::sin(2.0 * weighted_integral(g, xd)); break;
            case 3: v = 0.05 * l2_inner(g, g); break;
            case 4: v = 0.02 * std::exp(-integrate(g)); break;
            default: v = 0.01 * weighted_integral(g, [d](std::span<const double> x) { return x[0] * x[d - 1]; }); break;
        }
        c[static_cast<Eigen::Index>(l)] = v;
    }
    return c;
}

Eigen::VectorXd SyntheticFieldMap::operator()(const FunctionalInput& g) const { return mean_ + patterns_ * scores(g); }

FieldDataset SyntheticFieldMap::dataset(const std::vector<FunctionalInput>& inputs) const {
    FieldDataset ds;
    ds.inputs = inputs;
    ds.fields.resize(static_cast<Eigen::Index>(inputs.size()), mean_.size());
    for (std::size_t i = 0; i < inputs.size(); ++i) ds.fields.row(static_cast<Eigen::Index>(i)) = (*this)(inputs[i]).transpose();
    ds.field_shape = shape();
    return ds;
}

}  // namespace figp
