#include "figp/gp.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "figp/optimize.hpp"

namespace figp {

namespace {

// Lower bound for the profiled variance, relative to the mean square of y.
constexpr double kSigma2Floor = 1e-20;
// Negative posterior variances down to this fraction of sigma2 are round-off.
constexpr double kVarianceClamp = 1e-8;

KernelSpec spec_from_params(KernelFamily family, std::span<const double> log_params, const FitConfig& config,
                            double sigma2) {
    MaternParams m;
    m.nu = config.nu;
    m.sigma2 = sigma2;
    m.form = config.form;
    KernelSpec spec;
    if (family == KernelFamily::Linear) {
        for (double lp : log_params) m.scales.push_back(std::exp(lp));
        spec = KernelSpec::linear(std::move(m), config.premap);
    } else {
        spec = KernelSpec::nonlinear(std::move(m), std::exp(log_params[0]));
    }
    spec.nugget = config.relative_nugget * sigma2;
    return spec;
}

void check_data(std::span<const FunctionalInput> inputs, const Eigen::VectorXd& y) {
    if (inputs.empty()) throw std::invalid_argument("no training inputs");
    if (static_cast<std::size_t>(y.size()) != inputs.size()) {
        throw std::invalid_argument("number of outputs does not match number of inputs");
    }
    if (!y.allFinite()) throw Error("training outputs contain non-finite values");
    require_same_grid(inputs);
}

}  // namespace

void FitConfig::validate() const {
    auto ok = [](const std::pair<double, double>& b) {
        return std::isfinite(b.first) && std::isfinite(b.second) && b.first <= b.second;
    };
    if (!ok(log_scale_bounds) || !ok(log_gamma_bounds)) throw std::invalid_argument("fit bounds must be finite, lo <= hi");
    if (multistarts < 1) throw std::invalid_argument("multistarts must be >= 1");
    if (max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
    if (!(nu > 0.0)) throw std::invalid_argument("nu must be positive");
    if (!(relative_nugget >= 0.0)) throw std::invalid_argument("nugget must be non-negative");
}

LikelihoodTerms profiled_likelihood(const GramFactorization& correlation, const Eigen::VectorXd& y, MeanMode mean) {
    const auto n = static_cast<double>(y.size());
    LikelihoodTerms out;
    if (mean == MeanMode::Profiled) {
        const Eigen::VectorXd ones = Eigen::VectorXd::Ones(y.size());
        const Eigen::VectorXd r_ones = correlation.solve(ones);
        out.mu = r_ones.dot(y) / r_ones.dot(ones);
    }
    const Eigen::VectorXd resid = y.array() - out.mu;
    const double floor = kSigma2Floor * std::max(1.0, y.squaredNorm() / n);
    out.sigma2 = std::max(resid.dot(correlation.solve(resid)) / n, floor);
    out.log_likelihood =
        -0.5 * n * std::log(out.sigma2) - 0.5 * correlation.log_det - 0.5 * n * (1.0 + std::log(2.0 * std::numbers::pi));
    return out;
}

double log_marginal_likelihood(const KernelSpec& spec, std::span<const FunctionalInput> inputs, const Eigen::VectorXd& y,
                               MeanMode mean) {
    check_data(inputs, y);
    const KernelSpec unit = spec.with_sigma2(1.0);
    return profiled_likelihood(gram(inputs, unit), y, mean).log_likelihood;
}

GPModel GPModel::condition(KernelSpec spec, std::vector<FunctionalInput> inputs, Eigen::VectorXd y, MeanMode mean) {
    check_data(inputs, y);
    GPModel m;
    m.evaluator_ = std::make_shared<const KernelEvaluator>(std::move(spec), inputs[0].grid_ptr());
    const auto& s = m.evaluator_->spec();
    m.factorization_ = factorize(m.evaluator_->matrix(inputs), s.nugget, s.sigma2());
    m.inputs_ = std::move(inputs);
    m.y_ = std::move(y);
    m.mean_mode_ = mean;
    if (mean == MeanMode::Profiled) {
        const Eigen::VectorXd ones = Eigen::VectorXd::Ones(m.y_.size());
        const Eigen::VectorXd k_ones = m.factorization_.solve(ones);
        m.mu_ = k_ones.dot(m.y_) / k_ones.dot(ones);
    }
    m.alpha_ = m.factorization_.solve(Eigen::VectorXd(m.y_.array() - m.mu_));
    if (m.family() == KernelFamily::Linear) m.mean_field_ = m.evaluator_->node_field(m.inputs_, m.alpha_);

    // Likelihood with the variance profiled, which is what fit() maximizes.
    GramFactorization corr = m.factorization_;
    const double s2 = s.sigma2();
    corr.gram /= s2;
    corr.chol /= std::sqrt(s2);
    corr.log_det -= static_cast<double>(m.y_.size()) * std::log(s2);
    m.log_likelihood_ = profiled_likelihood(corr, m.y_, mean).log_likelihood;
    return m;
}

double GPModel::mean_offset(const FunctionalInput& g, const Eigen::VectorXd& k) const {
    // the linear kernel goes through one quadrature so the mean stays linear in g
    if (mean_field_.size() > 0) return evaluator_->apply_field(g, mean_field_);
    return k.dot(alpha_);
}

GPModel fit(std::vector<FunctionalInput> inputs, Eigen::VectorXd y, KernelFamily family, const FitConfig& config) {
    config.validate();
    check_data(inputs, y);
    if (inputs.size() < 2) throw std::invalid_argument("fitting needs at least two training points");

    Box box;
    if (family == KernelFamily::Linear) {
        const std::size_t d = inputs[0].grid().dim();
        box.lo.assign(d, config.log_scale_bounds.first);
        box.hi.assign(d, config.log_scale_bounds.second);
    } else {
        box.lo.assign(1, config.log_gamma_bounds.first);
        box.hi.assign(1, config.log_gamma_bounds.second);
    }

    const auto objective = [&](std::span<const double> p) {
        try {
            const KernelSpec spec = spec_from_params(family, p, config, 1.0);
            return -profiled_likelihood(gram(inputs, spec), y, config.mean).log_likelihood;
        } catch (const CholeskyFailure&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    Rng rng(config.seed);
    const auto starts = latin_hypercube(box, config.multistarts, rng);
    std::optional<OptimResult> best;
    for (const auto& s : starts) {
        OptimResult r = nelder_mead(objective, s, box, config.max_iters);
        if (std::isfinite(r.value) && (!best || r.value < best->value)) best = std::move(r);
    }
    if (!best) throw CholeskyFailure("fit: Gram factorization failed at every start");

    const KernelSpec unit = spec_from_params(family, best->x, config, 1.0);
    const LikelihoodTerms terms = profiled_likelihood(gram(inputs, unit), y, config.mean);
    return GPModel::condition(unit.with_sigma2(terms.sigma2), std::move(inputs), std::move(y), config.mean);
}

namespace {

Prediction finish(const GPModel& model, double mean, double variance) {
    if (variance < 0.0) {
        if (-variance > kVarianceClamp * model.sigma2()) {
            std::ostringstream msg;
            msg << "posterior variance " << variance << " is negative beyond round-off; factorization is unreliable";
            throw Error(msg.str());
        }
        variance = 0.0;
    }
    return {mean, variance};
}

}  // namespace

Prediction predict(const GPModel& model, const FunctionalInput& g) {
    const Eigen::VectorXd k = model.evaluator().cross(model.inputs(), g);
    const double mean = model.mu() + model.mean_offset(g, k);
    const double variance = model.evaluator().diag(g) - k.dot(model.factorization().solve(k));
    return finish(model, mean, variance);
}

std::vector<Prediction> predict(const GPModel& model, std::span<const FunctionalInput> gs) {
    if (gs.empty()) return {};
    const Eigen::MatrixXd k = model.evaluator().cross(model.inputs(), gs);
    const Eigen::MatrixXd solved = model.factorization().solve(k);
    std::vector<Prediction> out;
    out.reserve(gs.size());
    for (std::size_t j = 0; j < gs.size(); ++j) {
        const auto c = static_cast<Eigen::Index>(j);
        const double mean = model.mu() + model.mean_offset(gs[j], k.col(c));
        const double variance = model.evaluator().diag(gs[j]) - k.col(c).dot(solved.col(c));
        out.push_back(finish(model, mean, variance));
    }
    return out;
}

Eigen::VectorXd loocv_residuals(const GPModel& model) {
    if (model.size() < 2) throw std::invalid_argument("LOOCV needs at least two observations");
    const Eigen::MatrixXd kinv = model.factorization().inverse();
    return model.alpha().cwiseQuotient(kinv.diagonal());
}

double loocv_error(const GPModel& model) {
    const Eigen::VectorXd e = loocv_residuals(model);
    return e.squaredNorm() / static_cast<double>(e.size());
}

Selection select_kernel(const std::vector<FunctionalInput>& inputs, const Eigen::VectorXd& y,
                        std::span<const KernelFamily> families, const FitConfig& config) {
    if (families.empty()) throw std::invalid_argument("select_kernel needs at least one kernel family");
    std::vector<FamilyResult> report;
    std::vector<std::string> warnings;
    std::optional<GPModel> best;
    double best_loocv = std::numeric_limits<double>::infinity();
    for (const KernelFamily family : families) {
        FamilyResult row;
        row.family = family;
        try {
            GPModel m = fit(inputs, y, family, config);
            row.loocv = loocv_error(m);
            row.log_likelihood = m.log_likelihood();
            row.ok = true;
            const bool wins = row.loocv < best_loocv ||
                              (row.loocv == best_loocv && family == KernelFamily::Linear && best &&
                               best->family() != KernelFamily::Linear);
            if (!best || wins) {
                best_loocv = row.loocv;
                best = std::move(m);
            }
        } catch (const Error& e) {
            row.message = e.what();
            warnings.push_back(to_string(family) + " kernel excluded: " + e.what());
        }
        report.push_back(std::move(row));
    }
    if (!best) throw Error("select_kernel: every kernel family failed to fit");
    return Selection{std::move(*best), std::move(report), std::move(warnings)};
}

}  // namespace figp
