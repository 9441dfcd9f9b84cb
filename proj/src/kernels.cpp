#include "figp/kernels.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace figp {

PointwiseMap pointwise_map(const std::string& name) {
    if (name == "identity") return {name, [](double v) { return v; }};
    if (name == "square") return {name, [](double v) { return v * v; }};
    if (name == "cube") return {name, [](double v) { return v * v * v; }};
    if (name == "sin") return {name, [](double v) { return std::sin(v); }};
    if (name == "cos") return {name, [](double v) { return std::cos(v); }};
    if (name == "exp") return {name, [](double v) { return std::exp(v); }};
    if (name == "abs") return {name, [](double v) { return std::abs(v); }};
    if (name == "tanh") return {name, [](double v) { return std::tanh(v); }};
    throw std::invalid_argument("unknown pointwise map: " + name);
}

std::string to_string(KernelFamily family) { return family == KernelFamily::Linear ? "linear" : "nonlinear"; }

KernelFamily kernel_family_from_string(const std::string& name) {
    if (name == "linear") return KernelFamily::Linear;
    if (name == "nonlinear") return KernelFamily::Nonlinear;
    throw std::invalid_argument("unknown kernel family: " + name);
}

KernelSpec KernelSpec::linear(MaternParams base, std::optional<PointwiseMap> premap) {
    const double nugget = kDefaultRelativeNugget * base.sigma2;
    return KernelSpec{LinearKernel{std::move(base), std::move(premap)}, nugget};
}

KernelSpec KernelSpec::nonlinear(MaternParams outer, double gamma) {
    const double nugget = kDefaultRelativeNugget * outer.sigma2;
    return KernelSpec{NonlinearKernel{std::move(outer), gamma}, nugget};
}

KernelFamily KernelSpec::family() const {
    return std::holds_alternative<LinearKernel>(kernel) ? KernelFamily::Linear : KernelFamily::Nonlinear;
}

const MaternParams& KernelSpec::matern() const {
    if (const auto* lin = std::get_if<LinearKernel>(&kernel)) return lin->base;
    return std::get<NonlinearKernel>(kernel).outer;
}

MaternParams& KernelSpec::matern() {
    if (auto* lin = std::get_if<LinearKernel>(&kernel)) return lin->base;
    return std::get<NonlinearKernel>(kernel).outer;
}

KernelSpec KernelSpec::with_sigma2(double sigma2) const {
    KernelSpec out = *this;
    out.nugget = nugget * (sigma2 / this->sigma2());
    out.matern().sigma2 = sigma2;
    return out;
}

void KernelSpec::validate() const {
    matern().validate();
    if (!(nugget >= 0.0) || !std::isfinite(nugget)) throw std::invalid_argument("nugget must be non-negative");
    if (const auto* nl = std::get_if<NonlinearKernel>(&kernel)) {
        if (!(nl->gamma > 0.0) || !std::isfinite(nl->gamma)) throw std::invalid_argument("gamma must be positive");
    }
}

double linear_kernel(const FunctionalInput& g1, const FunctionalInput& g2, const MaternParams& params,
                     const std::optional<PointwiseMap>& premap) {
    require_same_grid(g1, g2);
    const auto& grid = g1.grid();
    Eigen::VectorXd v1 = g1.values();
    Eigen::VectorXd v2 = g2.values();
    if (premap) {
        v1 = apply_pointwise_map(g1, premap->fn).values();
        v2 = apply_pointwise_map(g2, premap->fn).values();
    }
    const Eigen::VectorXd f1 = grid.weights().cwiseProduct(v1);
    const Eigen::VectorXd f2 = grid.weights().cwiseProduct(v2);
    const Eigen::MatrixXd psi = base_kernel_matrix(grid.nodes(), params);
    return f1.dot(psi * f2);
}

double nonlinear_kernel(const FunctionalInput& g1, const FunctionalInput& g2, const MaternParams& outer, double gamma) {
    if (!(gamma > 0.0)) throw std::invalid_argument("nonlinear kernel: gamma must be positive");
    return matern_psi(gamma * l2_distance(g1, g2), outer);
}

KernelEvaluator::KernelEvaluator(KernelSpec spec, GridPtr grid) : spec_(std::move(spec)), grid_(std::move(grid)) {
    spec_.validate();
    if (spec_.family() == KernelFamily::Linear) {
        psi_nodes_ = base_kernel_matrix(grid_->nodes(), spec_.matern());
    }
}

void KernelEvaluator::check(const FunctionalInput& g) const {
    if (!g.grid().same_as(*grid_)) throw GridMismatch();
}

Eigen::MatrixXd KernelEvaluator::features(std::span<const FunctionalInput> inputs) const {
    const auto& lin = std::get<LinearKernel>(spec_.kernel);
    Eigen::MatrixXd f(static_cast<Eigen::Index>(grid_->size()), static_cast<Eigen::Index>(inputs.size()));
    for (std::size_t j = 0; j < inputs.size(); ++j) {
        check(inputs[j]);
        const auto col = static_cast<Eigen::Index>(j);
        if (lin.premap) {
            f.col(col) = grid_->weights().cwiseProduct(apply_pointwise_map(inputs[j], lin.premap->fn).values());
        } else {
            f.col(col) = grid_->weights().cwiseProduct(inputs[j].values());
        }
    }
    return f;
}

double KernelEvaluator::operator()(const FunctionalInput& g1, const FunctionalInput& g2) const {
    check(g1);
    check(g2);
    if (spec_.family() == KernelFamily::Linear) {
        const std::vector<FunctionalInput> pair{g1, g2};
        const Eigen::MatrixXd f = features(pair);
        return f.col(0).dot(psi_nodes_ * f.col(1));
    }
    const auto& nl = std::get<NonlinearKernel>(spec_.kernel);
    return matern_psi(nl.gamma * l2_distance(g1, g2), nl.outer);
}

double KernelEvaluator::diag(const FunctionalInput& g) const {
    check(g);
    if (spec_.family() == KernelFamily::Nonlinear) return spec_.sigma2();
    const Eigen::MatrixXd f = features(std::span<const FunctionalInput>(&g, 1));
    return f.col(0).dot(psi_nodes_ * f.col(0));
}

Eigen::VectorXd KernelEvaluator::node_field(std::span<const FunctionalInput> inputs, const Eigen::VectorXd& c) const {
    if (spec_.family() != KernelFamily::Linear) throw std::logic_error("node_field is defined for the linear kernel only");
    return psi_nodes_ * (features(inputs) * c);
}

double KernelEvaluator::apply_field(const FunctionalInput& g, const Eigen::VectorXd& field) const {
    check(g);
    return features(std::span<const FunctionalInput>(&g, 1)).col(0).dot(field);
}

Eigen::MatrixXd KernelEvaluator::matrix(std::span<const FunctionalInput> inputs) const {
    const auto n = static_cast<Eigen::Index>(inputs.size());
    Eigen::MatrixXd k(n, n);
    if (spec_.family() == KernelFamily::Linear) {
        const Eigen::MatrixXd f = features(inputs);
        const Eigen::MatrixXd pf = psi_nodes_ * f;
        for (Eigen::Index j = 0; j < n; ++j) {
            for (Eigen::Index i = 0; i <= j; ++i) {
                const double v = f.col(i).dot(pf.col(j));
                k(i, j) = v;
                k(j, i) = v;
            }
        }
        return k;
    }
    const auto& nl = std::get<NonlinearKernel>(spec_.kernel);
    for (const auto& g : inputs) check(g);
    for (Eigen::Index j = 0; j < n; ++j) {
        k(j, j) = nl.outer.sigma2;
        for (Eigen::Index i = 0; i < j; ++i) {
            const double v = matern_psi(
                nl.gamma * l2_distance(inputs[static_cast<std::size_t>(i)], inputs[static_cast<std::size_t>(j)]), nl.outer);
            k(i, j) = v;
            k(j, i) = v;
        }
    }
    return k;
}

Eigen::MatrixXd KernelEvaluator::cross(std::span<const FunctionalInput> rows, std::span<const FunctionalInput> cols) const {
    const auto nr = static_cast<Eigen::Index>(rows.size());
    const auto nc = static_cast<Eigen::Index>(cols.size());
    if (spec_.family() == KernelFamily::Linear) {
        const Eigen::MatrixXd fr = features(rows);
        const Eigen::MatrixXd fc = features(cols);
        return fr.transpose() * (psi_nodes_ * fc);
    }
    const auto& nl = std::get<NonlinearKernel>(spec_.kernel);
    Eigen::MatrixXd k(nr, nc);
    for (Eigen::Index i = 0; i < nr; ++i) {
        check(rows[static_cast<std::size_t>(i)]);
        for (Eigen::Index j = 0; j < nc; ++j) {
            check(cols[static_cast<std::size_t>(j)]);
            k(i, j) = matern_psi(
                nl.gamma * l2_distance(rows[static_cast<std::size_t>(i)], cols[static_cast<std::size_t>(j)]), nl.outer);
        }
    }
    return k;
}

Eigen::VectorXd KernelEvaluator::cross(std::span<const FunctionalInput> inputs, const FunctionalInput& g) const {
    return cross(inputs, std::span<const FunctionalInput>(&g, 1)).col(0);
}

Eigen::VectorXd GramFactorization::solve(const Eigen::VectorXd& b) const {
    const auto l = chol.triangularView<Eigen::Lower>();
    return l.transpose().solve(l.solve(b));
}

Eigen::MatrixXd GramFactorization::solve(const Eigen::MatrixXd& b) const {
    const auto l = chol.triangularView<Eigen::Lower>();
    return l.transpose().solve(l.solve(b));
}

Eigen::MatrixXd GramFactorization::inverse() const {
    return solve(Eigen::MatrixXd(Eigen::MatrixXd::Identity(gram.rows(), gram.cols())));
}

namespace {

// Cholesky with a pivot floor: a pivot below n * eps * max(diag) is treated as a failure,
// which catches exactly singular matrices that round to a tiny positive pivot.
bool try_cholesky(const Eigen::MatrixXd& a, Eigen::MatrixXd& l) {
    const Eigen::Index n = a.rows();
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success) return false;
    l = llt.matrixL();
    const double max_diag = a.diagonal().cwiseAbs().maxCoeff();
    const double floor = static_cast<double>(n) * std::numeric_limits<double>::epsilon() * max_diag;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double p = l(i, i);
        if (!(p > 0.0) || !std::isfinite(p) || p * p <= floor) return false;
    }
    return true;
}

}  // namespace

GramFactorization factorize(const Eigen::MatrixXd& kernel_matrix, double nugget, double sigma2) {
    if (kernel_matrix.rows() == 0 || kernel_matrix.rows() != kernel_matrix.cols()) {
        throw std::invalid_argument("Gram matrix must be square and non-empty");
    }
    if (!kernel_matrix.allFinite()) throw CholeskyFailure("Gram matrix has non-finite entries");
    const double max_nugget = kMaxRelativeNugget * sigma2;
    double current = nugget;
    GramFactorization out;
    for (;;) {
        out.gram = kernel_matrix;
        out.gram.diagonal().array() += current;
        if (try_cholesky(out.gram, out.chol)) break;
        if (!(current > 0.0) || current * 10.0 > max_nugget * (1.0 + 1e-12)) {
            std::ostringstream msg;
            msg << "Cholesky factorization failed (nugget " << current << ")";
            throw CholeskyFailure(msg.str());
        }
        current *= 10.0;
    }
    out.nugget = current;
    out.log_det = 2.0 * out.chol.diagonal().array().log().sum();
    return out;
}

GramFactorization gram(std::span<const FunctionalInput> inputs, const KernelSpec& spec) {
    if (inputs.empty()) throw std::invalid_argument("gram requires at least one input");
    require_same_grid(inputs);
    const KernelEvaluator eval(spec, inputs[0].grid_ptr());
    return factorize(eval.matrix(inputs), spec.nugget, spec.sigma2());
}

}  // namespace figp
