#include "figp/sampling.hpp"

#include <cmath>
#include <ostream>

#include "figp/csv.hpp"
#include "figp/random.hpp"

namespace figp {

FunctionalInput EigenSystem::eigenfunction(std::size_t j) const {
    if (j >= truncation()) throw std::out_of_range("eigenfunction index beyond truncation");
    return FunctionalInput(grid, eigenfunctions.col(static_cast<Eigen::Index>(j)), "phi_" + std::to_string(j + 1));
}

std::size_t default_truncation(std::size_t grid_size) { return std::min<std::size_t>(grid_size, 100); }

EigenSystem nystrom_eig(const MaternParams& params, const GridPtr& grid, std::optional<std::size_t> truncation) {
    params.validate();
    const std::size_t nq = grid->size();
    const std::size_t m = truncation.value_or(default_truncation(nq));
    if (m == 0) throw std::invalid_argument("nystrom_eig: truncation must be positive");
    if (m > nq) throw std::invalid_argument("nystrom_eig: truncation exceeds the number of quadrature nodes");

    const Eigen::VectorXd sw = grid->weights().cwiseSqrt();
    const Eigen::MatrixXd a = sw.asDiagonal() * base_kernel_matrix(grid->nodes(), params) * sw.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a);
    if (solver.info() != Eigen::Success) throw Error("nystrom_eig: eigen-decomposition failed");

    // Eigen returns ascending order.
    const Eigen::VectorXd vals = solver.eigenvalues().reverse();
    const Eigen::MatrixXd vecs = solver.eigenvectors().rowwise().reverse();

    std::size_t positive = 0;
    while (positive < nq && vals[static_cast<Eigen::Index>(positive)] > 0.0) ++positive;
    const std::size_t keep = std::min(m, positive);
    if (keep == 0) throw Error("nystrom_eig: base kernel matrix has no positive eigenvalues");

    EigenSystem out;
    out.grid = grid;
    out.params = params;
    out.eigenvalues = vals.head(static_cast<Eigen::Index>(keep));
    out.eigenfunctions = sw.cwiseInverse().asDiagonal() * vecs.leftCols(static_cast<Eigen::Index>(keep));
    for (std::size_t j = keep; j < positive; ++j) out.tail_mass += vals[static_cast<Eigen::Index>(j)];
    return out;
}

PathFamily sample_paths_gram(const std::vector<FunctionalInput>& inputs, const KernelSpec& spec, std::size_t n_paths,
                             std::uint64_t seed) {
    const GramFactorization fac = gram(inputs, spec);
    const auto n = static_cast<Eigen::Index>(inputs.size());
    PathFamily out;
    out.inputs = inputs;
    out.seed = seed;
    out.draws.resize(static_cast<Eigen::Index>(n_paths), n);
    const auto l = fac.chol.triangularView<Eigen::Lower>();
    for (std::size_t p = 0; p < n_paths; ++p) {
        Rng rng = Rng::substream(seed, p);
        const Eigen::VectorXd z = rng.normal_vector(n);
        out.draws.row(static_cast<Eigen::Index>(p)) = (l * z).transpose();
    }
    return out;
}

Eigen::MatrixXd kl_coefficients(const EigenSystem& eig, const std::vector<FunctionalInput>& inputs) {
    const auto n = static_cast<Eigen::Index>(inputs.size());
    Eigen::MatrixXd g(eig.grid->size(), n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& in = inputs[static_cast<std::size_t>(i)];
        if (!in.grid().same_as(*eig.grid)) throw GridMismatch();
        g.col(i) = eig.grid->weights().cwiseProduct(in.values());
    }
    // (phi^T W g) scaled by sqrt(lambda) per eigenpair.
    return (eig.eigenfunctions.transpose() * g).transpose() * eig.eigenvalues.cwiseSqrt().asDiagonal();
}

PathFamily sample_paths_kl(const EigenSystem& eig, const std::vector<FunctionalInput>& inputs, std::size_t n_paths,
                           std::uint64_t seed) {
    if (eig.truncation() == 0) throw std::invalid_argument("sample_paths_kl: empty eigensystem");
    const Eigen::MatrixXd c = kl_coefficients(eig, inputs);
    const auto m = static_cast<Eigen::Index>(eig.truncation());
    PathFamily out;
    out.inputs = inputs;
    out.seed = seed;
    out.draws.resize(static_cast<Eigen::Index>(n_paths), c.rows());
    for (std::size_t p = 0; p < n_paths; ++p) {
        Rng rng = Rng::substream(seed, p);
        const Eigen::VectorXd z = rng.normal_vector(m);
        out.draws.row(static_cast<Eigen::Index>(p)) = (c * z).transpose();
    }
    return out;
}

std::vector<FunctionalInput> sine_family(const GridPtr& grid, const Eigen::VectorXd& alphas) {
    std::vector<FunctionalInput> out;
    out.reserve(static_cast<std::size_t>(alphas.size()));
    for (Eigen::Index i = 0; i < alphas.size(); ++i) {
        const double a = alphas[i];
        out.push_back(sample_function([a](std::span<const double> x) { return std::sin(a * x[0]); }, grid,
                                      "sin(" + format_number(a) + "*x1)"));
    }
    return out;
}

Eigen::VectorXd equispaced(double lo, double hi, std::size_t count) {
    if (count < 2) return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(count), lo);
    Eigen::VectorXd v(static_cast<Eigen::Index>(count));
    for (std::size_t i = 0; i < count; ++i) {
        v[static_cast<Eigen::Index>(i)] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
    }
    return v;
}

Eigen::MatrixXd empirical_covariance(const Eigen::MatrixXd& draws) {
    return draws.transpose() * draws / static_cast<double>(draws.rows());
}

Eigen::MatrixXd covariance_standard_error(const Eigen::MatrixXd& cov, std::size_t n_draws) {
    const Eigen::VectorXd d = cov.diagonal();
    const Eigen::MatrixXd var = d * d.transpose() + cov.cwiseProduct(cov);
    return (var / static_cast<double>(n_draws)).cwiseSqrt();
}

std::size_t count_extrema(const Eigen::VectorXd& path) {
    std::size_t changes = 0;
    int last_sign = 0;
    for (Eigen::Index i = 1; i < path.size(); ++i) {
        const double diff = path[i] - path[i - 1];
        const int s = (diff > 0.0) - (diff < 0.0);
        if (s == 0) continue;
        if (last_sign != 0 && s != last_sign) ++changes;
        last_sign = s;
    }
    return changes;
}

void write_path_csv(std::ostream& out, const PathFamily& family) {
    out << "# " << family.description << (family.description.empty() ? "" : " ") << "seed=" << family.seed << '\n';
    out << "index";
    for (Eigen::Index p = 0; p < family.draws.rows(); ++p) out << ",path_" << (p + 1);
    out << '\n';
    for (Eigen::Index i = 0; i < family.draws.cols(); ++i) {
        const double idx = i < family.index_values.size() ? family.index_values[i] : static_cast<double>(i);
        out << format_csv(idx);
        for (Eigen::Index p = 0; p < family.draws.rows(); ++p) out << ',' << format_csv(family.draws(p, i));
        out << '\n';
    }
}

}  // namespace figp
