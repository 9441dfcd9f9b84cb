#include "figp/designs.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "figp/csv.hpp"
#include "figp/random.hpp"

namespace figp {

namespace {

// Points per axis of the lattice used to evaluate the fill distance.
std::size_t fill_resolution(std::size_t d) { return d == 1 ? 2001 : (d == 2 ? 201 : 21); }

Eigen::MatrixXd lattice(const Domain& domain, std::size_t per_axis) {
    const std::size_t d = domain.dim();
    std::size_t total = 1;
    for (std::size_t k = 0; k < d; ++k) total *= per_axis;
    Eigen::MatrixXd pts(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(d));
    std::vector<std::size_t> idx(d, 0);
    for (std::size_t flat = 0; flat < total; ++flat) {
        for (std::size_t k = 0; k < d; ++k) {
            const double t = per_axis == 1 ? 0.5 : static_cast<double>(idx[k]) / static_cast<double>(per_axis - 1);
            pts(static_cast<Eigen::Index>(flat), static_cast<Eigen::Index>(k)) = domain[k].lo + t * domain[k].length();
        }
        for (std::size_t k = d; k-- > 0;) {
            if (++idx[k] < per_axis) break;
            idx[k] = 0;
        }
    }
    return pts;
}

}  // namespace

double fill_distance(const Eigen::MatrixXd& knots, const Domain& domain) {
    if (knots.rows() == 0) throw std::invalid_argument("fill_distance: empty knot set");
    if (static_cast<std::size_t>(knots.cols()) != domain.dim()) throw std::invalid_argument("fill_distance: dimension mismatch");
    const Eigen::MatrixXd probe = lattice(domain, fill_resolution(domain.dim()));
    double h = 0.0;
    for (Eigen::Index i = 0; i < probe.rows(); ++i) {
        const double nearest = (knots.rowwise() - probe.row(i)).rowwise().squaredNorm().minCoeff();
        h = std::max(h, nearest);
    }
    return std::sqrt(h);
}

KnotSet make_knot_set(Eigen::MatrixXd knots, const Domain& domain) {
    for (Eigen::Index i = 0; i < knots.rows(); ++i) {
        const Eigen::VectorXd row = knots.row(i).transpose();
        if (!domain.contains(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())))) {
            throw std::invalid_argument("knot " + std::to_string(i) + " lies outside the domain");
        }
    }
    KnotSet out;
    out.fill_distance = fill_distance(knots, domain);
    out.knots = std::move(knots);
    return out;
}

KnotSet lattice_knots(const Domain& domain, std::size_t n) {
    const std::size_t d = domain.dim();
    if (n < 2) throw std::invalid_argument("lattice_knots: need at least two knots");
    const auto m = static_cast<std::size_t>(std::llround(std::pow(static_cast<double>(n), 1.0 / static_cast<double>(d))));
    std::size_t total = 1;
    for (std::size_t k = 0; k < d; ++k) total *= m;
    if (total != n) throw std::invalid_argument("lattice_knots: n must be a perfect power of the dimension");
    return make_knot_set(lattice(domain, m), domain);
}

std::vector<FunctionalInput> eigenfunction_design(const EigenSystem& eig, std::size_t n) {
    if (n > eig.truncation()) throw std::invalid_argument("eigenfunction_design: n exceeds the available eigenfunctions");
    std::vector<FunctionalInput> out;
    out.reserve(n);
    for (std::size_t j = 0; j < n; ++j) out.push_back(eig.eigenfunction(j));
    return out;
}

std::vector<FunctionalInput> knot_design(const KnotSet& knots, const MaternParams& params, const GridPtr& grid,
                                         std::vector<std::string>* warnings) {
    if (static_cast<std::size_t>(knots.knots.cols()) != grid->dim()) throw std::invalid_argument("knot_design: dimension mismatch");
    for (Eigen::Index i = 0; i < knots.knots.rows(); ++i) {
        const Eigen::VectorXd row = knots.knots.row(i).transpose();
        if (!grid->domain().contains(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())))) {
            throw std::invalid_argument("knot_design: knot " + std::to_string(i) + " lies outside the domain");
        }
    }
    if (warnings) {
        for (Eigen::Index i = 0; i < knots.knots.rows(); ++i) {
            for (Eigen::Index j = 0; j < i; ++j) {
                if ((knots.knots.row(i) - knots.knots.row(j)).norm() == 0.0) {
                    warnings->push_back("knots " + std::to_string(j) + " and " + std::to_string(i) +
                                        " coincide; the design has duplicate inputs");
                }
            }
        }
    }
    const Eigen::MatrixXd psi = base_kernel_matrix(grid->nodes(), knots.knots, params);
    std::vector<FunctionalInput> out;
    out.reserve(knots.size());
    for (Eigen::Index j = 0; j < psi.cols(); ++j) {
        out.emplace_back(grid, psi.col(j), "knot_" + std::to_string(j + 1));
    }
    return out;
}

double exact_mspe(const std::vector<FunctionalInput>& design, const std::vector<FunctionalInput>& tests,
                  const KernelSpec& spec) {
    if (design.empty() || tests.empty()) throw std::invalid_argument("exact_mspe: empty design or test set");
    const KernelEvaluator eval(spec, design[0].grid_ptr());
    const GramFactorization fac = factorize(eval.matrix(design), spec.nugget, spec.sigma2());
    const Eigen::MatrixXd k = eval.cross(design, tests);
    const Eigen::MatrixXd solved = fac.solve(k);
    double total = 0.0;
    for (std::size_t j = 0; j < tests.size(); ++j) {
        const auto c = static_cast<Eigen::Index>(j);
        total += std::max(0.0, eval.diag(tests[j]) - k.col(c).dot(solved.col(c)));
    }
    return total / static_cast<double>(tests.size());
}

Eigen::MatrixXd base_kernel_root(const MaternParams& params, const GridPtr& grid) {
    params.validate();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(base_kernel_matrix(grid->nodes(), params));
    if (solver.info() != Eigen::Success) throw Error("base_kernel_root: eigen-decomposition failed");
    const Eigen::VectorXd root = solver.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return root.asDiagonal() * solver.eigenvectors().transpose();
}

Eigen::VectorXd projection_errors(const std::vector<FunctionalInput>& design, const std::vector<FunctionalInput>& tests,
                                  const LinearKernel& kernel) {
    if (design.empty() || tests.empty()) throw std::invalid_argument("projection_mspe: empty design or test set");
    const GridPtr grid = design[0].grid_ptr();
    require_same_grid(design);
    require_same_grid(tests);
    if (!tests[0].grid().same_as(*grid)) throw GridMismatch();
    const Eigen::MatrixXd a = base_kernel_root(kernel.base, grid);
    const auto weighted = [&](const FunctionalInput& g) -> Eigen::VectorXd {
        const Eigen::VectorXd v = kernel.premap ? apply_pointwise_map(g, kernel.premap->fn).values() : g.values();
        return a * grid->weights().cwiseProduct(v);
    };
    Eigen::MatrixXd f(a.rows(), static_cast<Eigen::Index>(design.size()));
    for (std::size_t j = 0; j < design.size(); ++j) f.col(static_cast<Eigen::Index>(j)) = weighted(design[j]);
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(f);
    const Eigen::MatrixXd q = Eigen::MatrixXd(qr.householderQ()).leftCols(qr.rank());
    Eigen::VectorXd out(static_cast<Eigen::Index>(tests.size()));
    for (std::size_t i = 0; i < tests.size(); ++i) {
        const Eigen::VectorXd v = weighted(tests[i]);
        out[static_cast<Eigen::Index>(i)] = (v - q * (q.transpose() * v)).squaredNorm();
    }
    return out;
}

double projection_mspe(const std::vector<FunctionalInput>& design, const std::vector<FunctionalInput>& tests,
                       const LinearKernel& kernel) {
    return projection_errors(design, tests, kernel).mean();
}

std::vector<FunctionalInput> prior_draws(const MaternParams& params, const GridPtr& grid, std::size_t count,
                                         std::uint64_t seed) {
    const Eigen::MatrixXd a = base_kernel_root(params, grid);
    std::vector<FunctionalInput> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Rng rng = Rng::substream(seed, i);
        out.emplace_back(grid, a.transpose() * rng.normal_vector(a.rows()), "draw_" + std::to_string(i + 1));
    }
    return out;
}

LogLogSlope fit_loglog_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_loglog_slope: need >= 2 paired points");
    const auto n = static_cast<Eigen::Index>(x.size());
    Eigen::MatrixXd a(n, 2);
    Eigen::VectorXd b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        if (!(x[k] > 0.0) || !(y[k] > 0.0)) throw std::invalid_argument("fit_loglog_slope: values must be positive");
        a(i, 0) = 1.0;
        a(i, 1) = std::log(x[k]);
        b[i] = std::log(y[k]);
    }
    const Eigen::VectorXd coef = a.colPivHouseholderQr().solve(b);
    LogLogSlope out;
    out.intercept = coef[0];
    out.slope = coef[1];
    if (n > 2) {
        const double rss = (a * coef - b).squaredNorm();
        const double s2 = rss / static_cast<double>(n - 2);
        const double sxx = (a.col(1).array() - a.col(1).mean()).square().sum();
        out.slope_se = std::sqrt(s2 / sxx);
    }
    return out;
}

DecayCurve empirical_mspe(const DesignBuilder& builder, const std::vector<std::size_t>& sizes,
                          const std::vector<FunctionalInput>& tests, const KernelSpec& spec, std::size_t replicates,
                          std::uint64_t seed, double theoretical_rate) {
    if (sizes.empty()) throw std::invalid_argument("empirical_mspe: no design sizes");
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        if (sizes[i] < 2) throw std::invalid_argument("empirical_mspe: design sizes must be >= 2");
        if (i > 0 && sizes[i] <= sizes[i - 1]) throw std::invalid_argument("empirical_mspe: sizes must increase");
    }
    if (tests.empty()) throw std::invalid_argument("empirical_mspe: no test functions");

    DecayCurve curve;
    curve.sizes = sizes;
    curve.replicates = replicates;
    curve.theoretical_rate = theoretical_rate;
    for (std::size_t s = 0; s < sizes.size(); ++s) {
        const std::size_t n = sizes[s];
        try {
            const std::vector<FunctionalInput> design = builder(n);
            const double with_nugget = exact_mspe(design, tests, spec);
            const auto* linear = std::get_if<LinearKernel>(&spec.kernel);
            curve.mspe.push_back(linear ? projection_mspe(design, tests, *linear) : with_nugget);
            curve.nugget_mspe.push_back(with_nugget);
            if (replicates == 0) continue;

            std::vector<FunctionalInput> joint = design;
            joint.insert(joint.end(), tests.begin(), tests.end());
            const KernelEvaluator eval(spec, design[0].grid_ptr());
            const GramFactorization joint_fac = factorize(eval.matrix(joint), spec.nugget, spec.sigma2());
            const GramFactorization design_fac = factorize(eval.matrix(design), spec.nugget, spec.sigma2());
            const Eigen::MatrixXd k = eval.cross(design, tests);
            const auto nd = static_cast<Eigen::Index>(design.size());
            const auto nt = static_cast<Eigen::Index>(tests.size());
            const auto l = joint_fac.chol.triangularView<Eigen::Lower>();
            std::vector<double> per_rep;
            per_rep.reserve(replicates);
            for (std::size_t r = 0; r < replicates; ++r) {
                Rng rng = Rng::substream(seed, s * 1000003ULL + r);
                const Eigen::VectorXd f = l * rng.normal_vector(nd + nt);
                const Eigen::VectorXd pred = k.transpose() * design_fac.solve(Eigen::VectorXd(f.head(nd)));
                per_rep.push_back((f.tail(nt) - pred).squaredNorm() / static_cast<double>(nt));
            }
            double mean = 0.0;
            for (double v : per_rep) mean += v;
            mean /= static_cast<double>(replicates);
            double var = 0.0;
            for (double v : per_rep) var += (v - mean) * (v - mean);
            var /= static_cast<double>(std::max<std::size_t>(replicates - 1, 1));
            curve.mc_mspe.push_back(mean);
            curve.mc_se.push_back(std::sqrt(var / static_cast<double>(replicates)));
        } catch (const Error& e) {
            throw Error("MSPE experiment failed at design size " + std::to_string(n) + ": " + e.what());
        }
    }
    std::vector<double> xs(sizes.begin(), sizes.end());
    if (sizes.size() >= 2) {
        const LogLogSlope fitres = fit_loglog_slope(xs, curve.mspe);
        curve.slope = fitres.slope;
        curve.slope_se = fitres.slope_se;
    }
    return curve;
}

void write_decay_csv(std::ostream& out, const DecayCurve& curve) {
    out << "n,mspe,se\n";
    for (std::size_t i = 0; i < curve.sizes.size(); ++i) {
        out << curve.sizes[i] << ',' << format_csv(curve.mspe[i]) << ','
            << format_csv(i < curve.mc_se.size() ? curve.mc_se[i] : 0.0) << '\n';
    }
    out << "# slope=" << format_csv(curve.slope) << " slope_se=" << format_csv(curve.slope_se)
        << " theoretical_rate=" << format_csv(curve.theoretical_rate) << '\n';
}

}  // namespace figp
