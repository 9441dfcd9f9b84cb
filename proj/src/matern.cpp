#include "figp/matern.hpp"

#include <cmath>
#include <stdexcept>

#include "figp/domain.hpp"

namespace figp {

std::string to_string(PsiForm form) { return form == PsiForm::Standard ? "standard" : "exp5"; }

PsiForm psi_form_from_string(const std::string& name) {
    if (name == "standard") return PsiForm::Standard;
    if (name == "exp5") return PsiForm::Exp5;
    throw std::invalid_argument("unknown Matérn form: " + name);
}

void MaternParams::validate() const {
    if (!(nu > 0.0) || !std::isfinite(nu)) throw std::invalid_argument("Matérn smoothness nu must be positive");
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw std::invalid_argument("Matérn variance sigma2 must be positive");
    for (double s : scales) {
        if (!(s > 0.0) || !std::isfinite(s)) throw std::invalid_argument("Matérn scale entries must be positive");
    }
    if (form == PsiForm::Exp5 && nu != 2.5) throw std::invalid_argument("exp5 form is only defined for nu = 5/2");
}

double matern_psi(double r, double nu, double sigma2) {
    if (!(r >= 0.0)) throw std::invalid_argument("matern_psi: distance must be non-negative");
    if (!(nu > 0.0)) throw std::invalid_argument("matern_psi: nu must be positive");
    if (!(sigma2 > 0.0)) throw std::invalid_argument("matern_psi: sigma2 must be positive");
    if (r == 0.0) return sigma2;
    if (nu == 0.5) return sigma2 * std::exp(-std::sqrt(2.0) * r);
    if (nu == 1.5) {
        const double z = std::sqrt(6.0) * r;
        return sigma2 * (1.0 + z) * std::exp(-z);
    }
    if (nu == 2.5) {
        const double z = std::sqrt(10.0) * r;
        return sigma2 * (1.0 + z + z * z / 3.0) * std::exp(-z);
    }
    const double z = 2.0 * std::sqrt(nu) * r;
    if (z > 700.0) return 0.0;
    // log-space to keep z^nu / Gamma(nu) finite for large nu.
    const double log_scale = nu * std::log(z) - std::lgamma(nu) - (nu - 1.0) * std::log(2.0);
    return sigma2 * std::exp(log_scale) * std::cyl_bessel_k(nu, z);
}

double matern_psi(double r, const MaternParams& p) {
    if (p.form == PsiForm::Exp5) return p.sigma2 * matern52_exp5(r);
    return matern_psi(r, p.nu, p.sigma2);
}

double matern52_exp5(double r) {
    if (!(r >= 0.0)) throw std::invalid_argument("matern52_exp5: distance must be non-negative");
    return (1.0 + std::sqrt(5.0) * r + (5.0 / 3.0) * r * r) * std::exp(-5.0 * r);
}

namespace {

double scale_at(const MaternParams& p, std::size_t k) { return p.scales.empty() ? 1.0 : p.scales[k]; }

void check_scales(const MaternParams& p, std::size_t d) {
    if (!p.scales.empty() && p.scales.size() != d) {
        throw std::invalid_argument("Matérn scale vector length does not match the point dimension");
    }
}

}  // namespace

double base_kernel(std::span<const double> x, std::span<const double> xp, const MaternParams& params) {
    if (x.size() != xp.size()) throw std::invalid_argument("base_kernel: point dimensions differ");
    check_scales(params, x.size());
    double r2 = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double t = scale_at(params, k) * (x[k] - xp[k]);
        r2 += t * t;
    }
    return matern_psi(std::sqrt(r2), params);
}

Eigen::MatrixXd base_kernel_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const MaternParams& params) {
    if (a.cols() != b.cols()) throw std::invalid_argument("base_kernel_matrix: point dimensions differ");
    const auto d = static_cast<std::size_t>(a.cols());
    check_scales(params, d);
    Eigen::MatrixXd out(a.rows(), b.rows());
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
        for (Eigen::Index i = 0; i < a.rows(); ++i) {
            double r2 = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const auto kk = static_cast<Eigen::Index>(k);
                const double t = scale_at(params, k) * (a(i, kk) - b(j, kk));
                r2 += t * t;
            }
            out(i, j) = matern_psi(std::sqrt(r2), params);
        }
    }
    return out;
}

namespace {

bool closed_form(const MaternParams& p) {
    return p.form == PsiForm::Exp5 || p.nu == 0.5 || p.nu == 1.5 || p.nu == 2.5;
}

// psi applied to a column of distances, closed forms only
Eigen::ArrayXd psi_column(const Eigen::ArrayXd& r, const MaternParams& p) {
    if (p.form == PsiForm::Exp5) {
        return p.sigma2 * (1.0 + std::sqrt(5.0) * r + (5.0 / 3.0) * r.square()) * (-5.0 * r).exp();
    }
    if (p.nu == 0.5) return p.sigma2 * (-std::sqrt(2.0) * r).exp();
    if (p.nu == 1.5) {
        const Eigen::ArrayXd z = std::sqrt(6.0) * r;
        return p.sigma2 * (1.0 + z) * (-z).exp();
    }
    const Eigen::ArrayXd z = std::sqrt(10.0) * r;
    return p.sigma2 * (1.0 + z + z.square() / 3.0) * (-z).exp();
}

}  // namespace

Eigen::MatrixXd base_kernel_matrix(const Eigen::MatrixXd& nodes, const MaternParams& params) {
    const auto d = static_cast<std::size_t>(nodes.cols());
    check_scales(params, d);
    const Eigen::Index n = nodes.rows();
    Eigen::MatrixXd out(n, n);
    if (closed_form(params)) {
        params.validate();
        Eigen::MatrixXd scaled = nodes;
        for (std::size_t k = 0; k < d; ++k) scaled.col(static_cast<Eigen::Index>(k)) *= scale_at(params, k);
        Eigen::ArrayXd r2(n);
        for (Eigen::Index j = 0; j < n; ++j) {
            const Eigen::Index m = n - j;
            r2.head(m).setZero();
            for (Eigen::Index k = 0; k < scaled.cols(); ++k) {
                r2.head(m) += (scaled.col(k).tail(m).array() - scaled(j, k)).square();
            }
            out.col(j).tail(m) = psi_column(r2.head(m).sqrt(), params).matrix();
        }
        out.triangularView<Eigen::StrictlyUpper>() = out.transpose();
        return out;
    }
    for (Eigen::Index j = 0; j < n; ++j) {
        out(j, j) = params.sigma2;
        for (Eigen::Index i = 0; i < j; ++i) {
            double r2 = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const auto kk = static_cast<Eigen::Index>(k);
                const double t = scale_at(params, k) * (nodes(i, kk) - nodes(j, kk));
                r2 += t * t;
            }
            const double v = matern_psi(std::sqrt(r2), params);
            out(i, j) = v;
            out(j, i) = v;
        }
    }
    return out;
}

}  // namespace figp
