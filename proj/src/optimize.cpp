#include "figp/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace figp {

std::vector<double> Box::clamp(std::vector<double> x) const {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], lo[i], hi[i]);
    return x;
}

OptimResult nelder_mead(const Objective& f, std::vector<double> x0, const Box& box, int max_iters, double xtol,
                        double ftol) {
    const std::size_t n = x0.size();
    if (n == 0 || box.dim() != n) throw std::invalid_argument("nelder_mead: dimension mismatch");

    OptimResult res;
    auto eval = [&](const std::vector<double>& x) {
        ++res.evaluations;
        const double v = f(x);
        return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    };

    std::vector<std::vector<double>> simplex(n + 1, box.clamp(std::move(x0)));
    for (std::size_t i = 0; i < n; ++i) {
        const double step = 0.1 * (box.hi[i] - box.lo[i]);
        auto& v = simplex[i + 1];
        v[i] = (v[i] + step <= box.hi[i]) ? v[i] + step : v[i] - step;
    }
    std::vector<double> fv(n + 1);
    for (std::size_t i = 0; i <= n; ++i) fv[i] = eval(simplex[i]);

    std::vector<std::size_t> order(n + 1);
    auto sort_simplex = [&]() {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
        std::vector<std::vector<double>> s2;
        std::vector<double> f2;
        for (auto i : order) {
            s2.push_back(simplex[i]);
            f2.push_back(fv[i]);
        }
        simplex = std::move(s2);
        fv = std::move(f2);
    };

    auto affine = [&](const std::vector<double>& a, const std::vector<double>& b, double t) {
        std::vector<double> out(n);
        for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + t * (b[i] - a[i]);
        return box.clamp(std::move(out));
    };

    for (int iter = 0; iter < max_iters; ++iter) {
        sort_simplex();
        double size = 0.0;
        for (std::size_t k = 1; k <= n; ++k) {
            for (std::size_t i = 0; i < n; ++i) size = std::max(size, std::abs(simplex[k][i] - simplex[0][i]));
        }
        const double spread = std::abs(fv[n] - fv[0]);
        if (size < xtol || (std::isfinite(fv[n]) && spread <= ftol * (1.0 + std::abs(fv[0])) && size < 1e3 * xtol)) {
            res.converged = true;
            break;
        }

        std::vector<double> centroid(n, 0.0);
        for (std::size_t k = 0; k < n; ++k) {
            for (std::size_t i = 0; i < n; ++i) centroid[i] += simplex[k][i] / static_cast<double>(n);
        }
        const auto& worst = simplex[n];
        const auto reflected = affine(centroid, worst, -1.0);
        const double fr = eval(reflected);
        if (fr < fv[0]) {
            const auto expanded = affine(centroid, worst, -2.0);
            const double fe = eval(expanded);
            if (fe < fr) {
                simplex[n] = expanded;
                fv[n] = fe;
            } else {
                simplex[n] = reflected;
                fv[n] = fr;
            }
            continue;
        }
        if (fr < fv[n - 1]) {
            simplex[n] = reflected;
            fv[n] = fr;
            continue;
        }
        const bool outside = fr < fv[n];
        const auto contracted = outside ? affine(centroid, reflected, 0.5) : affine(centroid, worst, 0.5);
        const double fc = eval(contracted);
        if (fc < (outside ? fr : fv[n])) {
            simplex[n] = contracted;
            fv[n] = fc;
            continue;
        }
        for (std::size_t k = 1; k <= n; ++k) {
            simplex[k] = affine(simplex[0], simplex[k], 0.5);
            fv[k] = eval(simplex[k]);
        }
    }
    sort_simplex();
    res.x = simplex[0];
    res.value = fv[0];
    return res;
}

std::vector<std::vector<double>> latin_hypercube(const Box& box, int n, Rng& rng) {
    if (n < 1) throw std::invalid_argument("latin_hypercube: need at least one point");
    const std::size_t d = box.dim();
    std::vector<std::vector<double>> pts(static_cast<std::size_t>(n), std::vector<double>(d));
    std::vector<int> perm(static_cast<std::size_t>(n));
    for (std::size_t k = 0; k < d; ++k) {
        std::iota(perm.begin(), perm.end(), 0);
        // Fisher-Yates with the documented uniform stream.
        for (int i = n - 1; i > 0; --i) {
            const int j = static_cast<int>(rng.uniform() * (i + 1));
            std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(std::min(j, i))]);
        }
        for (int i = 0; i < n; ++i) {
            const double u = (perm[static_cast<std::size_t>(i)] + rng.uniform()) / n;
            pts[static_cast<std::size_t>(i)][k] = box.lo[k] + u * (box.hi[k] - box.lo[k]);
        }
    }
    return pts;
}

}  // namespace figp
