#include <doctest.h>

#include <cmath>
#include <numbers>

#include "figp/csv.hpp"
#include "figp/gp.hpp"
#include "figp/optimize.hpp"
#include "figp/reproduce.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace figp;
using figp::test::fn;
using figp::test::rel_diff;
using figp::test::unit_square;

namespace {

MaternParams matern(double nu, std::vector<double> scales, double sigma2 = 1.0) {
    MaternParams p;
    p.nu = nu;
    p.sigma2 = sigma2;
    p.scales = std::move(scales);
    return p;
}

struct Table1Data {
    GridPtr grid = unit_square();
    std::vector<FunctionalInput> inputs = table1_inputs(grid);
    Eigen::MatrixXd outputs = table1_outputs(inputs);
};

const Table1Data& table1() {
    static const Table1Data data;
    return data;
}

const GPModel& linear_f1() {
    static const GPModel m = fit(table1().inputs, table1().outputs.col(0), KernelFamily::Linear);
    return m;
}

}  // namespace

TEST_CASE("profiled likelihood on a 2x2 correlation matches the dense formula") {
    Eigen::MatrixXd r(2, 2);
    r << 1.0, 0.35, 0.35, 1.0;
    Eigen::VectorXd y(2);
    y << 0.7, -1.9;
    auto fac = factorize(r, 0.0, 1.0);
    auto terms = profiled_likelihood(fac, y);

    const Eigen::MatrixXd inv = r.inverse();
    const Eigen::Vector2d ones = Eigen::Vector2d::Ones();
    const double mu = ones.dot(inv * y) / ones.dot(inv * ones);
    const Eigen::Vector2d res = y.array() - mu;
    const double s2 = res.dot(inv * res) / 2.0;
    const Eigen::MatrixXd k = s2 * r;
    const double direct = -0.5 * res.dot(k.inverse() * res) - 0.5 * std::log(k.determinant()) - std::log(2.0 * std::numbers::pi);
    CHECK(std::abs(terms.mu - mu) < 1e-12);
    CHECK(rel_diff(terms.sigma2, s2) < 1e-12);
    CHECK(std::abs(terms.log_likelihood - direct) < 1e-10);

    auto zero = profiled_likelihood(fac, y, MeanMode::Zero);
    CHECK(zero.mu == 0.0);
    CHECK(rel_diff(zero.sigma2, y.dot(inv * y) / 2.0) < 1e-12);
}

TEST_CASE("profiled likelihood absorbs shifts and scales of the response") {
    const auto& t = table1();
    std::vector<FunctionalInput> five(t.inputs.begin(), t.inputs.begin() + 5);
    const Eigen::VectorXd y = t.outputs.col(2).head(5);
    auto spec = KernelSpec::nonlinear(matern(2.5, {}), 0.8);
    const double base = log_marginal_likelihood(spec, five, y);
    const Eigen::VectorXd shifted = y.array() + 3.25;
    CHECK(std::abs(log_marginal_likelihood(spec, five, shifted) - base) < 1e-10);

    auto a = fit(five, y, KernelFamily::Linear);
    auto b = fit(five, shifted, KernelFamily::Linear);
    CHECK(b.mu() == doctest::Approx(a.mu() + 3.25).epsilon(1e-8));

    const double s = 7.0;
    auto c = fit(five, Eigen::VectorXd(s * y), KernelFamily::Linear);
    CHECK(rel_diff(c.sigma2(), s * s * a.sigma2()) < 1e-6);
    for (std::size_t k = 0; k < 2; ++k) {
        CHECK(rel_diff(c.spec().matern().scales[k], a.spec().matern().scales[k]) < 1e-6);
    }
}

TEST_CASE("fit is deterministic for a fixed seed") {
    const auto& t = table1();
    auto a = fit(t.inputs, t.outputs.col(1), KernelFamily::Nonlinear);
    auto b = fit(t.inputs, t.outputs.col(1), KernelFamily::Nonlinear);
    CHECK(a.mu() == b.mu());
    CHECK(a.sigma2() == b.sigma2());
    CHECK(std::get<NonlinearKernel>(a.spec().kernel).gamma == std::get<NonlinearKernel>(b.spec().kernel).gamma);
}

TEST_CASE("fit rejects bad data") {
    const auto& t = table1();
    std::vector<FunctionalInput> one{t.inputs[0]};
    CHECK_THROWS(fit(one, Eigen::VectorXd::Ones(1), KernelFamily::Linear));
    Eigen::VectorXd bad = t.outputs.col(0);
    bad[2] = std::nan("");
    CHECK_THROWS(fit(t.inputs, bad, KernelFamily::Linear));
    CHECK_THROWS(fit(t.inputs, Eigen::VectorXd::Ones(3), KernelFamily::Linear));
    FitConfig cfg;
    cfg.multistarts = 0;
    CHECK_THROWS(fit(t.inputs, t.outputs.col(0), KernelFamily::Linear, cfg));
}

TEST_CASE("constant response") {
    const auto& t = table1();
    auto m = fit(t.inputs, Eigen::VectorXd::Constant(8, 2.5), KernelFamily::Nonlinear);
    CHECK(m.mu() == doctest::Approx(2.5).epsilon(1e-10));
    CHECK(m.sigma2() < 1e-12);
    auto p = predict(m, fn("1 + sin(x1)", t.grid));
    CHECK(p.mean == doctest::Approx(2.5).epsilon(1e-8));
}

TEST_CASE("linear kernel on integral outputs") {
    const auto& m = linear_f1();
    CHECK(loocv_error(m) < 1e-6);
    auto g = fn("1 + sin(0.3*x1 + 0.4*x2)", table1().grid);
    const double truth = integrate(g);
    CHECK(std::abs(predict(m, g).mean - truth) <= 1e-3 * std::abs(truth));
}

TEST_CASE("interpolation at training inputs") {
    const auto& t = table1();
    auto check_interpolates = [&](const GPModel& m) {
        const double range = m.y().maxCoeff() - m.y().minCoeff();
        for (std::size_t i = 0; i < t.inputs.size(); ++i) {
            auto p = predict(m, t.inputs[i]);
            CHECK(std::abs(p.mean - m.y()[static_cast<Eigen::Index>(i)]) <= 1e-6 * range);
            CHECK(p.variance <= m.factorization().nugget * (1.0 + 1e-6));
        }
    };
    for (Eigen::Index b = 0; b < 3; ++b) {
        check_interpolates(GPModel::condition(KernelSpec::nonlinear(matern(2.5, {}), 1.0), t.inputs, t.outputs.col(b)));
    }
    check_interpolates(GPModel::condition(KernelSpec::linear(matern(2.5, {1.0, 1.0})), t.inputs, t.outputs.col(0)));
}

TEST_CASE("fitted models reproduce training outputs up to the nugget") {
    // mean_i - y_i = -nugget * alpha_i for a nugget-regularized interpolant
    const auto& t = table1();
    for (Eigen::Index b = 0; b < 3; ++b) {
        for (auto family : {KernelFamily::Linear, KernelFamily::Nonlinear}) {
            auto m = fit(t.inputs, t.outputs.col(b), family);
            const double nugget = m.factorization().nugget;
            for (std::size_t i = 0; i < t.inputs.size(); ++i) {
                const auto k = static_cast<Eigen::Index>(i);
                auto p = predict(m, t.inputs[i]);
                const double expected = -nugget * m.alpha()[k];
                CHECK(std::abs((p.mean - m.y()[k]) - expected) <= 1e-8 * std::max(1.0, std::abs(m.y()[k])));
                CHECK(p.variance >= 0.0);
                CHECK(p.variance <= 2.0 * nugget);
            }
            const Eigen::VectorXd back = m.factorization().gram * m.alpha();
            CHECK((back - (m.y().array() - m.mu()).matrix()).norm() <= 1e-8 * m.y().norm());
        }
    }
}

TEST_CASE("batch prediction equals single prediction") {
    const auto& m = linear_f1();
    std::vector<FunctionalInput> gs{fn("x1*x2", table1().grid), fn("exp(-x1)", table1().grid)};
    auto batch = predict(m, gs);
    for (std::size_t i = 0; i < gs.size(); ++i) {
        auto single = predict(m, gs[i]);
        CHECK(batch[i].mean == doctest::Approx(single.mean).epsilon(1e-12));
        CHECK(batch[i].variance == doctest::Approx(single.variance).epsilon(1e-8).scale(m.sigma2()));
    }
    CHECK_THROWS_AS(predict(m, fn("x1", unit_square(10))), GridMismatch);
}

TEST_CASE("zero-mean linear posterior mean is linear in the input") {
    const auto& t = table1();
    auto spec = KernelSpec::linear(matern(2.5, {1.3, 0.6}, 2.0));
    auto m = GPModel::condition(spec, t.inputs, t.outputs.col(1), MeanMode::Zero);
    Rng rng(31);
    for (int i = 0; i < 20; ++i) {
        auto g1 = fn("sin(" + format_number(rng.uniform(0, 2)) + "*x1)", t.grid);
        auto g2 = fn("exp(" + format_number(rng.uniform(-1, 1)) + "*x2)", t.grid);
        const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
        const double p1 = predict(m, g1).mean, p2 = predict(m, g2).mean;
        const double combo = predict(m, linear_combination(a, g1, b, g2)).mean;
        CHECK(std::abs(combo - (a * p1 + b * p2)) <= 1e-8 * (std::abs(a * p1) + std::abs(b * p2)));
    }
}

TEST_CASE("posterior variance does not grow with more data") {
    const auto& t = table1();
    auto spec = KernelSpec::nonlinear(matern(2.5, {}), 0.7);
    Rng rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        auto g = fn("1 + " + format_number(rng.uniform()) + "*x1*x2", t.grid);
        double prev = std::numeric_limits<double>::infinity();
        for (std::size_t n = 2; n <= t.inputs.size(); ++n) {
            std::vector<FunctionalInput> sub(t.inputs.begin(), t.inputs.begin() + static_cast<long>(n));
            auto m = GPModel::condition(spec, sub, t.outputs.col(0).head(static_cast<Eigen::Index>(n)));
            const double v = predict(m, g).variance;
            CHECK(v <= prev + 1e-8);
            prev = v;
        }
    }
}

TEST_CASE("closed-form LOOCV on a symmetric 2x2 case") {
    auto grid = unit_square();
    std::vector<FunctionalInput> two{fn("0", grid), fn("0.6", grid)};
    auto spec = KernelSpec::nonlinear(matern(2.5, {}), 1.0);
    spec.nugget = 0.0;
    Eigen::VectorXd y(2);
    y << 1.0, -1.0;
    auto m = GPModel::condition(spec, two, y, MeanMode::Zero);
    const double rho = matern_psi(0.6, 2.5);
    auto r = loocv_residuals(m);
    CHECK(r[0] == doctest::Approx(1.0 + rho).epsilon(1e-12));
    CHECK(r[1] == doctest::Approx(-(1.0 + rho)).epsilon(1e-12));
    CHECK(loocv_error(m) == doctest::Approx((1.0 + rho) * (1.0 + rho)).epsilon(1e-12));
}

TEST_CASE("closed-form LOOCV equals fold-by-fold predictions") {
    const auto& t = table1();
    for (Eigen::Index b = 0; b < 3; ++b) {
        for (auto family : {KernelFamily::Linear, KernelFamily::Nonlinear}) {
            auto m = fit(t.inputs, t.outputs.col(b), family);
            CAPTURE(b);
            CAPTURE(to_string(family));
            CHECK(test::loo_identity_error(m) < 1e-8);
            CHECK(loocv_error(m) > 0.0);
        }
    }
}

TEST_CASE("kernel selection") {
    const auto& t = table1();
    const KernelFamily both[] = {KernelFamily::Linear, KernelFamily::Nonlinear};
    auto f1 = select_kernel(t.inputs, t.outputs.col(0), both);
    CHECK(f1.best.family() == KernelFamily::Linear);
    REQUIRE(f1.report.size() == 2);
    CHECK(f1.report[0].ok);
    CHECK(f1.report[0].loocv <= f1.report[1].loocv);

    auto f3 = select_kernel(t.inputs, t.outputs.col(2), both);
    CHECK(f3.best.family() == KernelFamily::Nonlinear);

    // rescaling the response keeps the winner
    auto scaled = select_kernel(t.inputs, Eigen::VectorXd(10.0 * t.outputs.col(2)), both);
    CHECK(scaled.best.family() == f3.best.family());
    CHECK(scaled.report[1].loocv == doctest::Approx(100.0 * f3.report[1].loocv).epsilon(1e-3));
}

TEST_CASE("a failing family is reported, not fatal") {
    auto grid = unit_square();
    // x1 and 2*x1 are linearly dependent: singular for the linear kernel without a nugget
    std::vector<FunctionalInput> inputs{fn("x1", grid), fn("2*x1", grid), fn("x2", grid)};
    Eigen::VectorXd y(3);
    y << 1.0, 2.0, 0.5;
    const KernelFamily both[] = {KernelFamily::Linear, KernelFamily::Nonlinear};
    FitConfig cfg;
    cfg.relative_nugget = 0.0;
    auto sel = select_kernel(inputs, y, both, cfg);
    CHECK(sel.best.family() == KernelFamily::Nonlinear);
    CHECK_FALSE(sel.report[0].ok);
    CHECK_FALSE(sel.report[0].message.empty());
    CHECK_FALSE(sel.warnings.empty());

    std::vector<FunctionalInput> dup{fn("x1", grid), fn("x1", grid), fn("x2", grid)};
    CHECK_THROWS(select_kernel(dup, y, both, cfg));
}

TEST_CASE("optimizer primitives") {
    Box box{{-2.0, -2.0}, {2.0, 2.0}};
    auto rosen = [](std::span<const double> x) {
        return 100.0 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1.0 - x[0], 2);
    };
    auto r = nelder_mead(rosen, {-1.2, 1.0}, box, 2000);
    CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(r.x[1] == doctest::Approx(1.0).epsilon(1e-4));

    // minimum outside the box lands on the boundary
    auto shifted = [](std::span<const double> x) { return std::pow(x[0] - 5.0, 2) + x[1] * x[1]; };
    auto b = nelder_mead(shifted, {0.0, 0.5}, box, 2000);
    CHECK(b.x[0] == doctest::Approx(2.0).epsilon(1e-6));

    Rng rng(1);
    auto pts = latin_hypercube(box, 10, rng);
    REQUIRE(pts.size() == 10);
    for (std::size_t axis = 0; axis < 2; ++axis) {
        std::vector<int> strata(10, 0);
        for (const auto& p : pts) strata[static_cast<std::size_t>((p[axis] + 2.0) / 0.4)]++;
        for (int c : strata) CHECK(c == 1);
    }
}
