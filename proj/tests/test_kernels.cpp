#include <doctest.h>

#include <cmath>
#include <numbers>

#include "figp/kernels.hpp"
#include "figp/matern.hpp"
#include "figp/random.hpp"
#include "figp/reproduce.hpp"
#include "support.hpp"

using namespace figp;
using figp::test::fn;
using figp::test::rel_diff;
using figp::test::unit_square;

namespace {

// K_nu(z) = int_0^inf exp(-z cosh t) cosh(nu t) dt, trapezoid on a truncated range.
double bessel_k_integral(double nu, double z) {
    const double upper = std::acosh(std::max(1.0, 60.0 / z)) + 2.0;
    const int n = 20000;
    const double h = upper / n;
    double sum = 0.5 * std::exp(-z);
    for (int i = 1; i <= n; ++i) {
        const double t = i * h;
        const double f = std::exp(-z * std::cosh(t)) * std::cosh(nu * t);
        sum += (i == n ? 0.5 : 1.0) * f;
    }
    return sum * h;
}

double matern_oracle(double r, double nu, double sigma2) {
    const double z = 2.0 * std::sqrt(nu) * r;
    return sigma2 * std::pow(z, nu) * bessel_k_integral(nu, z) / (std::tgamma(nu) * std::pow(2.0, nu - 1.0));
}

MaternParams matern(double nu, std::vector<double> scales, double sigma2 = 1.0) {
    MaternParams p;
    p.nu = nu;
    p.sigma2 = sigma2;
    p.scales = std::move(scales);
    return p;
}

FunctionalInput random_poly(Rng& rng, const GridPtr& grid) {
    const double c0 = rng.uniform(-1, 1), c1 = rng.uniform(-1, 1), c2 = rng.uniform(-1, 1), c3 = rng.uniform(-1, 1),
                 c4 = rng.uniform(-1, 1), c5 = rng.uniform(-1, 1);
    return sample_function(
        [=](std::span<const double> x) {
            return c0 + c1 * x[0] + c2 * x[1] + c3 * x[0] * x[1] + c4 * x[0] * x[0] + c5 * x[1] * x[1];
        },
        grid);
}

}  // namespace

TEST_CASE("matern closed forms") {
    for (double nu : {0.5, 1.5, 2.5, 0.8, 3.7}) CHECK(matern_psi(0.0, nu) == 1.0);
    CHECK(std::abs(matern_psi(1.0, 0.5) - std::exp(-std::sqrt(2.0))) < 1e-15);
    CHECK(matern_psi(1.0, 0.5) == doctest::Approx(0.24312).epsilon(1e-4));
    const double s10 = std::sqrt(10.0);
    CHECK(std::abs(matern_psi(1.0, 2.5) - (1.0 + s10 + 10.0 / 3.0) * std::exp(-s10)) < 1e-15);
    CHECK(matern_psi(1.0, 2.5) == doctest::Approx(0.31728).epsilon(1e-4));
    CHECK(matern_psi(1.0, 2.5, 3.0) == doctest::Approx(3.0 * matern_psi(1.0, 2.5)));
    CHECK(matern52_exp5(0.0) == 1.0);
    CHECK(matern52_exp5(1.0) == doctest::Approx(0.03305).epsilon(1e-3));
    CHECK(matern52_exp5(40.0) < 1e-80);

    MaternParams exp5 = matern(2.5, {1.0});
    exp5.form = PsiForm::Exp5;
    CHECK(matern_psi(1.0, exp5) == matern52_exp5(1.0));
    CHECK(psi_form_from_string(to_string(PsiForm::Exp5)) == PsiForm::Exp5);
}

TEST_CASE("matern agrees with an integral representation of the Bessel function") {
    for (double nu : {0.5, 1.5, 2.5, 0.75, 1.0, 2.0, 3.3}) {
        for (double r : {0.05, 0.3, 1.0, 2.2}) {
            CAPTURE(nu);
            CAPTURE(r);
            CHECK(rel_diff(matern_psi(r, nu, 2.0), matern_oracle(r, nu, 2.0)) < 1e-8);
        }
    }
}

TEST_CASE("matern is monotone in r") {
    for (double nu : {0.5, 1.5, 2.5}) {
        double prev = matern_psi(0.0, nu);
        for (int i = 1; i <= 1000; ++i) {
            const double cur = matern_psi(i * 0.01, nu);
            CHECK(cur <= prev);
            prev = cur;
        }
    }
}

TEST_CASE("matern rejects invalid arguments") {
    CHECK_THROWS(matern_psi(-0.1, 2.5));
    CHECK_THROWS(matern_psi(0.5, 0.0));
    CHECK_THROWS(matern_psi(0.5, 2.5, -1.0));
    CHECK_THROWS(matern52_exp5(-1.0));
}

TEST_CASE("base kernel") {
    auto p = matern(2.5, {1.0, 1.0});
    const double a[] = {0.0, 0.0}, b[] = {1.0, 0.0};
    CHECK(base_kernel(a, a, p) == 1.0);
    CHECK(base_kernel(a, b, p) == doctest::Approx(0.31728).epsilon(1e-4));
    Rng rng(3);
    for (int i = 0; i < 20; ++i) {
        const double x[] = {rng.uniform(), rng.uniform()}, y[] = {rng.uniform(), rng.uniform()};
        CHECK(base_kernel(x, y, p) == base_kernel(y, x, p));
    }
    auto aniso = matern(1.5, {2.0, 0.5});
    const double c[] = {0.5, 2.0};
    CHECK(base_kernel(a, c, aniso) == doctest::Approx(matern_psi(std::sqrt(2.0), 1.5)).epsilon(1e-14));
    const double short_x[] = {0.0};
    CHECK_THROWS(base_kernel(short_x, a, p));
}

TEST_CASE("linear kernel") {
    auto grid = unit_square();
    auto p = matern(2.5, {1.0, 1.0});
    auto one = fn("1", grid);
    auto zero = constant_function(grid, 0.0);
    auto x1 = fn("x1", grid);
    CHECK(linear_kernel(zero, x1, p) == 0.0);
    CHECK(rel_diff(linear_kernel(2.0 * x1, one, p), 2.0 * linear_kernel(x1, one, p)) < 1e-12);

    // brute-force double sum over a refined 40 x 40 Gauss-Legendre grid
    std::vector<double> nodes, weights;
    gauss_legendre(40, nodes, weights);
    std::vector<std::array<double, 3>> pts;  // x1, x2, weight on [0,1]^2
    for (std::size_t i = 0; i < nodes.size(); ++i)
        for (std::size_t j = 0; j < nodes.size(); ++j)
            pts.push_back({0.5 * (nodes[i] + 1.0), 0.5 * (nodes[j] + 1.0), 0.25 * weights[i] * weights[j]});
    double brute = 0.0;
    for (const auto& u : pts) {
        for (const auto& v : pts) {
            const double xu[] = {u[0], u[1]}, xv[] = {v[0], v[1]};
            brute += u[2] * v[2] * base_kernel(xu, xv, p);
        }
    }
    CHECK(rel_diff(linear_kernel(one, one, p), brute) < 1e-6);

    auto square = pointwise_map("square");
    CHECK(linear_kernel(fn("x1+x2", grid), one, p, square) ==
          doctest::Approx(linear_kernel(fn("(x1+x2)^2", grid), one, p)).epsilon(1e-14));
    CHECK_THROWS(pointwise_map("nope"));
}

TEST_CASE("linear kernel matches the evaluator and is bilinear") {
    auto grid = unit_square();
    auto p = matern(2.5, {0.7, 2.0}, 1.5);
    KernelEvaluator eval(KernelSpec::linear(p), grid);
    Rng rng(5);
    for (int i = 0; i < 30; ++i) {
        auto g1 = random_poly(rng, grid), g2 = random_poly(rng, grid), h = random_poly(rng, grid);
        const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
        CHECK(rel_diff(eval(g1, h), linear_kernel(g1, h, p)) < 1e-12);
        const double lhs = eval(linear_combination(a, g1, b, g2), h);
        const double rhs = a * eval(g1, h) + b * eval(g2, h);
        CHECK(std::abs(lhs - rhs) <= 1e-12 * (std::abs(a * eval(g1, h)) + std::abs(b * eval(g2, h))));
    }
}

TEST_CASE("nonlinear kernel") {
    auto grid = unit_square();
    auto outer = matern(2.5, {});
    auto one = fn("1", grid);
    auto zero = constant_function(grid, 0.0);
    CHECK(nonlinear_kernel(one, one, outer, 1.0) == 1.0);
    CHECK(nonlinear_kernel(one, zero, outer, 1.0) == doctest::Approx(0.31728).epsilon(1e-4));
    CHECK_THROWS(nonlinear_kernel(one, zero, outer, 0.0));

    Rng rng(8);
    for (int i = 0; i < 20; ++i) {
        auto g1 = random_poly(rng, grid), g2 = random_poly(rng, grid), h = random_poly(rng, grid);
        const double gamma = rng.uniform(0.1, 3.0);
        CHECK(rel_diff(nonlinear_kernel(g1 + h, g2 + h, outer, gamma), nonlinear_kernel(g1, g2, outer, gamma)) < 1e-12);
        CHECK(nonlinear_kernel(g1, g2, outer, gamma) ==
              doctest::Approx(matern_psi(gamma * l2_distance(g1, g2), 2.5)).epsilon(1e-14));
    }
    // radial: same distance, different shapes
    auto a = fn("x1", grid), b = fn("x1 + 0.5", grid);
    auto c = fn("1", grid), d = fn("1 + 0.5*sqrt(3)*(2*x2-1)", grid);
    REQUIRE(l2_distance(a, b) == doctest::Approx(l2_distance(c, d)).epsilon(1e-12));
    CHECK(nonlinear_kernel(a, b, outer, 2.0) == doctest::Approx(nonlinear_kernel(c, d, outer, 2.0)).epsilon(1e-10));
}

TEST_CASE("kernel spec helpers") {
    auto spec = KernelSpec::linear(matern(2.5, {1.0, 1.0}, 2.0));
    CHECK(spec.family() == KernelFamily::Linear);
    CHECK(spec.nugget == doctest::Approx(2e-8));
    auto scaled = spec.with_sigma2(4.0);
    CHECK(scaled.sigma2() == 4.0);
    CHECK(scaled.nugget == doctest::Approx(4e-8));
    CHECK(kernel_family_from_string(to_string(KernelFamily::Nonlinear)) == KernelFamily::Nonlinear);
    CHECK_THROWS(kernel_family_from_string("quadratic"));
    auto bad = KernelSpec::nonlinear(matern(2.5, {}), -1.0);
    CHECK_THROWS(bad.validate());
}

TEST_CASE("gram assembly") {
    auto grid = unit_square();
    auto one = fn("1", grid);
    auto nl = KernelSpec::nonlinear(matern(2.5, {}), 1.0);
    std::vector<FunctionalInput> single{one};
    auto f = gram(single, nl);
    REQUIRE(f.size() == 1);
    CHECK(f.gram(0, 0) == doctest::Approx(1.0 + 1e-8).epsilon(1e-15));

    auto inputs = table1_inputs(grid);
    for (const auto& spec : {nl, KernelSpec::linear(matern(2.5, {1.0, 1.0}))}) {
        auto s = spec;
        s.nugget = 0.0;
        KernelEvaluator eval(s, grid);
        const Eigen::MatrixXd k = eval.matrix(inputs);
        CHECK(k == k.transpose());
        if (spec.family() == KernelFamily::Nonlinear) {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k);
            CHECK(es.eigenvalues().minCoeff() > 0.0);
        }
        auto fac = gram(inputs, spec);
        const double err = (fac.chol * fac.chol.transpose() - fac.gram).norm() / fac.gram.norm();
        CHECK(err < 1e-8);
        CHECK(fac.chol.diagonal().minCoeff() > 0.0);
        CHECK(fac.log_det == doctest::Approx(std::log(fac.gram.determinant())).epsilon(1e-6));
    }
}

TEST_CASE("linearly dependent inputs defeat a nugget-free factorization") {
    auto grid = unit_square();
    std::vector<FunctionalInput> dep{fn("x1", grid), fn("2*x1", grid)};
    auto spec = KernelSpec::linear(matern(2.5, {1.0, 1.0}));
    spec.nugget = 0.0;
    CHECK_THROWS_AS(gram(dep, spec), CholeskyFailure);
    // the default nugget rescues it
    auto rescued = gram(dep, KernelSpec::linear(matern(2.5, {1.0, 1.0})));
    CHECK(rescued.nugget >= 1e-8);
    CHECK(rescued.nugget <= 1e-4);
}

TEST_CASE("nugget escalation stops at its ceiling") {
    Eigen::MatrixXd bad(2, 2);
    bad << 1.0, 2.0, 2.0, 1.0;  // eigenvalue -1 cannot be fixed by 1e-4
    CHECK_THROWS_AS(factorize(bad, 1e-8, 1.0), CholeskyFailure);
    Eigen::MatrixXd ok = Eigen::MatrixXd::Identity(3, 3);
    auto f = factorize(ok, 1e-8, 1.0);
    CHECK(f.nugget == 1e-8);
    CHECK(f.solve(Eigen::VectorXd(Eigen::VectorXd::Ones(3))).isApprox(Eigen::VectorXd::Constant(3, 1.0 / (1.0 + 1e-8))));
}

TEST_CASE("random five-input grams are positive definite") {
    auto grid = unit_square();
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<FunctionalInput> inputs;
        for (int i = 0; i < 5; ++i) inputs.push_back(random_poly(rng, grid));
        auto lin = KernelSpec::linear(matern(2.5, {rng.uniform(0.5, 3.0), rng.uniform(0.5, 3.0)}));
        auto nl = KernelSpec::nonlinear(matern(2.5, {}), rng.uniform(0.2, 3.0));
        for (auto spec : {lin, nl}) {
            spec.nugget = 0.0;
            const Eigen::MatrixXd k = KernelEvaluator(spec, grid).matrix(inputs);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k);
            CHECK(es.eigenvalues().minCoeff() > 0.0);
        }
    }
}
