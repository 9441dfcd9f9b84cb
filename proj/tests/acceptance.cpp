#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <optional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "figp/cli.hpp"
#include "figp/csv.hpp"
#include "figp/designs.hpp"
#include "figp/emulator.hpp"
#include "figp/io.hpp"
#include "figp/random.hpp"
#include "figp/reproduce.hpp"
#include "figp/sampling.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace figp;
using figp::test::fn;

namespace {

struct Outcome {
    bool pass = true;
    std::vector<std::string> notes;
    std::optional<double> measured_seconds;  // overrides the wall time when only part of the run is timed

    void require(bool ok, const std::string& what) {
        if (!ok) pass = false;
        notes.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
    }
};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

MaternParams matern(double nu, std::vector<double> scales, double sigma2 = 1.0) {
    MaternParams p;
    p.nu = nu;
    p.sigma2 = sigma2;
    p.scales = std::move(scales);
    return p;
}

FunctionalInput random_poly(Rng& rng, const GridPtr& grid) {
    double c[6];
    for (double& v : c) v = rng.uniform(-1, 1);
    return sample_function(
        [=](std::span<const double> x) {
            return c[0] + c[1] * x[0] + c[2] * x[1] + c[3] * x[0] * x[1] + c[4] * x[0] * x[0] + c[5] * x[1] * x[1];
        },
        grid);
}

std::vector<FunctionalInput> field_training(const GridPtr& grid) {
    std::vector<FunctionalInput> out;
    for (const char* e : {"1+x1", "1-x1", "1+x1*x2", "1-x1*x2", "1+x2", "1-x2", "1+x1^2", "1-x1^2", "1+x2^2", "1-x2^2"})
        out.push_back(fn(e, grid));
    return out;
}

std::vector<FunctionalInput> field_held_out(const GridPtr& grid) {
    std::vector<FunctionalInput> out;
    for (const char* e : {"1-sin(x2)", "1+0.5*x1*x2", "1+sin(x1)", "exp(-x1*x2)", "1+0.3*x1+0.2*x2^2"})
        out.push_back(fn(e, grid));
    return out;
}

const KernelFamily kBoth[] = {KernelFamily::Linear, KernelFamily::Nonlinear};

struct FieldSetup {
    GridPtr grid = test::unit_square();
    SyntheticFieldMap map{32, 3};
    FieldDataset data = map.dataset(field_training(grid));
    EmulatorFit fit = fit_emulator(data, 0.999, kBoth);
};

// ---------------------------------------------------------------------------------------

Outcome table1_values() {
    Outcome o;
    const double printed[8][3] = {{1, 1.17, 0.77},       {0.33, 0.20, 0.31}, {0.33, 0.20, 0.31}, {1.5, 2.33, 0.96},
                                  {1.5, 2.33, 0.96},     {1.25, 1.61, 0.93}, {0.46, 0.27, 0.43}, {0.50, 0.35, 0.45}};
    const auto out = table1_outputs(table1_inputs(test::unit_square()));
    double worst = 0.0;
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 3; ++j) worst = std::max(worst, std::abs(out(i, j) - printed[i][j]));
    o.require(worst <= 0.005, "24 entries, max deviation " + num(worst));
    return o;
}

Outcome loocv_identity() {
    Outcome o;
    const auto fit_start = std::chrono::steady_clock::now();
    auto grid = test::unit_square();
    auto inputs = table1_inputs(grid);
    auto outputs = table1_outputs(inputs);
    std::vector<GPModel> models;
    for (Eigen::Index b = 0; b < 3; ++b)
        for (auto family : kBoth) models.push_back(fit(inputs, outputs.col(b), family));
    const SyntheticFieldMap map(16, 3);
    auto em = fit_emulator(map.dataset(field_training(grid)), 0.999, kBoth).emulator;
    for (const auto& m : em.score_models()) models.push_back(m);
    const auto check_start = std::chrono::steady_clock::now();

    double worst = 0.0;
    for (const auto& m : models) worst = std::max(worst, test::loo_identity_error(m));
    const auto end = std::chrono::steady_clock::now();
    o.measured_seconds = std::chrono::duration<double>(end - check_start).count();
    o.require(worst <= 1e-8, std::to_string(models.size()) + " models, max relative gap " + num(worst));
    o.notes.push_back("     model fitting " + num(std::chrono::duration<double>(check_start - fit_start).count()) + " s, not timed");
    return o;
}

Outcome table2_pattern() {
    Outcome o;
    const auto t = compute_table2(test::unit_square(), FitConfig{}, 42, 100);
    const char* expected[3] = {"linear", "nonlinear", "nonlinear"};
    const KernelFamily want[3] = {KernelFamily::Linear, KernelFamily::Nonlinear, KernelFamily::Nonlinear};
    for (int b = 0; b < 3; ++b) {
        const auto& lin = t.cells[b][0];
        const auto& non = t.cells[b][1];
        o.require(t.selected[b] == want[b], "f" + std::to_string(b + 1) + " selects " + expected[b] + " (got " +
                                                 to_string(t.selected[b]) + "; loocv linear " + num(lin.loocv) +
                                                 ", nonlinear " + num(non.loocv) + ")");
    }
    o.require(t.cells[0][0].ok && t.cells[0][0].mape < 0.01, "linear f1 mape " + num(t.cells[0][0].mape) + "% < 0.01%");
    o.require(t.cells[1][1].ok && t.cells[1][1].mape < 12.0, "nonlinear f2 mape " + num(t.cells[1][1].mape) + "% < 12%");
    o.require(t.cells[2][1].ok && t.cells[2][1].mape < 7.0, "nonlinear f3 mape " + num(t.cells[2][1].mape) + "% < 7%");
    o.require(t.cells[0][0].ok && t.cells[0][0].loocv < 1e-6, "linear f1 loocv " + num(t.cells[0][0].loocv) + " < 1e-6");
    return o;
}

Outcome positive_definiteness() {
    Outcome o;
    auto grid = test::unit_square();
    Rng rng(2024);
    double lin_min = INFINITY, nl_min = INFINITY;
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<FunctionalInput> inputs;
        for (int i = 0; i < 5; ++i) inputs.push_back(random_poly(rng, grid));
        auto lin = KernelSpec::linear(matern(2.5, {std::exp(rng.uniform(-1, 1)), std::exp(rng.uniform(-1, 1))}));
        auto nl = KernelSpec::nonlinear(matern(2.5, {}), std::exp(rng.uniform(-2, 1)));
        lin.nugget = 0.0;
        nl.nugget = 0.0;
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> a(KernelEvaluator(lin, grid).matrix(inputs));
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> b(KernelEvaluator(nl, grid).matrix(inputs));
        lin_min = std::min(lin_min, a.eigenvalues().minCoeff());
        nl_min = std::min(nl_min, b.eigenvalues().minCoeff());
    }
    o.require(lin_min > 0.0, "linear: smallest eigenvalue over 50 grams " + num(lin_min));
    o.require(nl_min > 0.0, "nonlinear: smallest eigenvalue over 50 grams " + num(nl_min));
    return o;
}

Outcome linearity() {
    Outcome o;
    auto grid = test::unit_square();
    Rng rng(99);
    KernelEvaluator eval(KernelSpec::linear(matern(2.5, {0.8, 1.7}, 1.3)), grid);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        auto g1 = random_poly(rng, grid), g2 = random_poly(rng, grid), h = random_poly(rng, grid);
        const double a = rng.uniform(-3, 3), b = rng.uniform(-3, 3);
        const double k1 = eval(g1, h), k2 = eval(g2, h);
        const double lhs = eval(linear_combination(a, g1, b, g2), h);
        worst = std::max(worst, std::abs(lhs - (a * k1 + b * k2)) / (std::abs(a * k1) + std::abs(b * k2)));
    }
    o.require(worst <= 1e-12, "kernel bilinearity over 100 triples, max relative gap " + num(worst));

    auto inputs = table1_inputs(grid);
    auto outputs = table1_outputs(inputs);
    auto model = GPModel::condition(KernelSpec::linear(matern(2.5, {1.1, 0.7}, 2.0)), inputs, outputs.col(1), MeanMode::Zero);
    double post = 0.0;
    for (int i = 0; i < 100; ++i) {
        auto g1 = random_poly(rng, grid), g2 = random_poly(rng, grid);
        const double a = rng.uniform(-3, 3), b = rng.uniform(-3, 3);
        const double p1 = predict(model, g1).mean, p2 = predict(model, g2).mean;
        const double combo = predict(model, linear_combination(a, g1, b, g2)).mean;
        post = std::max(post, std::abs(combo - (a * p1 + b * p2)) / (std::abs(a * p1) + std::abs(b * p2)));
    }
    o.require(post <= 1e-8, "zero-mean posterior mean linearity, max relative gap " + num(post));
    return o;
}

Outcome sampling_routes() {
    Outcome o;
    auto grid = test::periodic_interval();
    auto inputs = sine_family(grid, equispaced(0.0, 1.0, 11));
    const auto base = matern(2.5, {1.0});
    const auto spec = KernelSpec::linear(base);
    const std::size_t n = 20000;
    auto eig = nystrom_eig(base, grid);
    const Eigen::MatrixXd kl = empirical_covariance(sample_paths_kl(eig, inputs, n, 42).draws);
    const Eigen::MatrixXd ch = empirical_covariance(sample_paths_gram(inputs, spec, n, 43).draws);
    const Eigen::MatrixXd se_kl = covariance_standard_error(kl, n);
    const Eigen::MatrixXd se_ch = covariance_standard_error(ch, n);
    // the gram route carries the nugget on its diagonal
    const double bias = eig.tail_mass + spec.nugget;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < kl.rows(); ++i) {
        for (Eigen::Index j = 0; j < kl.cols(); ++j) {
            const double tol = 3.0 * std::hypot(se_kl(i, j), se_ch(i, j)) + bias;
            worst = std::max(worst, std::abs(kl(i, j) - ch(i, j)) / tol);
        }
    }
    o.require(worst <= 1.0, "11 inputs, 20000 draws, max |diff| / tolerance " + num(worst) + " (tail mass " +
                                num(eig.tail_mass) + ")");
    return o;
}

Outcome eigenvalue_decay() {
    Outcome o;
    auto grid = test::unit_interval(200);
    auto eig = nystrom_eig(matern(2.5, {1.0}), grid);
    std::vector<double> j, lam;
    for (int k = 5; k <= 30; ++k) {
        j.push_back(k);
        lam.push_back(eig.eigenvalues[k - 1]);
    }
    const double slope = fit_loglog_slope(j, lam).slope;
    o.require(std::abs(slope + 5.0) <= 0.7, "slope over j in [5,30] is " + num(slope) + ", band -5 +/- 0.7");
    return o;
}

Outcome mspe_decay() {
    Outcome o;
    auto e = run_decay_experiment(matern(1.5, {1.0}), 200, {8, 16, 32, 64}, 200, 100, 42);
    o.require(e.knot.slope <= -2.2, "knot design slope " + num(e.knot.slope) + " <= -2.2");
    for (std::size_t i = 0; i < e.knot_mean.size(); ++i) {
        const double slack = 3.0 * e.difference_se[i];
        o.require(e.eigen_mean[i] <= e.knot_mean[i] + slack, "n=" + std::to_string(e.knot.sizes[i]) + ": eigen " +
                                                                 num(e.eigen_mean[i]) + " vs knot " + num(e.knot_mean[i]));
    }
    return o;
}

Outcome pca_emulator() {
    Outcome o;
    const FieldSetup s;
    const auto& em = s.fit.emulator;
    o.require(em.components_kept() == 3, "threshold 0.999 keeps " + std::to_string(em.components_kept()) + " components");

    double worst_mape = 0.0, worst_identity = 0.0;
    for (const auto& g : field_held_out(s.grid)) {
        const auto p = predict_field(em, g);
        worst_mape = std::max(worst_mape, field_mape(p.mean, s.map(g)).percent);
        const Eigen::VectorXd expected = em.components().array().square().matrix() * p.score_variance;
        const double scale = std::max(1e-300, expected.cwiseAbs().maxCoeff());
        worst_identity = std::max(worst_identity, (p.variance - expected).cwiseAbs().maxCoeff() / scale);
        worst_identity = std::max(worst_identity, std::abs(p.variance.sum() - p.score_variance.sum()) /
                                                      std::max(1e-300, p.score_variance.sum()));
    }
    o.require(worst_mape < 5.0, "held-out mape " + num(worst_mape) + "% < 5%");

    const auto full = pca_reduce(s.data, 1.0);
    Eigen::MatrixXd back = full.scores * full.components.transpose();
    back.rowwise() += full.mean_field.transpose();
    const double recon = (back - s.data.fields).norm() / s.data.fields.norm();
    o.require(full.components.cols() == static_cast<Eigen::Index>(full.rank) && recon <= 1e-8,
              "rank " + std::to_string(full.rank) + " reconstruction relative error " + num(recon));
    o.require(worst_identity <= 1e-10, "variance decomposition, max relative gap " + num(worst_identity));
    return o;
}

Outcome deterministic_reproduction() {
    Outcome o;
    const test::ScratchDir a("accept_a"), b("accept_b");
    std::vector<std::string> errors;
    for (const auto* dir : {&a, &b}) {
        const std::string path = dir->str();
        const char* argv[] = {"figp", "--seed", "42", "reproduce", "all", "--out", path.c_str()};
        std::ostringstream out, err;
        const int code = run_cli(7, argv, out, err);
        if (code != 0) errors.push_back(err.str());
    }
    o.require(errors.empty(), errors.empty() ? "both runs exit 0" : "reproduce all failed: " + errors.front());
    std::size_t files = 0, differ = 0;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(a.path())) {
        if (!entry.is_regular_file()) continue;
        ++files;
        const auto rel = std::filesystem::relative(entry.path(), a.path());
        const auto other = b.path() / rel;
        if (!std::filesystem::exists(other) || read_file(entry.path().string()) != read_file(other.string())) {
            ++differ;
            o.notes.push_back("differs: " + rel.string());
        }
    }
    std::size_t files_b = 0;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(b.path()))
        if (entry.is_regular_file()) ++files_b;
    o.require(files > 0 && differ == 0 && files == files_b,
              std::to_string(files) + " files, " + std::to_string(differ) + " differ");
    return o;
}

struct Criterion {
    int id;
    const char* name;
    double limit_seconds;  // 0: no limit
    std::function<Outcome()> run;
};

}  // namespace

int main() {
    const std::vector<Criterion> all{
        {1, "table 1 values", 5, table1_values},
        {2, "closed-form loocv", 10, loocv_identity},
        {3, "table 2 selection pattern", 120, table2_pattern},
        {4, "kernel positive definiteness", 30, positive_definiteness},
        {5, "linearity", 0, linearity},
        {6, "sampling route equivalence", 60, sampling_routes},
        {7, "eigenvalue decay", 10, eigenvalue_decay},
        {8, "mspe decay", 60, mspe_decay},
        {9, "pca emulator", 60, pca_emulator},
        {10, "deterministic reproduction", 0, deterministic_reproduction},
    };
    int failed = 0;
    for (const auto& c : all) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.require(false, std::string("threw: ") + e.what());
        }
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const double secs = o.measured_seconds.value_or(wall);
        if (c.limit_seconds > 0) o.require(secs < c.limit_seconds, "runtime " + num(secs) + " s < " + num(c.limit_seconds) + " s");
        if (!o.pass) ++failed;
        std::cout << (o.pass ? "PASS" : "FAIL") << "  " << c.id << "  " << c.name << "  (" << num(secs) << " s)\n";
        for (const auto& n : o.notes) std::cout << "        " << n << "\n";
        std::cout.flush();
    }
    std::cout << (all.size() - static_cast<std::size_t>(failed)) << "/" << all.size() << " criteria passed\n";
    return failed == 0 ? 0 : 1;
}
