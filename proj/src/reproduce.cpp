#include "figp/reproduce.hpp"

#include <cmath>
#include <filesystem>
#include <numbers>
#include <sstream>

#include "figp/csv.hpp"
#include "figp/random.hpp"
#include "figp/sampling.hpp"

namespace figp {

namespace fs = std::filesystem;

std::string benchmark_name(Benchmark b) {
    switch (b) {
        case Benchmark::Integral: return "f1";
        case Benchmark::SquareIntegral: return "f2";
        case Benchmark::SineIntegral: return "f3";
    }
    return "?";
}

double evaluate_benchmark(Benchmark b, const FunctionalInput& g) {
    const Eigen::VectorXd& w = g.grid().weights();
    switch (b) {
        case Benchmark::Integral: return w.dot(g.values());
        case Benchmark::SquareIntegral: return w.dot(g.values().cwiseAbs2());
        case Benchmark::SineIntegral: return w.dot(Eigen::VectorXd(g.values().array().sin()));
    }
    return 0.0;
}

const std::vector<std::string>& table1_expressions() {
    static const std::vector<std::string> exprs{"x1+x2", "x1^2",    "x2^2",   "1+x1",
                                                "1+x2",  "1+x1*x2", "sin(x1)", "cos(x1+x2)"};
    return exprs;
}

std::vector<FunctionalInput> table1_inputs(const GridPtr& grid) {
    std::vector<FunctionalInput> out;
    for (const auto& e : table1_expressions()) out.push_back(sample_function(e, grid));
    return out;
}

Eigen::MatrixXd table1_outputs(const std::vector<FunctionalInput>& inputs) {
    Eigen::MatrixXd y(static_cast<Eigen::Index>(inputs.size()), 3);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        for (std::size_t b = 0; b < kBenchmarks.size(); ++b) {
            y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b)) = evaluate_benchmark(kBenchmarks[b], inputs[i]);
        }
    }
    return y;
}

std::array<std::string, 3> TestDraw::expressions() const {
    return {"1+sin(" + format_number(alpha1) + "*x1+" + format_number(alpha2) + "*x2)",
            format_number(beta) + "+x1^2+x2^3", "exp(-" + format_number(kappa) + "*x1*x2)"};
}

std::vector<TestDraw> test_draws(std::uint64_t seed, std::size_t count) {
    Rng rng(seed);
    std::vector<TestDraw> out(count);
    for (auto& d : out) {
        d.alpha1 = rng.uniform();
        d.alpha2 = rng.uniform();
        d.beta = rng.uniform();
        d.kappa = rng.uniform();
    }
    return out;
}

Table2 compute_table2(const GridPtr& grid, const FitConfig& fit_config, std::uint64_t seed, std::size_t draws) {
    const std::vector<FunctionalInput> inputs = table1_inputs(grid);
    const Eigen::MatrixXd outputs = table1_outputs(inputs);

    std::vector<std::array<FunctionalInput, 3>> tests;
    for (const TestDraw& d : test_draws(seed, draws)) {
        const auto e = d.expressions();
        tests.push_back({sample_function(e[0], grid), sample_function(e[1], grid), sample_function(e[2], grid)});
    }
    if (tests.empty()) throw std::invalid_argument("table2 needs at least one test draw");

    Table2 t;
    const std::array<KernelFamily, 2> families{KernelFamily::Linear, KernelFamily::Nonlinear};
    for (std::size_t b = 0; b < kBenchmarks.size(); ++b) {
        const Eigen::VectorXd y = outputs.col(static_cast<Eigen::Index>(b));
        for (std::size_t f = 0; f < families.size(); ++f) {
            Table2Cell& cell = t.cells[b][f];
            try {
                const GPModel model = fit(inputs, y, families[f], fit_config);
                cell.loocv = loocv_error(model);
                double by_draw = 0.0;
                std::array<double, 3> by_family{};
                for (const auto& draw : tests) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < 3; ++j) {
                        const double truth = evaluate_benchmark(kBenchmarks[b], draw[j]);
                        const double err = 100.0 * std::abs((truth - predict(model, draw[j]).mean) / truth);
                        s += err;
                        by_family[j] += err;
                    }
                    by_draw += s / 3.0;
                }
                const auto n = static_cast<double>(tests.size());
                cell.mape = by_draw / n;
                for (auto& v : by_family) v /= n;
                cell.family_mape = by_family;
                cell.mape_draw_first = (by_family[0] + by_family[1] + by_family[2]) / 3.0;
                cell.ok = true;
            } catch (const Error& e) {
                cell.message = e.what();
            }
        }
        const auto& lin = t.cells[b][0];
        const auto& non = t.cells[b][1];
        if (!lin.ok && !non.ok) throw Error(benchmark_name(kBenchmarks[b]) + ": both kernel families failed to fit");
        t.selected[b] = (lin.ok && (!non.ok || lin.loocv <= non.loocv)) ? KernelFamily::Linear : KernelFamily::Nonlinear;
        t.best_mape[b] = (lin.ok && (!non.ok || lin.mape <= non.mape)) ? KernelFamily::Linear : KernelFamily::Nonlinear;
    }
    return t;
}

std::uint64_t decay_test_seed(std::uint64_t seed) { return splitmix64(seed ^ 0x7e57u); }

DecayExperiment run_decay_experiment(const MaternParams& base, std::size_t resolution,
                                     const std::vector<std::size_t>& sizes, std::size_t tests,
                                     std::size_t replicates, std::uint64_t seed) {
    if (sizes.empty()) throw std::invalid_argument("decay experiment needs at least one size");
    const GridPtr grid = build_grid(Domain::unit_cube(1), resolution);
    const std::vector<FunctionalInput> test_set = prior_draws(base, grid, tests, decay_test_seed(seed));
    const KernelSpec spec = KernelSpec::linear(base);
    const LinearKernel& kernel = std::get<LinearKernel>(spec.kernel);
    const EigenSystem eig = nystrom_eig(base, grid, sizes.back());

    const DesignBuilder knots = [&](std::size_t n) { return knot_design(lattice_knots(grid->domain(), n), base, grid); };
    const DesignBuilder eigen = [&](std::size_t n) { return eigenfunction_design(eig, n); };

    DecayExperiment out;
    const double d = 1.0;
    out.knot = empirical_mspe(knots, sizes, test_set, spec, replicates, seed, -2.0 * base.nu / d);
    out.eigen = empirical_mspe(eigen, sizes, test_set, spec, replicates, seed, -4.0 * base.nu / d);
    for (std::size_t n : sizes) {
        const Eigen::VectorXd a = projection_errors(knots(n), test_set, kernel);
        const Eigen::VectorXd b = projection_errors(eigen(n), test_set, kernel);
        const Eigen::VectorXd diff = b - a;
        const double m = static_cast<double>(diff.size());
        const double var = m > 1 ? (diff.array() - diff.mean()).square().sum() / (m - 1) : 0.0;
        out.knot_mean.push_back(a.mean());
        out.eigen_mean.push_back(b.mean());
        out.difference_se.push_back(std::sqrt(var / m));
    }
    return out;
}

const std::vector<std::string>& reproduce_targets() {
    static const std::vector<std::string> t{"table1", "table2", "figure2", "figure3", "mspe_decay"};
    return t;
}

namespace {

class Writer {
public:
    explicit Writer(const ReproduceConfig& c) : dir_(c.out_dir) {}

    void write(const std::string& name, const std::string& content) {
        atomic_write((fs::path(dir_) / name).string(), content);
        files_.push_back(name);
    }
    std::vector<std::string> files() const { return files_; }

private:
    std::string dir_;
    std::vector<std::string> files_;
};

template <typename F>
auto stage(const std::string& name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

GridPtr square_grid(const ReproduceConfig& c) {
    return build_grid(Domain::unit_cube(2), c.grid_res.value_or(default_resolution(2)));
}

ReproduceReport table1(const ReproduceConfig& c) {
    Writer w(c);
    const GridPtr grid = stage("table1/grid", [&] { return square_grid(c); });
    const auto inputs = stage("table1/inputs", [&] { return table1_inputs(grid); });
    const Eigen::MatrixXd y = stage("table1/quadrature", [&] { return table1_outputs(inputs); });
    std::ostringstream csv;
    csv << "g,f1,f2,f3\n";
    Json rows = Json::array();
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        csv << table1_expressions()[i] << ',' << format_csv(y(r, 0)) << ',' << format_csv(y(r, 1)) << ','
            << format_csv(y(r, 2)) << '\n';
        rows.push_back(Json{{"g", table1_expressions()[i]}, {"f1", y(r, 0)}, {"f2", y(r, 1)}, {"f3", y(r, 2)}});
    }
    stage("table1/write", [&] { w.write("table1.csv", csv.str()); });
    Json summary{{"target", "table1"}, {"grid", grid_to_json(*grid)}, {"rows", rows}};
    stage("table1/write", [&] { w.write("table1.json", dump_json(summary)); });
    return {w.files(), summary};
}

ReproduceReport table2(const ReproduceConfig& c) {
    Writer w(c);
    const GridPtr grid = stage("table2/grid", [&] { return square_grid(c); });
    FitConfig fit_config = c.fit;
    fit_config.seed = c.seed;
    const Table2 t = stage("table2/fit", [&] { return compute_table2(grid, fit_config, c.seed, c.test_draws); });

    const std::array<std::string, 2> names{"linear", "nonlinear"};
    std::ostringstream csv;
    csv << "measurement,kernel,f1,f2,f3\n";
    for (const char* measure : {"loocv", "mape"}) {
        for (std::size_t f = 0; f < 2; ++f) {
            csv << measure << ',' << names[f];
            for (std::size_t b = 0; b < 3; ++b) {
                const Table2Cell& cell = t.cells[b][f];
                csv << ',' << (cell.ok ? format_csv(std::string(measure) == "loocv" ? cell.loocv : cell.mape) : "NA");
            }
            csv << '\n';
        }
    }
    csv << "selected_by_loocv,";
    for (std::size_t b = 0; b < 3; ++b) csv << ',' << to_string(t.selected[b]);
    csv << "\nlowest_mape,";
    for (std::size_t b = 0; b < 3; ++b) csv << ',' << to_string(t.best_mape[b]);
    csv << '\n';

    Json cols = Json::object();
    for (std::size_t b = 0; b < 3; ++b) {
        Json col;
        for (std::size_t f = 0; f < 2; ++f) {
            const Table2Cell& cell = t.cells[b][f];
            Json cj{{"ok", cell.ok}};
            if (cell.ok) {
                cj["loocv"] = cell.loocv;
                cj["mape_family_then_draw"] = cell.mape;
                cj["mape_draw_then_family"] = cell.mape_draw_first;
                cj["mape_g9"] = cell.family_mape[0];
                cj["mape_g10"] = cell.family_mape[1];
                cj["mape_g11"] = cell.family_mape[2];
            } else {
                cj["error"] = cell.message;
            }
            col[names[f]] = cj;
        }
        col["selected_by_loocv"] = to_string(t.selected[b]);
        col["lowest_mape"] = to_string(t.best_mape[b]);
        cols[benchmark_name(kBenchmarks[b])] = col;
    }
    Json summary{{"target", "table2"},
                 {"seed", c.seed},
                 {"test_draws", c.test_draws},
                 {"nu", fit_config.nu},
                 {"psi_form", to_string(fit_config.form)},
                 {"multistarts", fit_config.multistarts},
                 {"grid", grid_to_json(*grid)},
                 {"columns", cols}};
    stage("table2/write", [&] {
        w.write("table2.csv", csv.str());
        w.write("table2.json", dump_json(summary));
    });
    return {w.files(), summary};
}

struct Panel {
    std::string row;   // parameter varied
    double value;
    double nu, scale, sigma2;  // scale is theta (linear) or gamma (nonlinear)
};

std::vector<Panel> panels(double fixed_scale, const std::array<double, 3>& scale_values) {
    std::vector<Panel> out;
    for (double nu : {0.5, 1.5, 2.5}) out.push_back({"nu", nu, nu, fixed_scale, 1.0});
    for (double s : scale_values) out.push_back({"", s, 2.5, s, 1.0});
    for (double s2 : {0.25, 1.0, 4.0}) out.push_back({"sigma2", s2, 2.5, fixed_scale, s2});
    return out;
}

ReproduceReport figure(const ReproduceConfig& c, bool linear) {
    const std::string name = linear ? "figure2" : "figure3";
    const std::string scale_name = linear ? "theta" : "gamma";
    Writer w(c);
    const GridPtr grid = stage(name + "/grid", [&] {
        return build_grid(Domain({{0.0, 2.0 * std::numbers::pi}}), c.grid_res.value_or(default_resolution(1)));
    });
    const Eigen::VectorXd alphas = equispaced(0.0, 1.0, c.alpha_points);
    const auto inputs = stage(name + "/inputs", [&] { return sine_family(grid, alphas); });
    Json list = Json::array();
    for (Panel p : linear ? panels(1.0, {0.1, 1.0, 10.0}) : panels(0.01, {0.01, 0.1, 1.0})) {
        if (p.row.empty()) p.row = scale_name;
        MaternParams m;
        m.nu = p.nu;
        m.sigma2 = p.sigma2;
        KernelSpec spec;
        if (linear) {
            m.scales = {p.scale};
            spec = KernelSpec::linear(m);
        } else {
            spec = KernelSpec::nonlinear(m, p.scale);
        }
        std::ostringstream desc;
        desc << (linear ? "linear" : "nonlinear") << " nu=" << format_number(p.nu) << ' ' << scale_name << '='
             << format_number(p.scale) << " sigma2=" << format_number(p.sigma2);
        const std::string stage_name = name + "/" + p.row + "=" + format_number(p.value);
        PathFamily fam = stage(stage_name, [&] { return sample_paths_gram(inputs, spec, c.paths, c.seed); });
        fam.index_values = alphas;
        fam.description = desc.str();
        std::ostringstream csv;
        write_path_csv(csv, fam);
        const std::string file = name + "_" + p.row + "_" + format_number(p.value) + ".csv";
        stage(stage_name + "/write", [&] { w.write(file, csv.str()); });
        std::vector<std::size_t> extrema;
        for (Eigen::Index r = 0; r < fam.draws.rows(); ++r) extrema.push_back(count_extrema(fam.draws.row(r).transpose()));
        list.push_back(Json{{"file", file},
                            {"nu", p.nu},
                            {scale_name, p.scale},
                            {"sigma2", p.sigma2},
                            {"max_abs", fam.draws.cwiseAbs().maxCoeff()},
                            {"extrema", extrema}});
    }
    Json summary{{"target", name}, {"seed", c.seed}, {"paths", c.paths}, {"alpha_points", c.alpha_points},
                 {"grid", grid_to_json(*grid)}, {"panels", list}};
    stage(name + "/write", [&] { w.write(name + ".json", dump_json(summary)); });
    return {w.files(), summary};
}

ReproduceReport mspe_decay(const ReproduceConfig& c) {
    Writer w(c);
    MaternParams base;
    base.nu = 1.5;
    base.scales = {1.0};
    const std::vector<std::size_t> sizes{8, 16, 32, 64};
    const DecayExperiment e = stage("mspe_decay/experiment", [&] {
        return run_decay_experiment(base, c.grid_res.value_or(200), sizes, c.mspe_tests, c.mc_replicates, c.seed);
    });
    const auto curve_json = [](const DecayCurve& d) {
        Json j{{"sizes", d.sizes}, {"mspe", d.mspe},     {"nugget_mspe", d.nugget_mspe}, {"mc_mspe", d.mc_mspe},
               {"mc_se", d.mc_se}, {"slope", d.slope},   {"slope_se", d.slope_se},       {"theoretical_rate", d.theoretical_rate},
               {"replicates", d.replicates}};
        return j;
    };
    std::ostringstream knot_csv, eigen_csv;
    write_decay_csv(knot_csv, e.knot);
    write_decay_csv(eigen_csv, e.eigen);
    Json summary{{"target", "mspe_decay"},
                 {"seed", c.seed},
                 {"nu", base.nu},
                 {"theta", 1.0},
                 {"resolution", c.grid_res.value_or(200)},
                 {"test_functions", c.mspe_tests},
                 {"knot", curve_json(e.knot)},
                 {"eigen", curve_json(e.eigen)},
                 {"eigen_minus_knot_se", e.difference_se}};
    stage("mspe_decay/write", [&] {
        w.write("mspe_decay_knot.csv", knot_csv.str());
        w.write("mspe_decay_eigen.csv", eigen_csv.str());
        w.write("mspe_decay.json", dump_json(summary));
    });
    return {w.files(), summary};
}

}  // namespace

ReproduceReport run_reproduce(const std::string& target, const ReproduceConfig& config) {
    if (target == "table1") return table1(config);
    if (target == "table2") return table2(config);
    if (target == "figure2") return figure(config, true);
    if (target == "figure3") return figure(config, false);
    if (target == "mspe_decay") return mspe_decay(config);
    throw std::invalid_argument("unknown reproduce target \"" + target + "\"");
}

}  // namespace figp
