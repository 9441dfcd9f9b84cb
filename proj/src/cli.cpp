#include "figp/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "figp/csv.hpp"
#include "figp/designs.hpp"
#include "figp/emulator.hpp"
#include "figp/gp.hpp"
#include "figp/io.hpp"
#include "figp/reproduce.hpp"
#include "figp/sampling.hpp"

namespace figp {

namespace {

struct Globals {
    std::uint64_t seed = 42;
    std::optional<std::size_t> grid_res;
    std::string out;
    bool json = false;
};

/// Failure inside a named stage of a subcommand.
struct Failure {
    std::string stage;
    std::string what;
};

template <typename F>
auto run_stage(const std::string& name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const StageError& e) {
        throw Failure{e.stage(), e.what()};
    } catch (const std::exception& e) {
        throw Failure{name, e.what()};
    }
}

void emit(const Globals& g, std::ostream& out, const std::string& content) {
    if (g.out.empty()) {
        out << content;
    } else {
        run_stage("write", [&] { atomic_write(g.out, content); });
    }
}

std::vector<KernelFamily> parse_families(const std::vector<std::string>& names) {
    std::vector<KernelFamily> out;
    for (const auto& n : names) out.push_back(kernel_family_from_string(n));
    return out;
}

FitConfig fit_config(const Globals& g, double nu, const std::string& form, int multistarts) {
    FitConfig c;
    c.seed = g.seed;
    c.nu = nu;
    c.form = psi_form_from_string(form);
    c.multistarts = multistarts;
    c.validate();
    return c;
}

Json model_summary(const GPModel& m) {
    Json j;
    j["family"] = to_string(m.family());
    j["kernel"] = kernel_to_json(m.spec());
    j["mu"] = m.mu();
    j["log_likelihood"] = m.log_likelihood();
    j["loocv"] = loocv_error(m);
    j["n"] = m.size();
    return j;
}

std::string text_summary(const Json& j) {
    std::ostringstream s;
    for (const auto& [k, v] : j.items()) s << k << ": " << (v.is_string() ? v.get<std::string>() : v.dump()) << '\n';
    return s.str();
}

std::vector<FunctionalInput> cli_inputs(const std::vector<std::string>& items, const GridPtr& grid) {
    Json list = Json::array();
    for (const auto& s : items) list.push_back(s);
    return resolve_inputs(list, grid, ".");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Functional-input Gaussian process toolkit", "figp"};
    app.fallthrough();
    app.require_subcommand(1);
    Globals g;
    app.add_option("--seed", g.seed, "Seed for every random stream")->capture_default_str();
    app.add_option("--grid-res", g.grid_res, "Quadrature points per axis (overrides files)");
    app.add_option("--out", g.out, "Output file (directory for reproduce)");
    app.add_flag("--json", g.json, "Machine-readable JSON report on stdout");

    // Shared fitting knobs.
    double nu = 2.5;
    std::string form = "standard";
    int multistarts = 8;
    const auto add_fit_opts = [&](CLI::App* sub) {
        sub->add_option("--nu", nu, "Matérn smoothness")->capture_default_str();
        sub->add_option("--psi-form", form, "standard | exp5")->capture_default_str();
        sub->add_option("--multistarts", multistarts, "Optimizer starts")->capture_default_str();
    };

    std::string train, family = "linear", model_path;
    std::vector<std::string> families{"linear", "nonlinear"};
    std::vector<std::string> inputs;

    auto* fit_cmd = app.add_subcommand("fit", "Fit a model by maximum likelihood");
    fit_cmd->add_option("--train", train, "Training set JSON")->required();
    fit_cmd->add_option("--family", family, "linear | nonlinear")->capture_default_str();
    add_fit_opts(fit_cmd);

    auto* predict_cmd = app.add_subcommand("predict", "Posterior mean and variance at new inputs");
    predict_cmd->add_option("--model", model_path, "Model JSON")->required();
    predict_cmd->add_option("--input", inputs, "Expression or CSV file; repeatable")->required();

    auto* loocv_cmd = app.add_subcommand("loocv", "Closed-form leave-one-out residuals");
    loocv_cmd->add_option("--model", model_path, "Model JSON")->required();

    auto* select_cmd = app.add_subcommand("select-kernel", "Fit each family and keep the lowest LOOCV");
    select_cmd->add_option("--train", train, "Training set JSON")->required();
    select_cmd->add_option("--families", families, "Families to compare")->delimiter(',')->capture_default_str();
    std::string model_out;
    select_cmd->add_option("--model-out", model_out, "Also save the selected model here");
    add_fit_opts(select_cmd);

    std::string route = "gram";
    double theta = 1.0, gamma = 0.01, sigma2 = 1.0;
    std::size_t paths = 5, alpha_points = 101;
    auto* paths_cmd = app.add_subcommand("sample-paths", "Sample paths over the family sin(alpha x) on [0, 2 pi]");
    paths_cmd->add_option("--family", family, "linear | nonlinear")->capture_default_str();
    paths_cmd->add_option("--nu", nu)->capture_default_str();
    paths_cmd->add_option("--theta", theta, "Base-kernel scale (linear)")->capture_default_str();
    paths_cmd->add_option("--gamma", gamma, "Distance scale (nonlinear)")->capture_default_str();
    paths_cmd->add_option("--sigma2", sigma2)->capture_default_str();
    paths_cmd->add_option("--paths", paths)->capture_default_str();
    paths_cmd->add_option("--alphas", alpha_points, "Number of alpha values in [0, 1]")->capture_default_str();
    paths_cmd->add_option("--route", route, "gram | kl (kl needs the linear family)")->capture_default_str();

    std::string design = "knot";
    std::vector<std::size_t> sizes{8, 16, 32, 64};
    std::size_t tests = 200, replicates = 0;
    double decay_nu = 1.5;
    auto* decay_cmd = app.add_subcommand("mspe-decay", "MSPE against design size on [0, 1] (linear kernel)");
    decay_cmd->add_option("--design", design, "knot | eigen")->capture_default_str();
    decay_cmd->add_option("--nu", decay_nu)->capture_default_str();
    decay_cmd->add_option("--theta", theta)->capture_default_str();
    decay_cmd->add_option("--sizes", sizes)->delimiter(',')->capture_default_str();
    decay_cmd->add_option("--tests", tests, "Test functions drawn from the base process")->capture_default_str();
    decay_cmd->add_option("--replicates", replicates, "Monte Carlo cross-check replicates")->capture_default_str();

    auto* emulate_cmd = app.add_subcommand("emulate", "PCA multi-output emulator");
    emulate_cmd->require_subcommand(1);
    std::string dataset, emulator_path;
    double threshold = 0.999;
    bool factors = false;
    auto* efit = emulate_cmd->add_subcommand("fit", "Fit an emulator to a field dataset");
    efit->add_option("--dataset", dataset, "Dataset manifest JSON")->required();
    efit->add_option("--threshold", threshold, "Explained-variance threshold")->capture_default_str();
    efit->add_option("--families", families)->delimiter(',')->capture_default_str();
    add_fit_opts(efit);
    auto* epredict = emulate_cmd->add_subcommand("predict", "Predict a field");
    epredict->add_option("--emulator", emulator_path, "Emulator JSON")->required();
    epredict->add_option("--input", inputs, "Expression or CSV file")->required()->expected(1);
    epredict->add_flag("--factors", factors, "Also emit the rank-k covariance factors");

    std::string target;
    auto* repro_cmd = app.add_subcommand("reproduce", "Regenerate a table or figure dataset");
    repro_cmd->add_option("target", target, "table1 | table2 | figure2 | figure3 | mspe_decay | all")->required();
    std::size_t draws = 100;
    repro_cmd->add_option("--draws", draws, "Table 2 test draws")->capture_default_str();
    repro_cmd->add_option("--paths", paths)->capture_default_str();

    if (argc <= 1) {
        err << app.help();
        return 2;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "figp: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (fit_cmd->parsed()) {
            const TrainingSet t = run_stage("load-training", [&] { return load_training_set(train, g.grid_res); });
            const FitConfig c = run_stage("config", [&] { return fit_config(g, nu, form, multistarts); });
            const GPModel m = run_stage("fit", [&] {
                return fit(t.inputs, t.outputs, kernel_family_from_string(family), c);
            });
            const Json summary = run_stage("summarize", [&] { return model_summary(m); });
            if (!g.out.empty()) run_stage("write", [&] { atomic_write(g.out, dump_json(model_to_json(m))); });
            out << (g.json ? dump_json(summary) : text_summary(summary));
        } else if (predict_cmd->parsed()) {
            const GPModel m = run_stage("load-model", [&] { return model_from_json(read_json_file(model_path)); });
            const auto gs = run_stage("load-inputs", [&] { return cli_inputs(inputs, m.inputs()[0].grid_ptr()); });
            const auto preds = run_stage("predict", [&] { return predict(m, gs); });
            std::ostringstream s;
            if (g.json) {
                Json rows = Json::array();
                for (std::size_t i = 0; i < gs.size(); ++i) {
                    rows.push_back(Json{{"input", gs[i].label()}, {"mean", preds[i].mean}, {"variance", preds[i].variance}});
                }
                s << dump_json(rows);
            } else {
                s << "input,mean,variance\n";
                for (std::size_t i = 0; i < gs.size(); ++i) {
                    s << '"' << gs[i].label() << "\"," << format_csv(preds[i].mean) << ',' << format_csv(preds[i].variance) << '\n';
                }
            }
            emit(g, out, s.str());
        } else if (loocv_cmd->parsed()) {
            const GPModel m = run_stage("load-model", [&] { return model_from_json(read_json_file(model_path)); });
            const Eigen::VectorXd r = run_stage("loocv", [&] { return loocv_residuals(m); });
            std::ostringstream s;
            if (g.json) {
                Json res = Json::array();
                for (Eigen::Index i = 0; i < r.size(); ++i) res.push_back(r[i]);
                s << dump_json(Json{{"loocv", r.squaredNorm() / static_cast<double>(r.size())}, {"residuals", res}});
            } else {
                s << "index,input,residual\n";
                for (Eigen::Index i = 0; i < r.size(); ++i) {
                    s << i + 1 << ",\"" << m.inputs()[static_cast<std::size_t>(i)].label() << "\"," << format_csv(r[i]) << '\n';
                }
                s << "# loocv=" << format_csv(r.squaredNorm() / static_cast<double>(r.size())) << '\n';
            }
            emit(g, out, s.str());
        } else if (select_cmd->parsed()) {
            const TrainingSet t = run_stage("load-training", [&] { return load_training_set(train, g.grid_res); });
            const FitConfig c = run_stage("config", [&] { return fit_config(g, nu, form, multistarts); });
            const auto fams = run_stage("config", [&] { return parse_families(families); });
            const Selection sel = run_stage("select", [&] { return select_kernel(t.inputs, t.outputs, fams, c); });
            Json report = Json::array();
            for (const auto& r : sel.report) {
                Json row{{"family", to_string(r.family)}, {"ok", r.ok}};
                if (r.ok) {
                    row["loocv"] = r.loocv;
                    row["log_likelihood"] = r.log_likelihood;
                } else {
                    row["error"] = r.message;
                }
                report.push_back(row);
            }
            Json summary{{"selected", to_string(sel.best.family())},
                         {"seed", g.seed},
                         {"families", report},
                         {"warnings", sel.warnings},
                         {"model", model_summary(sel.best)}};
            if (!model_out.empty()) run_stage("write", [&] { atomic_write(model_out, dump_json(model_to_json(sel.best))); });
            std::string text;
            if (g.json) {
                text = dump_json(summary);
            } else {
                std::ostringstream s;
                s << "family,loocv,log_likelihood\n";
                for (const auto& r : sel.report) {
                    s << to_string(r.family) << ',' << (r.ok ? format_csv(r.loocv) : "NA") << ','
                      << (r.ok ? format_csv(r.log_likelihood) : "NA") << '\n';
                }
                s << "# selected=" << to_string(sel.best.family()) << '\n';
                for (const auto& w : sel.warnings) s << "# warning: " << w << '\n';
                text = s.str();
            }
            emit(g, out, text);
        } else if (paths_cmd->parsed()) {
            const PathFamily fam = run_stage("sample", [&] {
                const GridPtr grid = build_grid(Domain({{0.0, 2.0 * std::numbers::pi}}), g.grid_res.value_or(default_resolution(1)));
                const Eigen::VectorXd alphas = equispaced(0.0, 1.0, alpha_points);
                const auto ins = sine_family(grid, alphas);
                MaternParams m;
                m.nu = nu;
                m.sigma2 = sigma2;
                const KernelFamily kf = kernel_family_from_string(family);
                std::ostringstream desc;
                PathFamily pf;
                if (kf == KernelFamily::Linear) {
                    m.scales = {theta};
                    desc << "linear nu=" << format_number(nu) << " theta=" << format_number(theta);
                    if (route == "kl") {
                        pf = sample_paths_kl(nystrom_eig(m, grid, grid->size()), ins, paths, g.seed);
                    } else if (route == "gram") {
                        pf = sample_paths_gram(ins, KernelSpec::linear(m), paths, g.seed);
                    } else {
                        throw std::invalid_argument("route must be gram or kl");
                    }
                } else {
                    if (route != "gram") throw std::invalid_argument("the nonlinear family only supports the gram route");
                    desc << "nonlinear nu=" << format_number(nu) << " gamma=" << format_number(gamma);
                    pf = sample_paths_gram(ins, KernelSpec::nonlinear(m, gamma), paths, g.seed);
                }
                desc << " sigma2=" << format_number(sigma2) << " route=" << route;
                pf.index_values = alphas;
                pf.description = desc.str();
                return pf;
            });
            std::ostringstream s;
            write_path_csv(s, fam);
            emit(g, out, s.str());
        } else if (decay_cmd->parsed()) {
            const DecayCurve curve = run_stage("mspe", [&] {
                MaternParams base;
                base.nu = decay_nu;
                base.scales = {theta};
                const GridPtr grid = build_grid(Domain::unit_cube(1), g.grid_res.value_or(200));
                const auto test_set = prior_draws(base, grid, tests, decay_test_seed(g.seed));
                DesignBuilder builder;
                double rate = 0.0;
                std::optional<EigenSystem> eig;
                if (design == "knot") {
                    builder = [&](std::size_t n) { return knot_design(lattice_knots(grid->domain(), n), base, grid); };
                    rate = -2.0 * decay_nu;
                } else if (design == "eigen") {
                    if (sizes.empty()) throw std::invalid_argument("no design sizes");
                    eig = nystrom_eig(base, grid, *std::max_element(sizes.begin(), sizes.end()));
                    builder = [&](std::size_t n) { return eigenfunction_design(*eig, n); };
                    rate = -4.0 * decay_nu;
                } else {
                    throw std::invalid_argument("design must be knot or eigen");
                }
                return empirical_mspe(builder, sizes, test_set, KernelSpec::linear(base), replicates, g.seed, rate);
            });
            std::ostringstream s;
            if (g.json) {
                s << dump_json(Json{{"design", design}, {"sizes", curve.sizes}, {"mspe", curve.mspe},
                                    {"mc_mspe", curve.mc_mspe}, {"mc_se", curve.mc_se}, {"slope", curve.slope},
                                    {"slope_se", curve.slope_se}, {"theoretical_rate", curve.theoretical_rate}});
            } else {
                write_decay_csv(s, curve);
            }
            emit(g, out, s.str());
        } else if (efit->parsed()) {
            const FieldDataset ds = run_stage("load-dataset", [&] { return load_field_dataset(dataset, g.grid_res); });
            const FitConfig c = run_stage("config", [&] { return fit_config(g, nu, form, multistarts); });
            const auto fams = run_stage("config", [&] { return parse_families(families); });
            const EmulatorFit ef = run_stage("fit", [&] { return fit_emulator(ds, threshold, fams, c); });
            Json comps = Json::array();
            for (std::size_t l = 0; l < ef.emulator.components_kept(); ++l) {
                const GPModel& m = ef.emulator.score_models()[l];
                comps.push_back(Json{{"component", l + 1},
                                     {"explained_variance_ratio", ef.emulator.explained_variance_ratio()[static_cast<Eigen::Index>(l)]},
                                     {"family", to_string(m.family())},
                                     {"loocv", loocv_error(m)}});
            }
            const Json summary{{"components", comps}, {"warnings", ef.warnings}};
            if (!g.out.empty()) run_stage("write", [&] { atomic_write(g.out, dump_json(emulator_to_json(ef.emulator))); });
            out << (g.json ? dump_json(summary) : text_summary(summary));
        } else if (epredict->parsed()) {
            const PCAEmulator em = run_stage("load-emulator", [&] { return emulator_from_json(read_json_file(emulator_path)); });
            const auto gs = run_stage("load-inputs", [&] {
                return cli_inputs(inputs, em.score_models()[0].inputs()[0].grid_ptr());
            });
            const FieldPrediction p = run_stage("predict", [&] { return predict_field(em, gs[0], factors); });
            std::ostringstream s;
            s << "pixel,mean,variance";
            if (p.covariance_factors) {
                for (Eigen::Index l = 0; l < p.covariance_factors->cols(); ++l) s << ",factor_" << l + 1;
            }
            s << '\n';
            for (Eigen::Index i = 0; i < p.mean.size(); ++i) {
                s << i << ',' << format_csv(p.mean[i]) << ',' << format_csv(p.variance[i]);
                if (p.covariance_factors) {
                    for (Eigen::Index l = 0; l < p.covariance_factors->cols(); ++l) s << ',' << format_csv((*p.covariance_factors)(i, l));
                }
                s << '\n';
            }
            emit(g, out, s.str());
        } else if (repro_cmd->parsed()) {
            ReproduceConfig c;
            c.out_dir = g.out.empty() ? "." : g.out;
            c.seed = g.seed;
            c.grid_res = g.grid_res;
            c.test_draws = draws;
            c.paths = paths;
            std::vector<std::string> targets;
            if (target == "all") {
                targets = reproduce_targets();
            } else {
                const auto& known = reproduce_targets();
                if (std::find(known.begin(), known.end(), target) == known.end()) {
                    err << "figp: unknown reproduce target \"" << target << "\"\n\n" << repro_cmd->help();
                    return 2;
                }
                targets = {target};
            }
            Json all = Json::object();
            for (const auto& t : targets) {
                const ReproduceReport r = run_stage(t, [&] { return run_reproduce(t, c); });
                all[t] = Json{{"files", r.files}};
                if (!g.json) {
                    for (const auto& f : r.files) out << (std::filesystem::path(c.out_dir) / f).string() << '\n';
                }
            }
            if (g.json) out << dump_json(all);
        }
    } catch (const Failure& f) {
        err << "figp: stage '" << f.stage << "' failed: " << f.what << '\n';
        return 1;
    }
    return 0;
}

}  // namespace figp
