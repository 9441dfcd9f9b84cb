#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "figp/csv.hpp"
#include "figp/emulator.hpp"
#include "figp/io.hpp"
#include "figp/reproduce.hpp"
#include "support.hpp"

using namespace figp;
using figp::test::fn;

namespace {

MaternParams matern(double nu, std::vector<double> scales, double sigma2 = 1.0) {
    MaternParams p;
    p.nu = nu;
    p.sigma2 = sigma2;
    p.scales = std::move(scales);
    return p;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

}  // namespace

TEST_CASE("number formatting") {
    CHECK(format_csv(1.0 / 3.0) == "0.333333");
    CHECK(format_csv(1234567.0) == "1.23457e+06");
    const double x = 0.1 + 0.2;
    CHECK(std::stod(format_number(x)) == x);
}

TEST_CASE("csv parsing") {
    auto rows = parse_csv("a,b\n1,2\n\n3,4\n");
    REQUIRE(rows.size() == 3);
    CHECK(rows[0] == std::vector<std::string>{"a", "b"});
    CHECK(rows[2] == std::vector<std::string>{"3", "4"});
}

TEST_CASE("atomic writes replace whole files") {
    test::ScratchDir dir("atomic");
    const auto path = (dir.path() / "f.txt").string();
    atomic_write(path, "first");
    atomic_write(path, "second");
    CHECK(read_file(path) == "second");
    std::size_t count = 0;
    for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir.path())) ++count;
    CHECK(count == 1);
}

TEST_CASE("grid and kernel json round trips") {
    auto grid = build_grid(Domain({{0.0, 2.0}, {-1.0, 1.0}}), 7, QuadratureRule::UniformMidpoint);
    auto back = grid_from_json(grid_to_json(*grid));
    CHECK(back->same_as(*grid));
    CHECK(grid_from_json(grid_to_json(*grid), 9)->resolution() == 9);
    CHECK_THROWS_AS(grid_from_json(Json::parse(R"({"resolution": 4})")), FormatError);

    auto lin = KernelSpec::linear(matern(1.5, {0.3, 4.0}, 2.5), pointwise_map("square"));
    lin.nugget = 3e-7;
    auto lin_back = kernel_from_json(kernel_to_json(lin));
    CHECK(lin_back.family() == KernelFamily::Linear);
    CHECK(lin_back.matern().scales == lin.matern().scales);
    CHECK(lin_back.sigma2() == 2.5);
    CHECK(lin_back.nugget == 3e-7);
    REQUIRE(std::get<LinearKernel>(lin_back.kernel).premap.has_value());
    CHECK(std::get<LinearKernel>(lin_back.kernel).premap->name == "square");

    MaternParams outer = matern(2.5, {});
    outer.form = PsiForm::Exp5;
    auto nl = KernelSpec::nonlinear(outer, 0.123456789012345);
    auto nl_back = kernel_from_json(kernel_to_json(nl));
    CHECK(std::get<NonlinearKernel>(nl_back.kernel).gamma == 0.123456789012345);
    CHECK(nl_back.matern().form == PsiForm::Exp5);
}

TEST_CASE("inputs resolve from expressions and csv files") {
    test::ScratchDir dir("resolve");
    auto grid = test::unit_square(3);
    std::string csv = "x1,x2,value\n";
    for (Eigen::Index i = 0; i < grid->nodes().rows(); ++i) {
        csv += format_number(grid->nodes()(i, 0)) + "," + format_number(grid->nodes()(i, 1)) + "," +
               format_number(2.0 * grid->nodes()(i, 1)) + "\n";
    }
    write_text(dir.path() / "g.csv", csv);
    auto a = resolve_input(Json("x1 + 1"), grid, dir.str());
    auto b = resolve_input(Json::parse(R"({"csv": "g.csv"})"), grid, dir.str());
    auto c = resolve_input(Json("g.csv"), grid, dir.str());
    CHECK(integrate(a) == doctest::Approx(1.5));
    CHECK(integrate(b) == doctest::Approx(1.0));
    CHECK(b.values() == c.values());
    CHECK_THROWS(resolve_input(Json("x1 +"), grid, dir.str()));
    CHECK_THROWS(resolve_input(Json(3.0), grid, dir.str()));
}

TEST_CASE("model files round trip and are verified on load") {
    test::ScratchDir dir("model");
    auto grid = test::unit_square();
    auto inputs = table1_inputs(grid);
    auto outputs = table1_outputs(inputs);
    auto model = fit(inputs, outputs.col(2), KernelFamily::Nonlinear);
    const Json j = model_to_json(model);
    CHECK(j["format"] == "figp-model");
    auto back = model_from_json(Json::parse(dump_json(j)));
    auto g = fn("1+0.4*x1*x2", grid);
    CHECK(predict(back, g).mean == doctest::Approx(predict(model, g).mean).epsilon(1e-12));
    CHECK(back.mu() == model.mu());
    CHECK(loocv_error(back) == doctest::Approx(loocv_error(model)).epsilon(1e-10));

    Json tampered = j;
    tampered["kernel"]["gamma"] = tampered["kernel"]["gamma"].get<double>() * 1.01;
    CHECK_THROWS_AS(model_from_json(tampered), FormatError);
    Json wrong = j;
    wrong["format"] = "something-else";
    CHECK_THROWS_AS(model_from_json(wrong), FormatError);

    GramChecksum a{1.0, 2.0, 0.0}, b{1.0, 2.0, 1e-12};
    CHECK(checksum_matches(a, b));
    b.trace = 1.0 + 1e-6;
    CHECK_FALSE(checksum_matches(a, b));
}

TEST_CASE("training sets load relative to their file") {
    test::ScratchDir dir("train");
    auto grid = test::unit_square(10);
    Json j;
    j["grid"] = grid_to_json(*grid);
    j["inputs"] = Json::array({"x1", "x2", "x1*x2"});
    j["outputs"] = Json::array({0.5, 0.5, 0.25});
    write_text(dir.path() / "t.json", dump_json(j));
    auto t = load_training_set((dir.path() / "t.json").string());
    CHECK(t.inputs.size() == 3);
    CHECK(t.outputs[2] == 0.25);
    CHECK(t.grid->resolution() == 10);
    CHECK(load_training_set((dir.path() / "t.json").string(), 6).grid->resolution() == 6);

    j["outputs"] = Json::array({0.5});
    write_text(dir.path() / "bad.json", dump_json(j));
    CHECK_THROWS_AS(load_training_set((dir.path() / "bad.json").string()), FormatError);
    CHECK_THROWS(load_training_set((dir.path() / "missing.json").string()));
}

TEST_CASE("field datasets and emulators round trip") {
    test::ScratchDir dir("fields");
    auto grid = test::unit_square(10);
    std::vector<FunctionalInput> inputs;
    for (const char* e : {"1+x1", "1-x1", "1+x2", "1-x2", "1+x1*x2", "1-x1*x2"}) inputs.push_back(fn(e, grid));
    SyntheticFieldMap map(8, 2);
    auto ds = map.dataset(inputs);
    const auto manifest = (dir.path() / "fields.json").string();
    save_field_dataset(manifest, ds);
    auto loaded = load_field_dataset(manifest);
    CHECK(loaded.field_shape == ds.field_shape);
    CHECK((loaded.fields - ds.fields).cwiseAbs().maxCoeff() <= 1e-15 * ds.fields.cwiseAbs().maxCoeff());
    for (std::size_t i = 0; i < inputs.size(); ++i) CHECK(loaded.inputs[i].values() == ds.inputs[i].values());

    const KernelFamily lin[] = {KernelFamily::Linear};
    auto em = fit_emulator(ds, 0.999, lin).emulator;
    const Json j = emulator_to_json(em);
    CHECK(j["format"] == "figp-emulator");
    auto back = emulator_from_json(Json::parse(dump_json(j)));
    const Eigen::MatrixXd gram = back.components().transpose() * back.components();
    CHECK((gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff() < 1e-10);
    auto g = fn("1+0.2*x1", grid);
    CHECK((predict_field(back, g).mean - predict_field(em, g).mean).cwiseAbs().maxCoeff() < 1e-10);
}
