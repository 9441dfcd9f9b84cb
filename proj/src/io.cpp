#include "figp/io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "figp/csv.hpp"
#include "figp/expression.hpp"

namespace figp {

namespace fs = std::filesystem;

namespace {

constexpr int kFormatVersion = 1;

template <typename T>
T get(const Json& j, const char* key, const std::string& what) {
    if (!j.is_object() || !j.contains(key)) throw FormatError(what + ": missing \"" + key + "\"");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw FormatError(what + ": field \"" + key + "\" has the wrong type");
    }
}

Json vector_json(const Eigen::VectorXd& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

Eigen::VectorXd vector_from(const Json& j, const std::string& what) {
    if (!j.is_array()) throw FormatError(what + ": expected an array of numbers");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw FormatError(what + ": entry " + std::to_string(i) + " is not a number");
        v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    }
    return v;
}

void check_format(const Json& j, const std::string& expected) {
    const auto format = get<std::string>(j, "format", expected);
    if (format != expected) throw FormatError("expected a " + expected + " file, found \"" + format + "\"");
    const int version = get<int>(j, "version", expected);
    if (version != kFormatVersion) throw FormatError(expected + ": unsupported version " + std::to_string(version));
}

std::string parent_dir(const std::string& path) {
    const fs::path p = fs::path(path).parent_path();
    return p.empty() ? std::string(".") : p.string();
}

FunctionalInput resolve_label(const std::string& text, const GridPtr& grid, const std::string& base_dir) {
    if (text.size() > 4 && text.ends_with(".csv")) {
        const fs::path p = fs::path(base_dir) / text;
        if (fs::exists(p)) return read_functional_csv(p.string(), grid).with_label(text);
    }
    return sample_function(text, grid).with_label(text);
}

}  // namespace

Json grid_to_json(const QuadratureGrid& grid) {
    Json dom = Json::array();
    for (const auto& iv : grid.domain().bounds()) dom.push_back(Json::array({iv.lo, iv.hi}));
    return Json{{"domain", dom}, {"resolution", grid.resolution()}, {"rule", to_string(grid.rule())}};
}

GridPtr grid_from_json(const Json& j, std::optional<std::size_t> resolution_override) {
    const Json dom = get<Json>(j, "domain", "grid");
    if (!dom.is_array() || dom.empty()) throw FormatError("grid: domain must be a non-empty array of [lo, hi] pairs");
    std::vector<Interval> bounds;
    for (const auto& iv : dom) {
        if (!iv.is_array() || iv.size() != 2 || !iv[0].is_number() || !iv[1].is_number()) {
            throw FormatError("grid: each domain entry must be [lo, hi]");
        }
        bounds.push_back({iv[0].get<double>(), iv[1].get<double>()});
    }
    Domain domain(std::move(bounds));
    std::size_t res = default_resolution(domain.dim());
    if (j.contains("resolution")) res = get<std::size_t>(j, "resolution", "grid");
    if (resolution_override) res = *resolution_override;
    QuadratureRule rule = QuadratureRule::GaussLegendre;
    if (j.contains("rule")) rule = quadrature_rule_from_string(get<std::string>(j, "rule", "grid"));
    return build_grid(domain, res, rule);
}

Json kernel_to_json(const KernelSpec& spec) {
    const MaternParams& m = spec.matern();
    Json j;
    j["family"] = to_string(spec.family());
    j["nu"] = m.nu;
    j["sigma2"] = m.sigma2;
    j["form"] = to_string(m.form);
    j["scales"] = m.scales;
    if (const auto* lin = std::get_if<LinearKernel>(&spec.kernel)) {
        j["premap"] = lin->premap ? Json(lin->premap->name) : Json(nullptr);
    } else {
        j["gamma"] = std::get<NonlinearKernel>(spec.kernel).gamma;
    }
    j["nugget"] = spec.nugget;
    return j;
}

KernelSpec kernel_from_json(const Json& j) {
    MaternParams m;
    m.nu = get<double>(j, "nu", "kernel");
    m.sigma2 = get<double>(j, "sigma2", "kernel");
    if (j.contains("form")) m.form = psi_form_from_string(get<std::string>(j, "form", "kernel"));
    if (j.contains("scales")) m.scales = get<std::vector<double>>(j, "scales", "kernel");
    const KernelFamily family = kernel_family_from_string(get<std::string>(j, "family", "kernel"));
    KernelSpec spec;
    if (family == KernelFamily::Linear) {
        std::optional<PointwiseMap> premap;
        if (j.contains("premap") && !j.at("premap").is_null()) premap = pointwise_map(get<std::string>(j, "premap", "kernel"));
        spec = KernelSpec::linear(std::move(m), std::move(premap));
    } else {
        spec = KernelSpec::nonlinear(std::move(m), get<double>(j, "gamma", "kernel"));
    }
    if (j.contains("nugget")) spec.nugget = get<double>(j, "nugget", "kernel");
    spec.validate();
    return spec;
}

FunctionalInput resolve_input(const Json& entry, const GridPtr& grid, const std::string& base_dir) {
    if (entry.is_string()) return resolve_label(entry.get<std::string>(), grid, base_dir);
    if (entry.is_object() && entry.contains("csv")) {
        const auto rel = get<std::string>(entry, "csv", "input");
        return read_functional_csv((fs::path(base_dir) / rel).string(), grid).with_label(rel);
    }
    throw FormatError("input entries must be an expression string or {\"csv\": path}");
}

std::vector<FunctionalInput> resolve_inputs(const Json& list, const GridPtr& grid, const std::string& base_dir) {
    if (!list.is_array()) throw FormatError("inputs must be an array");
    std::vector<FunctionalInput> out;
    out.reserve(list.size());
    for (std::size_t i = 0; i < list.size(); ++i) {
        try {
            out.push_back(resolve_input(list[i], grid, base_dir));
        } catch (const ParseError& e) {
            throw FormatError("input " + std::to_string(i + 1) + ": " + e.what());
        }
    }
    return out;
}

TrainingSet load_training_set(const std::string& path, std::optional<std::size_t> resolution_override) {
    const Json j = read_json_file(path);
    TrainingSet t;
    t.grid = grid_from_json(get<Json>(j, "grid", path), resolution_override);
    t.inputs = resolve_inputs(get<Json>(j, "inputs", path), t.grid, parent_dir(path));
    t.outputs = vector_from(get<Json>(j, "outputs", path), path + ": outputs");
    if (static_cast<std::size_t>(t.outputs.size()) != t.inputs.size()) {
        throw FormatError(path + ": " + std::to_string(t.inputs.size()) + " inputs but " +
                          std::to_string(t.outputs.size()) + " outputs");
    }
    return t;
}

GramChecksum gram_checksum(const Eigen::MatrixXd& gram) {
    return {gram.trace(), gram.norm(), gram.sum()};
}

bool checksum_matches(const GramChecksum& a, const GramChecksum& b, double rel_tol) {
    const auto close = [rel_tol](double x, double y) {
        return std::abs(x - y) <= rel_tol * std::max({std::abs(x), std::abs(y), 1e-300});
    };
    // The entry sum can cancel, so compare it on the Frobenius scale.
    return close(a.trace, b.trace) && close(a.frobenius, b.frobenius) &&
           std::abs(a.sum - b.sum) <= rel_tol * std::max(a.frobenius, b.frobenius);
}

Json model_to_json(const GPModel& model) {
    Json j;
    j["format"] = "figp-model";
    j["version"] = kFormatVersion;
    j["kernel"] = kernel_to_json(model.spec());
    j["mean"] = model.mean_mode() == MeanMode::Profiled ? "profiled" : "zero";
    j["mu"] = model.mu();
    j["log_likelihood"] = model.log_likelihood();
    j["grid"] = grid_to_json(model.inputs()[0].grid());
    Json inputs = Json::array();
    for (const auto& g : model.inputs()) inputs.push_back(Json{{"label", g.label()}, {"values", vector_json(g.values())}});
    j["inputs"] = std::move(inputs);
    j["outputs"] = vector_json(model.y());
    const GramChecksum c = gram_checksum(model.evaluator().matrix(model.inputs()));
    j["gram_checksum"] = Json{{"trace", c.trace}, {"frobenius", c.frobenius}, {"sum", c.sum}};
    return j;
}

GPModel model_from_json(const Json& j) {
    check_format(j, "figp-model");
    const KernelSpec spec = kernel_from_json(get<Json>(j, "kernel", "model"));
    const auto mean_name = get<std::string>(j, "mean", "model");
    if (mean_name != "profiled" && mean_name != "zero") throw FormatError("model: mean must be \"profiled\" or \"zero\"");
    const GridPtr grid = grid_from_json(get<Json>(j, "grid", "model"));
    const Json list = get<Json>(j, "inputs", "model");
    if (!list.is_array() || list.empty()) throw FormatError("model: inputs must be a non-empty array");
    std::vector<FunctionalInput> inputs;
    for (std::size_t i = 0; i < list.size(); ++i) {
        const std::string what = "model input " + std::to_string(i + 1);
        Eigen::VectorXd values = vector_from(get<Json>(list[i], "values", what), what);
        if (static_cast<std::size_t>(values.size()) != grid->size()) throw FormatError(what + ": value count does not match the grid");
        inputs.emplace_back(grid, std::move(values), list[i].value("label", std::string{}));
    }
    Eigen::VectorXd y = vector_from(get<Json>(j, "outputs", "model"), "model outputs");
    GPModel model = GPModel::condition(spec, std::move(inputs), std::move(y),
                                       mean_name == "profiled" ? MeanMode::Profiled : MeanMode::Zero);
    const Json cj = get<Json>(j, "gram_checksum", "model");
    const GramChecksum stored{get<double>(cj, "trace", "checksum"), get<double>(cj, "frobenius", "checksum"),
                              get<double>(cj, "sum", "checksum")};
    const GramChecksum rebuilt = gram_checksum(model.evaluator().matrix(model.inputs()));
    if (!checksum_matches(stored, rebuilt)) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "model: rebuilt Gram does not match the stored checksum (trace " << rebuilt.trace << " vs "
            << stored.trace << ", frobenius " << rebuilt.frobenius << " vs " << stored.frobenius << ", sum "
            << rebuilt.sum << " vs " << stored.sum << ")";
        throw FormatError(msg.str());
    }
    return model;
}

Json emulator_to_json(const PCAEmulator& emulator) {
    Json j;
    j["format"] = "figp-emulator";
    j["version"] = kFormatVersion;
    j["field_shape"] = emulator.field_shape();
    j["mean_field"] = vector_json(emulator.mean_field());
    Json comps = Json::array();
    for (Eigen::Index l = 0; l < emulator.components().cols(); ++l) comps.push_back(vector_json(emulator.components().col(l)));
    j["components"] = std::move(comps);
    j["explained_variance_ratio"] = vector_json(emulator.explained_variance_ratio());
    Json models = Json::array();
    for (const auto& m : emulator.score_models()) models.push_back(model_to_json(m));
    j["score_models"] = std::move(models);
    return j;
}

PCAEmulator emulator_from_json(const Json& j) {
    check_format(j, "figp-emulator");
    Eigen::VectorXd mean = vector_from(get<Json>(j, "mean_field", "emulator"), "emulator mean_field");
    const Json comps = get<Json>(j, "components", "emulator");
    if (!comps.is_array()) throw FormatError("emulator: components must be an array");
    Eigen::MatrixXd u(mean.size(), static_cast<Eigen::Index>(comps.size()));
    for (std::size_t l = 0; l < comps.size(); ++l) {
        const Eigen::VectorXd c = vector_from(comps[l], "emulator component");
        if (c.size() != mean.size()) throw FormatError("emulator: component length does not match mean_field");
        u.col(static_cast<Eigen::Index>(l)) = c;
    }
    const Json models_json = get<Json>(j, "score_models", "emulator");
    std::vector<GPModel> models;
    for (const auto& mj : models_json) models.push_back(model_from_json(mj));
    return PCAEmulator::assemble(std::move(mean), std::move(u), std::move(models),
                                 vector_from(get<Json>(j, "explained_variance_ratio", "emulator"), "emulator ratios"),
                                 get<std::vector<std::size_t>>(j, "field_shape", "emulator"));
}

FieldDataset load_field_dataset(const std::string& manifest_path, std::optional<std::size_t> resolution_override) {
    const Json m = read_json_file(manifest_path);
    const std::string base = parent_dir(manifest_path);
    FieldDataset ds;
    const GridPtr grid = grid_from_json(get<Json>(m, "grid", manifest_path), resolution_override);
    ds.field_shape = get<std::vector<std::size_t>>(m, "field_shape", manifest_path);
    const auto csv_name = get<std::string>(m, "fields", manifest_path);
    const auto rows = parse_csv(read_file((fs::path(base) / csv_name).string()));
    if (rows.empty()) throw FormatError(csv_name + ": no rows");
    const std::size_t p = rows[0].size() - 1;
    if (p == 0) throw FormatError(csv_name + ": rows need a label and at least one field value");
    ds.fields.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(p));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != p + 1) {
            throw FormatError(csv_name + ": row " + std::to_string(r + 1) + " has " + std::to_string(rows[r].size()) +
                              " columns, expected " + std::to_string(p + 1));
        }
        try {
            ds.inputs.push_back(resolve_label(rows[r][0], grid, base));
        } catch (const ParseError& e) {
            throw FormatError(csv_name + ": row " + std::to_string(r + 1) + " input: " + e.what());
        }
        for (std::size_t c = 0; c < p; ++c) {
            try {
                ds.fields(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = std::stod(rows[r][c + 1]);
            } catch (const std::exception&) {
                throw FormatError(csv_name + ": row " + std::to_string(r + 1) + " column " + std::to_string(c + 2) +
                                  " is not a number");
            }
        }
    }
    ds.validate();
    return ds;
}

void save_field_dataset(const std::string& manifest_path, const FieldDataset& dataset) {
    dataset.validate();
    const fs::path mp(manifest_path);
    const std::string csv_name = mp.stem().string() + ".csv";
    std::ostringstream csv;
    for (std::size_t r = 0; r < dataset.size(); ++r) {
        const std::string& label = dataset.inputs[r].label();
        if (label.empty() || label.find(',') != std::string::npos) {
            throw std::invalid_argument("save_field_dataset: input " + std::to_string(r + 1) +
                                        " needs a comma-free label that resolves to the input");
        }
        csv << label;
        for (Eigen::Index c = 0; c < dataset.fields.cols(); ++c) {
            csv << ',' << format_number(dataset.fields(static_cast<Eigen::Index>(r), c));
        }
        csv << '\n';
    }
    Json m;
    m["grid"] = grid_to_json(dataset.inputs[0].grid());
    m["field_shape"] = dataset.field_shape;
    m["fields"] = csv_name;
    atomic_write((mp.parent_path() / csv_name).string(), csv.str());
    atomic_write(manifest_path, dump_json(m));
}

Json read_json_file(const std::string& path) {
    const std::string text = read_file(path);
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(path + ": invalid JSON: " + e.what());
    }
}

std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace figp
