#ifndef FIGP_IO_HPP
#define FIGP_IO_HPP

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "figp/domain.hpp"
#include "figp/emulator.hpp"
#include "figp/gp.hpp"
#include "figp/kernels.hpp"

namespace figp {

using Json = nlohmann::ordered_json;

/// Malformed or inconsistent file content.
class FormatError : public Error {
public:
    using Error::Error;
};

/// {"domain": [[lo, hi], ...], "resolution": n, "rule": "gauss-legendre" | "midpoint"}
Json grid_to_json(const QuadratureGrid& grid);
/// `resolution_override` replaces the stored resolution when given.
GridPtr grid_from_json(const Json& j, std::optional<std::size_t> resolution_override = std::nullopt);

Json kernel_to_json(const KernelSpec& spec);
KernelSpec kernel_from_json(const Json& j);

/// One input entry: an expression string in x1..xd, or {"csv": path} with the path taken
/// relative to `base_dir`. A bare string ending in ".csv" that names an existing file is read
/// as CSV as well.
FunctionalInput resolve_input(const Json& entry, const GridPtr& grid, const std::string& base_dir);
std::vector<FunctionalInput> resolve_inputs(const Json& list, const GridPtr& grid, const std::string& base_dir);

/// {"grid": {...}, "inputs": [...], "outputs": [...]}
struct TrainingSet {
    GridPtr grid;
    std::vector<FunctionalInput> inputs;
    Eigen::VectorXd outputs;
};

TrainingSet load_training_set(const std::string& path, std::optional<std::size_t> resolution_override = std::nullopt);

/// Summary of the noise-free Gram used to detect a model file that no longer reproduces
/// its own covariance: trace, Frobenius norm and entry sum.
struct GramChecksum {
    double trace = 0.0;
    double frobenius = 0.0;
    double sum = 0.0;
};

GramChecksum gram_checksum(const Eigen::MatrixXd& gram);
bool checksum_matches(const GramChecksum& a, const GramChecksum& b, double rel_tol = 1e-10);

/// The model file stores the kernel, mean handling, grid, training inputs (node values) and
/// outputs; the Gram is rebuilt on load and checked against the stored checksum.
Json model_to_json(const GPModel& model);
GPModel model_from_json(const Json& j);

Json emulator_to_json(const PCAEmulator& emulator);
PCAEmulator emulator_from_json(const Json& j);

/// Reads {"grid": {...}, "field_shape": [...], "fields": "runs.csv"}. Each CSV row is an input
/// label (expression or CSV path relative to the manifest) followed by the p field values.
FieldDataset load_field_dataset(const std::string& manifest_path,
                                std::optional<std::size_t> resolution_override = std::nullopt);

/// Writes the manifest and the CSV next to it (file name `<stem>.csv`), atomically. Rows are
/// labelled with the inputs' labels, which must therefore resolve again on load.
void save_field_dataset(const std::string& manifest_path, const FieldDataset& dataset);

Json read_json_file(const std::string& path);
std::string dump_json(const Json& j);

}  // namespace figp

#endif  // FIGP_IO_HPP
