#ifndef FIGP_REPRODUCE_HPP
#define FIGP_REPRODUCE_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "figp/designs.hpp"
#include "figp/gp.hpp"
#include "figp/io.hpp"

namespace figp {

struct ReproduceConfig {
    std::string out_dir = ".";
    std::uint64_t seed = 42;
    std::optional<std::size_t> grid_res;
    FitConfig fit;                  // seed is overwritten with `seed`
    std::size_t test_draws = 100;   // table2
    std::size_t paths = 5;          // figure2 / figure3
    std::size_t alpha_points = 101; // figure2 / figure3
    std::size_t mc_replicates = 100;  // mspe_decay
    std::size_t mspe_tests = 200;     // mspe_decay
};

/// Raised with the name of the stage that failed.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what) : Error(stage + ": " + what), stage_(std::move(stage)) {}
    [[nodiscard]] const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

// --- scalar benchmark functionals on [0,1]^2 ---------------------------------------------

enum class Benchmark { Integral, SquareIntegral, SineIntegral };
constexpr std::array<Benchmark, 3> kBenchmarks{Benchmark::Integral, Benchmark::SquareIntegral, Benchmark::SineIntegral};

std::string benchmark_name(Benchmark b);  // "f1", "f2", "f3"
/// Quadrature value of int g, int g^2 or int sin(g).
double evaluate_benchmark(Benchmark b, const FunctionalInput& g);

/// The eight training expressions, in column order.
const std::vector<std::string>& table1_expressions();
std::vector<FunctionalInput> table1_inputs(const GridPtr& grid);
/// 8 x 3 matrix of benchmark values.
Eigen::MatrixXd table1_outputs(const std::vector<FunctionalInput>& inputs);

/// The three test families for one draw of (alpha1, alpha2, beta, kappa).
struct TestDraw {
    double alpha1 = 0.0, alpha2 = 0.0, beta = 0.0, kappa = 0.0;
    [[nodiscard]] std::array<std::string, 3> expressions() const;
};
/// Draws in order alpha1, alpha2, beta, kappa from one Rng(seed), uniform on [0,1].
std::vector<TestDraw> test_draws(std::uint64_t seed, std::size_t count);

struct Table2Cell {
    double loocv = 0.0;
    double mape = 0.0;                 // per draw: mean over families, then mean over draws
    double mape_draw_first = 0.0;      // per family: mean over draws, then mean over families
    std::array<double, 3> family_mape{};  // g9, g10, g11 separately
    bool ok = false;
    std::string message;
};

struct Table2 {
    // cells[benchmark][family], family 0 = linear, 1 = nonlinear
    std::array<std::array<Table2Cell, 2>, 3> cells;
    std::array<KernelFamily, 3> selected{};  // by LOOCV
    std::array<KernelFamily, 3> best_mape{};
};

Table2 compute_table2(const GridPtr& grid, const FitConfig& fit, std::uint64_t seed, std::size_t draws);

// --- MSPE decay setup --------------------------------------------------------------------

struct DecayExperiment {
    DecayCurve knot;
    DecayCurve eigen;
    std::vector<double> knot_mean;        // projection MSPE per size
    std::vector<double> eigen_mean;
    std::vector<double> difference_se;    // standard error of (eigen - knot) over test functions
};

/// Seed of the test-function draws, kept apart from the Monte Carlo sub-streams.
std::uint64_t decay_test_seed(std::uint64_t seed);

/// Knot and eigenfunction designs on [0,1] for the linear kernel with the given base Matérn,
/// tests drawn from the base process.
DecayExperiment run_decay_experiment(const MaternParams& base, std::size_t resolution,
                                     const std::vector<std::size_t>& sizes, std::size_t tests,
                                     std::size_t replicates, std::uint64_t seed);

// --- targets ------------------------------------------------------------------------------

const std::vector<std::string>& reproduce_targets();

struct ReproduceReport {
    std::vector<std::string> files;  // written, relative to out_dir
    Json summary;
};

/// Writes the target's files into config.out_dir (atomically) and returns a summary.
/// Failures are raised as StageError.
ReproduceReport run_reproduce(const std::string& target, const ReproduceConfig& config);

}  // namespace figp

#endif  // FIGP_REPRODUCE_HPP
