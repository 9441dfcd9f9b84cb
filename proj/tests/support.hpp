#ifndef FIGP_TESTS_SUPPORT_HPP
#define FIGP_TESTS_SUPPORT_HPP

#include <cmath>
#include <filesystem>
#include <numbers>
#include <string>

#include "figp/domain.hpp"
#include "figp/expression.hpp"

namespace figp::test {

inline GridPtr unit_square(std::size_t res = 20) { return build_grid(Domain::unit_cube(2), res); }
inline GridPtr unit_interval(std::size_t res = 64) { return build_grid(Domain::unit_cube(1), res); }
inline GridPtr periodic_interval(std::size_t res = 64) {
    return build_grid(Domain({{0.0, 2.0 * std::numbers::pi}}), res);
}

inline FunctionalInput fn(const std::string& expr, const GridPtr& grid) {
    return sample_expression(parse_expression(expr), grid, expr);
}

inline double rel_diff(double a, double b) {
    const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
    return std::abs(a - b) / scale;
}

// Fresh scratch directory under the system temp dir, removed on destruction.
class ScratchDir {
public:
    explicit ScratchDir(const std::string& name) {
        path_ = std::filesystem::temp_directory_path() / ("figp_test_" + name);
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~ScratchDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    ScratchDir(const ScratchDir&) = delete;
    ScratchDir& operator=(const ScratchDir&) = delete;
    [[nodiscard]] const std::filesystem::path& path() const { return path_; }
    [[nodiscard]] std::string str() const { return path_.string(); }

private:
    std::filesystem::path path_;
};

}  // namespace figp::test

#endif  // FIGP_TESTS_SUPPORT_HPP
