#ifndef FIGP_DOMAIN_HPP
#define FIGP_DOMAIN_HPP

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace figp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Two functional inputs live on different quadrature grids.
class GridMismatch : public Error {
public:
    GridMismatch() : Error("functional inputs are defined on different quadrature grids") {}
};

struct Interval {
    double lo = 0.0;
    double hi = 1.0;

    [[nodiscard]] double length() const { return hi - lo; }
    friend bool operator==(const Interval&, const Interval&) = default;
};

/// Axis-aligned box Omega = [a_1,b_1] x ... x [a_d,b_d].
class Domain {
public:
    explicit Domain(std::vector<Interval> bounds);

    static Domain unit_cube(std::size_t d);

    [[nodiscard]] std::size_t dim() const { return bounds_.size(); }
    [[nodiscard]] const std::vector<Interval>& bounds() const { return bounds_; }
    [[nodiscard]] const Interval& operator[](std::size_t i) const { return bounds_[i]; }
    [[nodiscard]] double volume() const;
    [[nodiscard]] bool contains(std::span<const double> x, double tol = 1e-12) const;
    [[nodiscard]] Eigen::VectorXd center() const;

    friend bool operator==(const Domain&, const Domain&) = default;

private:
    std::vector<Interval> bounds_;
};

enum class QuadratureRule { GaussLegendre, UniformMidpoint };

std::string to_string(QuadratureRule rule);
QuadratureRule quadrature_rule_from_string(const std::string& name);

/// Gauss-Legendre nodes and weights on [-1, 1], nodes ascending.
void gauss_legendre(std::size_t n, std::vector<double>& nodes, std::vector<double>& weights);

/// Tensor-product quadrature over a Domain. Node i has coordinates nodes().row(i);
/// the first coordinate varies slowest.
class QuadratureGrid {
public:
    QuadratureGrid(Domain domain, std::size_t resolution, QuadratureRule rule);

    [[nodiscard]] const Domain& domain() const { return domain_; }
    [[nodiscard]] std::size_t dim() const { return domain_.dim(); }
    [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(weights_.size()); }
    [[nodiscard]] std::size_t resolution() const { return resolution_; }
    [[nodiscard]] QuadratureRule rule() const { return rule_; }
    [[nodiscard]] const Eigen::MatrixXd& nodes() const { return nodes_; }
    [[nodiscard]] const Eigen::VectorXd& weights() const { return weights_; }

    /// Same domain, rule and resolution; such grids have identical nodes.
    [[nodiscard]] bool same_as(const QuadratureGrid& other) const;

private:
    Domain domain_;
    std::size_t resolution_;
    QuadratureRule rule_;
    Eigen::MatrixXd nodes_;
    Eigen::VectorXd weights_;
};

using GridPtr = std::shared_ptr<const QuadratureGrid>;

/// Tensor-product grid with `resolution` points per dimension.
GridPtr build_grid(const Domain& domain, std::size_t resolution,
                   QuadratureRule rule = QuadratureRule::GaussLegendre);

/// Resolution used when none is given: 64 points in 1-d, 20 per axis otherwise.
std::size_t default_resolution(std::size_t dim);

/// A function g on Omega, stored as its values at the nodes of a shared grid.
class FunctionalInput {
public:
    FunctionalInput(GridPtr grid, Eigen::VectorXd values, std::string label = {});

    [[nodiscard]] const GridPtr& grid_ptr() const { return grid_; }
    [[nodiscard]] const QuadratureGrid& grid() const { return *grid_; }
    [[nodiscard]] const Eigen::VectorXd& values() const { return values_; }
    [[nodiscard]] const std::string& label() const { return label_; }
    [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(values_.size()); }

    [[nodiscard]] FunctionalInput with_label(std::string label) const;

private:
    GridPtr grid_;
    Eigen::VectorXd values_;
    std::string label_;
};

bool same_grid(const FunctionalInput& a, const FunctionalInput& b);
void require_same_grid(const FunctionalInput& a, const FunctionalInput& b);
void require_same_grid(std::span<const FunctionalInput> inputs);

/// a*g1 + b*g2, pointwise.
FunctionalInput linear_combination(double a, const FunctionalInput& g1, double b,
                                   const FunctionalInput& g2);
FunctionalInput operator+(const FunctionalInput& a, const FunctionalInput& b);
FunctionalInput operator-(const FunctionalInput& a, const FunctionalInput& b);
FunctionalInput operator*(double s, const FunctionalInput& g);

FunctionalInput constant_function(const GridPtr& grid, double value);

using PointFunction = std::function<double(std::span<const double>)>;

/// Evaluates f at every node. Throws if any value is non-finite.
FunctionalInput sample_function(const PointFunction& f, const GridPtr& grid, std::string label = {});

/// Parses `expr` (see expression.hpp) and samples it on the grid.
FunctionalInput sample_function(const std::string& expr, const GridPtr& grid);

/// Sum_i w_i g1_i g2_i.
double l2_inner(const FunctionalInput& g1, const FunctionalInput& g2);
double l2_norm(const FunctionalInput& g);
double l2_distance(const FunctionalInput& g1, const FunctionalInput& g2);

/// Integral of g over the domain.
double integrate(const FunctionalInput& g);

FunctionalInput apply_pointwise_map(const FunctionalInput& g, const std::function<double(double)>& map);

/// Reads a functional input from CSV: d coordinate columns followed by one value column,
/// rows in grid node order. An optional non-numeric header row is skipped.
FunctionalInput read_functional_csv(const std::string& path, const GridPtr& grid);

}  // namespace figp

#endif  // FIGP_DOMAIN_HPP
