#include "figp/domain.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "figp/expression.hpp"

namespace figp {

Domain::Domain(std::vector<Interval> bounds) : bounds_(std::move(bounds)) {
    if (bounds_.empty()) {
        throw std::invalid_argument("domain must have at least one dimension");
    }
    for (const auto& iv : bounds_) {
        if (!(std::isfinite(iv.lo) && std::isfinite(iv.hi) && iv.lo < iv.hi)) {
            throw std::invalid_argument("domain interval must satisfy lo < hi");
        }
    }
}

Domain Domain::unit_cube(std::size_t d) { return Domain(std::vector<Interval>(d, Interval{0.0, 1.0})); }

double Domain::volume() const {
    double v = 1.0;
    for (const auto& iv : bounds_) v *= iv.length();
    return v;
}

bool Domain::contains(std::span<const double> x, double tol) const {
    if (x.size() != bounds_.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double slack = tol * std::max(1.0, bounds_[i].length());
        if (x[i] < bounds_[i].lo - slack || x[i] > bounds_[i].hi + slack) return false;
    }
    return true;
}

Eigen::VectorXd Domain::center() const {
    Eigen::VectorXd c(static_cast<Eigen::Index>(dim()));
    for (std::size_t i = 0; i < dim(); ++i) c[static_cast<Eigen::Index>(i)] = 0.5 * (bounds_[i].lo + bounds_[i].hi);
    return c;
}

std::string to_string(QuadratureRule rule) {
    switch (rule) {
        case QuadratureRule::GaussLegendre: return "gauss-legendre";
        case QuadratureRule::UniformMidpoint: return "midpoint";
    }
    return "unknown";
}

QuadratureRule quadrature_rule_from_string(const std::string& name) {
    if (name == "gauss-legendre" || name == "gl") return QuadratureRule::GaussLegendre;
    if (name == "midpoint") return QuadratureRule::UniformMidpoint;
    throw std::invalid_argument("unknown quadrature rule: " + name);
}

void gauss_legendre(std::size_t n, std::vector<double>& nodes, std::vector<double>& weights) {
    nodes.assign(n, 0.0);
    weights.assign(n, 0.0);
    const std::size_t half = (n + 1) / 2;
    for (std::size_t i = 0; i < half; ++i) {
        // Tricomi's initial guess, then Newton on P_n.
        double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0;
            double p1 = x;
            for (std::size_t k = 2; k <= n; ++k) {
                const double kk = static_cast<double>(k);
                const double p2 = ((2.0 * kk - 1.0) * x * p1 - (kk - 1.0) * p0) / kk;
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) p0 = 1.0;
            dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        // Re-evaluate the derivative at the converged node.
        double p0 = 1.0;
        double p1 = x;
        for (std::size_t k = 2; k <= n; ++k) {
            const double kk = static_cast<double>(k);
            const double p2 = ((2.0 * kk - 1.0) * x * p1 - (kk - 1.0) * p0) / kk;
            p0 = p1;
            p1 = p2;
        }
        dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if (n % 2 == 1) nodes[n / 2] = 0.0;
}

QuadratureGrid::QuadratureGrid(Domain domain, std::size_t resolution, QuadratureRule rule)
    : domain_(std::move(domain)), resolution_(resolution), rule_(rule) {
    if (resolution_ < 2) throw std::invalid_argument("quadrature resolution must be at least 2 per dimension");
    const std::size_t d = domain_.dim();

    std::vector<double> ref_nodes(resolution_);
    std::vector<double> ref_weights(resolution_);
    if (rule_ == QuadratureRule::GaussLegendre) {
        gauss_legendre(resolution_, ref_nodes, ref_weights);
    } else {
        for (std::size_t i = 0; i < resolution_; ++i) {
            ref_nodes[i] = -1.0 + (2.0 * static_cast<double>(i) + 1.0) / static_cast<double>(resolution_);
            ref_weights[i] = 2.0 / static_cast<double>(resolution_);
        }
    }

    std::size_t total = 1;
    for (std::size_t k = 0; k < d; ++k) total *= resolution_;
    nodes_.resize(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(d));
    weights_.resize(static_cast<Eigen::Index>(total));

    std::vector<std::size_t> idx(d, 0);
    for (std::size_t flat = 0; flat < total; ++flat) {
        double w = 1.0;
        for (std::size_t k = 0; k < d; ++k) {
            const auto& iv = domain_[k];
            const double half = 0.5 * iv.length();
            nodes_(static_cast<Eigen::Index>(flat), static_cast<Eigen::Index>(k)) =
                iv.lo + half * (ref_nodes[idx[k]] + 1.0);
            w *= half * ref_weights[idx[k]];
        }
        weights_[static_cast<Eigen::Index>(flat)] = w;
        // Odometer increment, last axis fastest.
        for (std::size_t k = d; k-- > 0;) {
            if (++idx[k] < resolution_) break;
            idx[k] = 0;
        }
    }
}

bool QuadratureGrid::same_as(const QuadratureGrid& other) const {
    return this == &other ||
           (domain_ == other.domain_ && resolution_ == other.resolution_ && rule_ == other.rule_);
}

GridPtr build_grid(const Domain& domain, std::size_t resolution, QuadratureRule rule) {
    return std::make_shared<const QuadratureGrid>(domain, resolution, rule);
}

std::size_t default_resolution(std::size_t dim) { return dim == 1 ? 64 : 20; }

FunctionalInput::FunctionalInput(GridPtr grid, Eigen::VectorXd values, std::string label)
    : grid_(std::move(grid)), values_(std::move(values)), label_(std::move(label)) {
    if (!grid_) throw std::invalid_argument("functional input requires a grid");
    if (static_cast<std::size_t>(values_.size()) != grid_->size()) {
        throw std::invalid_argument("functional input length does not match the grid node count");
    }
    if (!values_.allFinite()) throw Error("functional input has non-finite values");
}

FunctionalInput FunctionalInput::with_label(std::string label) const {
    return FunctionalInput(grid_, values_, std::move(label));
}

bool same_grid(const FunctionalInput& a, const FunctionalInput& b) { return a.grid().same_as(b.grid()); }

void require_same_grid(const FunctionalInput& a, const FunctionalInput& b) {
    if (!same_grid(a, b)) throw GridMismatch();
}

void require_same_grid(std::span<const FunctionalInput> inputs) {
    for (std::size_t i = 1; i < inputs.size(); ++i) require_same_grid(inputs[0], inputs[i]);
}

FunctionalInput linear_combination(double a, const FunctionalInput& g1, double b, const FunctionalInput& g2) {
    require_same_grid(g1, g2);
    return FunctionalInput(g1.grid_ptr(), a * g1.values() + b * g2.values());
}

FunctionalInput operator+(const FunctionalInput& a, const FunctionalInput& b) { return linear_combination(1.0, a, 1.0, b); }
FunctionalInput operator-(const FunctionalInput& a, const FunctionalInput& b) { return linear_combination(1.0, a, -1.0, b); }
FunctionalInput operator*(double s, const FunctionalInput& g) { return FunctionalInput(g.grid_ptr(), s * g.values()); }

FunctionalInput constant_function(const GridPtr& grid, double value) {
    return FunctionalInput(grid, Eigen::VectorXd::Constant(static_cast<Eigen::Index>(grid->size()), value));
}

FunctionalInput sample_function(const PointFunction& f, const GridPtr& grid, std::string label) {
    const auto& nodes = grid->nodes();
    Eigen::VectorXd values(nodes.rows());
    std::vector<double> x(static_cast<std::size_t>(nodes.cols()));
    for (Eigen::Index i = 0; i < nodes.rows(); ++i) {
        for (Eigen::Index k = 0; k < nodes.cols(); ++k) x[static_cast<std::size_t>(k)] = nodes(i, k);
        const double v = f(x);
        if (!std::isfinite(v)) {
            std::ostringstream msg;
            msg << "function evaluates to a non-finite value at node " << i;
            throw Error(msg.str());
        }
        values[i] = v;
    }
    return FunctionalInput(grid, std::move(values), std::move(label));
}

FunctionalInput sample_function(const std::string& expr, const GridPtr& grid) {
    return sample_expression(parse_expression(expr), grid, expr);
}

double l2_inner(const FunctionalInput& g1, const FunctionalInput& g2) {
    require_same_grid(g1, g2);
    const auto& w = g1.grid().weights();
    return (w.array() * (g1.values().array() * g2.values().array())).sum();
}

double l2_norm(const FunctionalInput& g) {
    const auto& w = g.grid().weights();
    return std::sqrt((w.array() * g.values().array().square()).sum());
}

double l2_distance(const FunctionalInput& g1, const FunctionalInput& g2) {
    require_same_grid(g1, g2);
    const auto& w = g1.grid().weights();
    return std::sqrt((w.array() * (g1.values() - g2.values()).array().square()).sum());
}

double integrate(const FunctionalInput& g) { return g.grid().weights().dot(g.values()); }

FunctionalInput apply_pointwise_map(const FunctionalInput& g, const std::function<double(double)>& map) {
    Eigen::VectorXd out(g.values().size());
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        out[i] = map(g.values()[i]);
        if (!std::isfinite(out[i])) throw Error("pointwise map produced a non-finite value");
    }
    return FunctionalInput(g.grid_ptr(), std::move(out), g.label());
}

FunctionalInput read_functional_csv(const std::string& path, const GridPtr& grid) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open functional input CSV: " + path);
    const auto& nodes = grid->nodes();
    const std::size_t d = grid->dim();
    Eigen::VectorXd values(nodes.rows());
    Eigen::Index row = 0;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        std::vector<double> cols;
        std::stringstream ss(line);
        std::string cell;
        bool numeric = true;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                cols.push_back(std::stod(cell, &used));
            } catch (const std::exception&) {
                numeric = false;
                break;
            }
        }
        if (!numeric) {
            if (first) {
                first = false;
                continue;
            }
            throw Error("non-numeric row in functional input CSV: " + path);
        }
        first = false;
        if (cols.size() != d + 1) throw Error("functional input CSV rows need d coordinates plus one value: " + path);
        if (row >= nodes.rows()) throw Error("functional input CSV has more rows than grid nodes: " + path);
        for (std::size_t k = 0; k < d; ++k) {
            const double expect = nodes(row, static_cast<Eigen::Index>(k));
            if (std::abs(cols[k] - expect) > 1e-9 * std::max(1.0, std::abs(expect))) {
                std::ostringstream msg;
                msg << "functional input CSV row " << row << " does not match grid node coordinates: " << path;
                throw Error(msg.str());
            }
        }
        values[row++] = cols[d];
    }
    if (row != nodes.rows()) throw Error("functional input CSV has fewer rows than grid nodes: " + path);
    return FunctionalInput(grid, std::move(values), path);
}

}  // namespace figp
