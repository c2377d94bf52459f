#include "scbcov/bspline.hpp"

#include "scbcov/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace scbcov {

SplineBasis::SplineBasis(int order, int interior_knots)
    : order_(order), interior_knots_(interior_knots) {
    if (order < 1) {
        throw InvalidArgument(fmt::format("spline order must be >= 1, got {}", order));
    }
    if (order > 30) {
        throw InvalidArgument(fmt::format("spline order {} exceeds the supported maximum of 30", order));
    }
    if (interior_knots < 0) {
        throw InvalidArgument(fmt::format("interior knot count must be >= 0, got {}", interior_knots));
    }
    knots_.reserve(static_cast<std::size_t>(interior_knots + 2 * order));
    knots_.insert(knots_.end(), static_cast<std::size_t>(order), 0.0);
    for (int l = 1; l <= interior_knots; ++l) {
        knots_.push_back(static_cast<double>(l) / (interior_knots + 1));
    }
    knots_.insert(knots_.end(), static_cast<std::size_t>(order), 1.0);
}

int SplineBasis::span_index(double x) const {
    const int degree = order_ - 1;
    const int last = dimension() - 1;
    int k = degree + std::min(static_cast<int>(x * (interior_knots_ + 1)), interior_knots_);
    k = std::clamp(k, degree, last);
    while (k > degree && x < knots_[k]) {
        --k;
    }
    while (k < last && x >= knots_[k + 1]) {
        ++k;
    }
    return k;
}

int SplineBasis::eval_nonzero(double x, double* values) const {
    if (!(x >= 0.0 && x <= 1.0)) {
        throw InvalidArgument(fmt::format("B-spline abscissa {} lies outside [0, 1]", x));
    }
    const int degree = order_ - 1;
    const int k = span_index(x);
    // Cox-de Boor triangle on the p nonzero functions of span k.
    double left[32];
    double right[32];
    values[0] = 1.0;
    for (int j = 1; j <= degree; ++j) {
        left[j] = x - knots_[k + 1 - j];
        right[j] = knots_[k + j] - x;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            const double temp = values[r] / (right[r + 1] + left[j - r]);
            values[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        values[j] = saved;
    }
    return k - degree;
}

Eigen::VectorXd SplineBasis::eval(double x) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(dimension());
    double local[32];
    const int first = eval_nonzero(x, local);
    for (int r = 0; r < order_; ++r) {
        out[first + r] = local[r];
    }
    return out;
}

double SplineBasis::eval_spline(const Eigen::Ref<const Eigen::VectorXd>& coeffs, double x) const {
    double local[32];
    const int first = eval_nonzero(x, local);
    double acc = 0.0;
    for (int r = 0; r < order_; ++r) {
        acc += coeffs[first + r] * local[r];
    }
    return acc;
}

Eigen::MatrixXd SplineBasis::eval_matrix(const std::vector<double>& xs) const {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(xs.size()), dimension());
    double local[32];
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const int first = eval_nonzero(xs[i], local);
        for (int r = 0; r < order_; ++r) {
            out(static_cast<Eigen::Index>(i), first + r) = local[r];
        }
    }
    return out;
}

SplineBasis make_basis(int order, int interior_knots) {
    return SplineBasis(order, interior_knots);
}

Eigen::VectorXd eval_basis(const SplineBasis& basis, double x) { return basis.eval(x); }

std::vector<double> unit_grid(int grid_size) {
    std::vector<double> grid(static_cast<std::size_t>(grid_size));
    for (int j = 1; j <= grid_size; ++j) {
        grid[static_cast<std::size_t>(j - 1)] = static_cast<double>(j) / grid_size;
    }
    return grid;
}

DesignMatrix design_matrix(const SplineBasis& basis, int grid_size) {
    if (grid_size < basis.dimension()) {
        throw DataError(fmt::format("under-determined design: N = {} grid points but the basis has {} functions",
                                    grid_size, basis.dimension()));
    }
    auto grid = unit_grid(grid_size);
    Eigen::MatrixXd matrix = basis.eval_matrix(grid);
    return DesignMatrix{basis, std::move(matrix), std::move(grid)};
}

LeastSquaresSolver::LeastSquaresSolver(const DesignMatrix& design) : design_(design) {
    const Eigen::MatrixXd gram = design.matrix.transpose() * design.matrix;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    condition_ = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    if (condition_ <= 1e10) {
        llt_.compute(gram);
        if (llt_.info() == Eigen::Success) {
            return;
        }
    }
    qr_.emplace(design.matrix);
    if (qr_->rank() < design.cols()) {
        throw NumericalError(fmt::format("singular design: rank {} < {} basis functions", qr_->rank(),
                                         design.cols()));
    }
}

Eigen::VectorXd LeastSquaresSolver::solve(const Eigen::Ref<const Eigen::VectorXd>& y) const {
    if (y.size() != design_.rows()) {
        throw InvalidArgument(fmt::format("response has {} values, design has {} rows", y.size(), design_.rows()));
    }
    if (qr_) {
        return qr_->solve(y);
    }
    return llt_.solve(design_.matrix.transpose() * y);
}

Eigen::MatrixXd LeastSquaresSolver::solve_rows(const Eigen::Ref<const Eigen::MatrixXd>& ys) const {
    if (ys.cols() != design_.rows()) {
        throw InvalidArgument(fmt::format("responses have {} columns, design has {} rows", ys.cols(), design_.rows()));
    }
    if (qr_) {
        return qr_->solve(ys.transpose()).transpose();
    }
    return llt_.solve(design_.matrix.transpose() * ys.transpose()).transpose();
}

Eigen::VectorXd lsq_fit(const DesignMatrix& design, const Eigen::Ref<const Eigen::VectorXd>& y) {
    return LeastSquaresSolver(design).solve(y);
}

namespace {

double pooled_rss(const DesignMatrix& design, const Eigen::Ref<const Eigen::MatrixXd>& ys) {
    const LeastSquaresSolver solver(design);
    const Eigen::MatrixXd coeffs = solver.solve_rows(ys);
    const Eigen::MatrixXd fitted = coeffs * design.matrix.transpose();
    return (ys - fitted).squaredNorm();
}

}  // namespace

double gcv_score(const DesignMatrix& design, const Eigen::Ref<const Eigen::MatrixXd>& ys) {
    const double dim = design.cols();
    const double grid = design.rows();
    if (dim >= grid) {
        throw InvalidArgument(fmt::format("GCV denominator degenerate: basis dimension {} >= N = {}", dim, grid));
    }
    const double total = static_cast<double>(ys.rows()) * grid;
    const double shrink = 1.0 - dim / grid;
    return pooled_rss(design, ys) / total / (shrink * shrink);
}

double bic_score(const DesignMatrix& design, const Eigen::Ref<const Eigen::MatrixXd>& ys) {
    const double total = static_cast<double>(ys.rows()) * design.rows();
    const double rss = std::max(pooled_rss(design, ys), std::numeric_limits<double>::min());
    return total * std::log(rss / total) + design.cols() * std::log(total);
}

KnotMethod parse_knot_method(std::string_view name) {
    if (name == "formula") {
        return KnotMethod::formula;
    }
    if (name == "gcv") {
        return KnotMethod::gcv;
    }
    if (name == "bic") {
        return KnotMethod::bic;
    }
    throw InvalidArgument(fmt::format("unknown knot selection method '{}' (expected formula, gcv or bic)", name));
}

std::string to_string(KnotMethod method) {
    switch (method) {
        case KnotMethod::formula: return "formula";
        case KnotMethod::gcv: return "gcv";
        case KnotMethod::bic: return "bic";
    }
    return "formula";
}

int knot_formula(int grid_size, double c, double gamma) {
    if (!(c > 0.0)) {
        throw InvalidArgument(fmt::format("knot formula constant c must be positive, got {}", c));
    }
    if (!(gamma > 0.0 && gamma < 1.0)) {
        throw InvalidArgument(fmt::format("knot formula exponent gamma must lie in (0, 1), got {}", gamma));
    }
    if (static_cast<double>(grid_size) <= std::exp(1.0)) {
        throw DataError(fmt::format("N = {} too small for the knot formula (log log N undefined)", grid_size));
    }
    const double n = grid_size;
    const double raw = c * std::pow(n, gamma) * std::pow(std::log(std::log(n)), gamma);
    return static_cast<int>(std::floor(raw));
}

std::vector<int> knot_candidates(int subjects, int grid_size, int order) {
    std::vector<int> out;
    const int upper = std::min(10, subjects / 4);
    for (int j = 1; j <= upper; ++j) {
        if (j + order < grid_size) {
            out.push_back(j);
        }
    }
    return out;
}

int select_knots(const Eigen::Ref<const Eigen::MatrixXd>& ys, int order, const KnotSelection& selection) {
    const int grid_size = static_cast<int>(ys.cols());
    if (selection.method == KnotMethod::formula) {
        return knot_formula(grid_size, selection.c, selection.gamma);
    }
    const int subjects = static_cast<int>(ys.rows());
    if (subjects < 4) {
        throw DataError(fmt::format("{} selection needs n >= 4 subjects, got {}", to_string(selection.method), subjects));
    }
    const auto candidates = knot_candidates(subjects, grid_size, order);
    if (candidates.empty()) {
        throw DataError(fmt::format("no admissible knot count for n = {}, N = {}, p = {}", subjects, grid_size, order));
    }
    int best = candidates.front();
    double best_score = std::numeric_limits<double>::infinity();
    for (int j : candidates) {
        const auto design = design_matrix(make_basis(order, j), grid_size);
        const double score = selection.method == KnotMethod::gcv ? gcv_score(design, ys) : bic_score(design, ys);
        if (score < best_score) {
            best_score = score;
            best = j;
        }
    }
    return best;
}

}  // namespace scbcov
