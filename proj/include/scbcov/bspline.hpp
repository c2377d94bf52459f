#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace scbcov {

/// Clamped B-spline basis of order p (degree p-1) on [0,1] with J equally
/// spaced interior knots l/(J+1). Dimension is J + p.
class SplineBasis {
public:
    SplineBasis(int order, int interior_knots);

    int order() const { return order_; }
    int interior_knots() const { return interior_knots_; }
    int dimension() const { return interior_knots_ + order_; }
    const std::vector<double>& knots() const { return knots_; }

    /// All J+p basis values at x in [0,1]. Right-continuous on interior
    /// knots; x = 1 is taken as the left limit.
    Eigen::VectorXd eval(double x) const;

    /// The (at most p) nonzero values at x written into `values`, returning
    /// the index of the first one.
    int eval_nonzero(double x, double* values) const;

    /// Value of sum_l coeffs[l] B_l(x).
    double eval_spline(const Eigen::Ref<const Eigen::VectorXd>& coeffs, double x) const;

    /// Matrix with one row of basis values per abscissa.
    Eigen::MatrixXd eval_matrix(const std::vector<double>& xs) const;

private:
    int span_index(double x) const;

    int order_;
    int interior_knots_;
    std::vector<double> knots_;
};

SplineBasis make_basis(int order, int interior_knots);
Eigen::VectorXd eval_basis(const SplineBasis& basis, double x);

/// Basis evaluated on the observation grid j/N, j = 1..N.
struct DesignMatrix {
    SplineBasis basis{1, 0};
    Eigen::MatrixXd matrix;
    std::vector<double> grid;

    int rows() const { return static_cast<int>(matrix.rows()); }
    int cols() const { return static_cast<int>(matrix.cols()); }
};

/// Observation grid {1/N, 2/N, ..., 1}.
std::vector<double> unit_grid(int grid_size);

DesignMatrix design_matrix(const SplineBasis& basis, int grid_size);

/// Least-squares projector onto the spline space for a fixed design.
/// Factors B^T B once with a Cholesky factorization; if the Gram matrix
/// condition number exceeds 1e10 it switches to a column-pivoted QR of B.
class LeastSquaresSolver {
public:
    explicit LeastSquaresSolver(const DesignMatrix& design);

    Eigen::VectorXd solve(const Eigen::Ref<const Eigen::VectorXd>& y) const;
    /// Each row of `ys` is a response vector; returns one coefficient row per input row.
    Eigen::MatrixXd solve_rows(const Eigen::Ref<const Eigen::MatrixXd>& ys) const;

    bool uses_qr() const { return qr_.has_value(); }
    double gram_condition() const { return condition_; }
    const DesignMatrix& design() const { return design_; }

private:
    DesignMatrix design_;
    double condition_ = 0.0;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    std::optional<Eigen::ColPivHouseholderQR<Eigen::MatrixXd>> qr_;
};

Eigen::VectorXd lsq_fit(const DesignMatrix& design, const Eigen::Ref<const Eigen::VectorXd>& y);

/// Pooled generalized cross-validation score of a shared basis over all
/// rows of `ys` (n x N).
double gcv_score(const DesignMatrix& design, const Eigen::Ref<const Eigen::MatrixXd>& ys);

/// Pooled least-squares BIC: nN log(RSS/(nN)) + (J+p) log(nN).
double bic_score(const DesignMatrix& design, const Eigen::Ref<const Eigen::MatrixXd>& ys);

enum class KnotMethod { formula, gcv, bic };

KnotMethod parse_knot_method(std::string_view name);
std::string to_string(KnotMethod method);

struct KnotSelection {
    KnotMethod method = KnotMethod::formula;
    double c = 0.8;
    double gamma = 0.375;
};

/// floor(c N^gamma (log log N)^gamma).
int knot_formula(int grid_size, double c = 0.8, double gamma = 0.375);

/// Candidate interior-knot counts for the criterion-based rules:
/// 1..min(10, floor(n/4)), dropping any that leave no residual degrees of freedom.
std::vector<int> knot_candidates(int subjects, int grid_size, int order);

int select_knots(const Eigen::Ref<const Eigen::MatrixXd>& ys, int order, const KnotSelection& selection);

}  // namespace scbcov
