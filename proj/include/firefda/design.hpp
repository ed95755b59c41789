#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "firefda/bspline.hpp"
#include "firefda/common.hpp"
#include "firefda/covariates.hpp"
#include "firefda/grid.hpp"

namespace firefda {

/// The five ways a covariate can enter the additive model, plus the
/// functional intercept and factor terms. Complexity order for numeric
/// covariates: ConstantLinear < Smooth < VaryingLinear < VaryingPlusSmooth
/// < Bivariate.
enum class TermKind {
    FunctionalIntercept,  // beta0(t)
    ConstantLinear,       // beta * x
    Smooth,               // s(x)
    VaryingLinear,        // beta(t) * x
    VaryingPlusSmooth,    // beta(t) * x + s(x)
    Bivariate,            // gamma(t, x)
    FactorConstant,       // per-level constants vs the reference
};

inline const char* term_kind_name(TermKind k) {
    switch (k) {
        case TermKind::FunctionalIntercept: return "functional_intercept";
        case TermKind::ConstantLinear: return "constant_linear";
        case TermKind::Smooth: return "smooth";
        case TermKind::VaryingLinear: return "varying_linear";
        case TermKind::VaryingPlusSmooth: return "varying_plus_smooth";
        case TermKind::Bivariate: return "bivariate";
        case TermKind::FactorConstant: return "factor_constant";
    }
    return "?";
}

struct BasisConfig {
    Eigen::Index n_basis = 10;
    int degree = 3;
    int penalty_order = 2;
};

/// One model term. Basis configs apply to the dimensions the kind uses;
/// fixed lambdas bypass GCV for the corresponding penalized block.
template <typename Scalar = double>
struct TermSpec {
    std::string covariate;  // "intercept" for FunctionalIntercept
    TermKind kind{TermKind::Smooth};
    BasisConfig t_basis{};
    BasisConfig x_basis{};
    std::optional<Scalar> fixed_lambda_t{};
    std::optional<Scalar> fixed_lambda_x{};
};

template <typename Scalar = double>
struct ModelSpec {
    std::vector<TermSpec<Scalar>> terms;

    static ModelSpec with_intercept(BasisConfig t_basis = {}) {
        ModelSpec spec;
        TermSpec<Scalar> intercept;
        intercept.covariate = "intercept";
        intercept.kind = TermKind::FunctionalIntercept;
        intercept.t_basis = t_basis;
        spec.terms.push_back(std::move(intercept));
        return spec;
    }

    ModelSpec& add(TermSpec<Scalar> term) {
        terms.push_back(std::move(term));
        return *this;
    }

    ModelSpec& add(const std::string& covariate, TermKind kind, BasisConfig t_basis = {},
                   BasisConfig x_basis = {}) {
        TermSpec<Scalar> t;
        t.covariate = covariate;
        t.kind = kind;
        t.t_basis = t_basis;
        t.x_basis = x_basis;
        terms.push_back(std::move(t));
        return *this;
    }
};

using TermSpecD = TermSpec<double>;
using ModelSpecD = ModelSpec<double>;

/// Difference penalty in divided-difference form on the Greville abscissae.
/// With replicated boundary knots the plain coefficient differences do not
/// vanish on linear functions of x; dividing by the Greville gaps restores
/// that, so the order-2 penalty's null space is exactly the straight lines
/// and the lambda -> infinity limit of a penalized fit is the least-squares
/// line. On uniformly spaced interior knots this reduces to the classic
/// P-spline penalty up to a constant factor.
template <typename Scalar>
PenaltyMatrix<Scalar> greville_penalty(const SplineBasis<Scalar>& basis, int order) {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vector = Eigen::Vector<Scalar, Eigen::Dynamic>;
    const Eigen::Index k = basis.n_basis;
    if (order < 1) throw validation_error("greville_penalty: order must be at least 1");
    if (k <= order) throw validation_error("greville_penalty: n_basis must exceed the order");

    Vector greville(k);
    for (Eigen::Index j = 0; j < k; ++j) {
        if (basis.degree == 0) {
            greville(j) = (basis.knots(j) + basis.knots(j + 1)) / Scalar(2);
        } else {
            Scalar s = 0;
            for (int d = 1; d <= basis.degree; ++d) s += basis.knots(j + d);
            greville(j) = s / Scalar(basis.degree);
        }
    }

    Matrix d = Matrix::Identity(k, k);
    for (int r = 1; r <= order; ++r) {
        const Eigen::Index rows = k - r;
        Matrix stage = Matrix::Zero(rows, rows + 1);
        for (Eigen::Index j = 0; j < rows; ++j) {
            const Scalar gap = (greville(j + r) - greville(j)) / Scalar(r);
            stage(j, j) = Scalar(-1) / gap;
            stage(j, j + 1) = Scalar(1) / gap;
        }
        d = (stage * d).eval();
    }
    return PenaltyMatrix<Scalar>{order, d.transpose() * d};
}

namespace detail {

/// Orthonormal basis of the null space of the single constraint row c:
/// columns Z with c * Z = 0, K x (K-1).
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> constraint_null_space(
    const Eigen::RowVector<Scalar, Eigen::Dynamic>& c) {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    const Eigen::Index k = c.size();
    Eigen::HouseholderQR<Matrix> qr(c.transpose());
    Matrix q = qr.householderQ();
    return q.rightCols(k - 1);
}

}  // namespace detail

/// How a fitted block's contribution is evaluated at new inputs.
enum class BlockType {
    InterceptConst,  // column of ones
    InterceptCurve,  // grid-centered spline in t
    Linear,          // single covariate column
    SmoothX,         // sample-sum-to-zero spline in x, constant in t
    VaryingT,        // spline in t scaled by x (centered in t inside VPS)
    TensorTX,        // row-Kronecker of t-spline and constrained x-spline
    Factor,          // dummies versus the reference level
};

/// One design block: the stacked columns plus everything needed to evaluate
/// the term later (bases, constraint transforms, factor levels). `stacked`
/// is dropped once the model is fitted.
template <typename Scalar = double>
struct TermBlock {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vector = Eigen::Vector<Scalar, Eigen::Dynamic>;

    std::string label;
    std::size_t term_index{0};
    BlockType type{BlockType::Linear};
    std::string covariate;
    bool penalized{false};
    std::optional<Scalar> fixed_lambda{};

    Matrix stacked;  // (n*N) x p
    Matrix penalty;  // p x p when penalized

    SplineBasis<Scalar> t_spline{};
    SplineBasis<Scalar> x_spline{};
    Matrix z_t;  // t-constraint transform (empty if none)
    Matrix z_x;  // x-constraint transform (empty if none)
    std::vector<std::string> factor_levels;  // non-reference levels, column order
    std::string factor_reference;

    // Filled after fitting.
    Vector coef;
    Vector se;
    Scalar lambda{0};
    Scalar edf{0};
    Scalar f_stat{0};
    Eigen::Index ref_df{0};

    Eigen::Index n_cols() const { return stacked.cols() > 0 ? stacked.cols() : coef.size(); }
};

template <typename Scalar = double>
struct AssembledDesign {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    std::vector<TermBlock<Scalar>> blocks;
    std::vector<Eigen::Index> col_start;  // per block
    Eigen::Index n_cols{0};

    Matrix stacked() const {
        Eigen::Index rows = blocks.empty() ? 0 : blocks.front().stacked.rows();
        Matrix x(rows, n_cols);
        for (std::size_t b = 0; b < blocks.size(); ++b)
            x.middleCols(col_start[b], blocks[b].stacked.cols()) = blocks[b].stacked;
        return x;
    }
};

namespace detail {

/// Replicates a per-grid-point matrix down the stacked (unit, grid) rows.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> replicate_time(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& time_rows, Eigen::Index n_units) {
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(time_rows.rows() * n_units,
                                                              time_rows.cols());
    for (Eigen::Index i = 0; i < n_units; ++i)
        out.middleRows(i * time_rows.rows(), time_rows.rows()) = time_rows;
    return out;
}

/// Replicates a per-unit matrix across that unit's grid rows.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> replicate_unit(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& unit_rows, Eigen::Index n_points) {
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(unit_rows.rows() * n_points,
                                                              unit_rows.cols());
    for (Eigen::Index i = 0; i < unit_rows.rows(); ++i)
        out.middleRows(i * n_points, n_points) = unit_rows.row(i).colwise().replicate(n_points);
    return out;
}

template <typename Scalar>
SplineBasis<Scalar> covariate_basis(const Eigen::Vector<Scalar, Eigen::Dynamic>& x,
                                    const BasisConfig& cfg, const std::string& name) {
    const Scalar lo = x.minCoeff(), hi = x.maxCoeff();
    if (!(hi > lo))
        throw validation_error("fit: covariate '" + name + "' is degenerate (zero variance)");
    return SplineBasis<Scalar>::uniform(lo, hi, cfg.n_basis, cfg.degree);
}

}  // namespace detail

/// Expands a ModelSpec into concrete design blocks over the stacked
/// (unit i, grid point a) observations, row index i*N + a. Smooth-in-x
/// blocks carry a sum-to-zero constraint over the observed covariate
/// values; the intercept curve and the beta(t) part of VaryingPlusSmooth
/// are centered over the grid so the parametric columns stay identifiable.
template <typename Scalar>
AssembledDesign<Scalar> build_design(const FunctionalDataset<Scalar>& ds,
                                     const CovariateTable<Scalar>& table,
                                     const ModelSpec<Scalar>& spec) {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vector = Eigen::Vector<Scalar, Eigen::Dynamic>;
    using RowVector = Eigen::RowVector<Scalar, Eigen::Dynamic>;

    const Eigen::Index n = ds.n_units();
    const Eigen::Index m = ds.grid.n_points;

    if (table.unit_ids() != ds.unit_ids)
        throw validation_error("fit: covariate table is not aligned with the dataset units");

    int intercepts = 0;
    for (const auto& t : spec.terms)
        if (t.kind == TermKind::FunctionalIntercept) ++intercepts;
    if (intercepts != 1)
        throw validation_error("fit: the model needs exactly one functional intercept (found " +
                               std::to_string(intercepts) + ")");

    const Vector grid_points = ds.grid.points();
    AssembledDesign<Scalar> design;

    auto require_standardized = [&](const std::string& name) -> const Vector& {
        const auto& col = table.numeric(name);
        if (!col.standardization)
            throw validation_error("fit: numeric covariate '" + name +
                                   "' must be standardized before additive fitting; apply "
                                   "CovariateTable::standardized() first");
        return col.values;
    };

    auto push = [&](TermBlock<Scalar> block) {
        design.col_start.push_back(design.n_cols);
        design.n_cols += block.stacked.cols();
        design.blocks.push_back(std::move(block));
    };

    for (std::size_t ti = 0; ti < spec.terms.size(); ++ti) {
        const auto& term = spec.terms[ti];
        switch (term.kind) {
            case TermKind::FunctionalIntercept: {
                TermBlock<Scalar> ones;
                ones.label = "(Intercept)";
                ones.term_index = ti;
                ones.type = BlockType::InterceptConst;
                ones.covariate = "intercept";
                ones.stacked = Matrix::Ones(n * m, 1);
                push(std::move(ones));

                TermBlock<Scalar> curve;
                curve.label = "Intercept(t)";
                curve.term_index = ti;
                curve.type = BlockType::InterceptCurve;
                curve.covariate = "intercept";
                curve.penalized = true;
                curve.fixed_lambda = term.fixed_lambda_t;
                curve.t_spline = SplineBasis<Scalar>::uniform(
                    ds.grid.start, ds.grid.end(), term.t_basis.n_basis, term.t_basis.degree);
                const Matrix bt = bspline_design(grid_points, curve.t_spline);
                const RowVector c = bt.colwise().sum();
                curve.z_t = detail::constraint_null_space<Scalar>(c);
                const Matrix centered = bt * curve.z_t;
                curve.stacked = detail::replicate_time(centered, n);
                const auto p = greville_penalty(curve.t_spline, term.t_basis.penalty_order);
                curve.penalty = curve.z_t.transpose() * p.matrix * curve.z_t;
                push(std::move(curve));
                break;
            }
            case TermKind::ConstantLinear: {
                const Vector& x = require_standardized(term.covariate);
                TermBlock<Scalar> block;
                block.label = term.covariate;
                block.term_index = ti;
                block.type = BlockType::Linear;
                block.covariate = term.covariate;
                block.stacked = detail::replicate_unit(Matrix(x), m);
                push(std::move(block));
                break;
            }
            case TermKind::Smooth:
            case TermKind::VaryingLinear:
            case TermKind::VaryingPlusSmooth: {
                const Vector& x = require_standardized(term.covariate);
                const bool wants_varying = term.kind != TermKind::Smooth;
                const bool wants_smooth = term.kind != TermKind::VaryingLinear;

                if (wants_varying) {
                    TermBlock<Scalar> block;
                    block.label = "beta(t):" + term.covariate;
                    block.term_index = ti;
                    block.type = BlockType::VaryingT;
                    block.covariate = term.covariate;
                    block.penalized = true;
                    block.fixed_lambda = term.fixed_lambda_t;
                    block.t_spline = SplineBasis<Scalar>::uniform(
                        ds.grid.start, ds.grid.end(), term.t_basis.n_basis, term.t_basis.degree);
                    Matrix bt = bspline_design(grid_points, block.t_spline);
                    const auto p = greville_penalty(block.t_spline, term.t_basis.penalty_order);
                    if (term.kind == TermKind::VaryingPlusSmooth) {
                        // The time-constant slope belongs to the smooth's
                        // linear part; center beta(t) over the grid.
                        const RowVector c = bt.colwise().sum();
                        block.z_t = detail::constraint_null_space<Scalar>(c);
                        bt = (bt * block.z_t).eval();
                        block.penalty = block.z_t.transpose() * p.matrix * block.z_t;
                    } else {
                        block.penalty = p.matrix;
                    }
                    const Matrix time_part = detail::replicate_time(bt, n);
                    const Matrix x_rep = detail::replicate_unit(Matrix(x), m);
                    block.stacked = time_part.array().colwise() * x_rep.col(0).array();
                    push(std::move(block));
                }
                if (wants_smooth) {
                    TermBlock<Scalar> block;
                    block.label = "s(" + term.covariate + ")";
                    block.term_index = ti;
                    block.type = BlockType::SmoothX;
                    block.covariate = term.covariate;
                    block.penalized = true;
                    block.fixed_lambda = term.fixed_lambda_x;
                    block.x_spline = detail::covariate_basis(x, term.x_basis, term.covariate);
                    const Matrix bx = bspline_design(x, block.x_spline);
                    const RowVector c = bx.colwise().sum();
                    block.z_x = detail::constraint_null_space<Scalar>(c);
                    const Matrix constrained = bx * block.z_x;
                    block.stacked = detail::replicate_unit(constrained, m);
                    const auto p = greville_penalty(block.x_spline, term.x_basis.penalty_order);
                    block.penalty = block.z_x.transpose() * p.matrix * block.z_x;
                    push(std::move(block));
                }
                break;
            }
            case TermKind::Bivariate: {
                const Vector& x = require_standardized(term.covariate);
                TermBlock<Scalar> block;
                block.label = "te(t," + term.covariate + ")";
                block.term_index = ti;
                block.type = BlockType::TensorTX;
                block.covariate = term.covariate;
                block.penalized = true;
                block.fixed_lambda = term.fixed_lambda_t ? term.fixed_lambda_t
                                                         : term.fixed_lambda_x;
                block.t_spline = SplineBasis<Scalar>::uniform(
                    ds.grid.start, ds.grid.end(), term.t_basis.n_basis, term.t_basis.degree);
                block.x_spline = detail::covariate_basis(x, term.x_basis, term.covariate);
                const Matrix bt = bspline_design(grid_points, block.t_spline);
                const Matrix bx = bspline_design(x, block.x_spline);
                const RowVector c = bx.colwise().sum();
                block.z_x = detail::constraint_null_space<Scalar>(c);
                const Matrix bx_con = bx * block.z_x;
                block.stacked = tensor_design<Scalar>(detail::replicate_time(bt, n),
                                                      detail::replicate_unit(bx_con, m));
                const auto pt = greville_penalty(block.t_spline, term.t_basis.penalty_order);
                const auto px_raw = greville_penalty(block.x_spline, term.x_basis.penalty_order);
                const Matrix px = block.z_x.transpose() * px_raw.matrix * block.z_x;
                const Eigen::Index kt = bt.cols(), kx = bx_con.cols();
                // Column order is t-major: col = ct * kx + cx, so the
                // penalty is Pt (x) I + I (x) Px.
                Matrix pen = Matrix::Zero(kt * kx, kt * kx);
                for (Eigen::Index a = 0; a < kt; ++a)
                    for (Eigen::Index b = 0; b < kt; ++b)
                        pen.block(a * kx, b * kx, kx, kx) +=
                            pt.matrix(a, b) * Matrix::Identity(kx, kx);
                for (Eigen::Index a = 0; a < kt; ++a)
                    pen.block(a * kx, a * kx, kx, kx) += px;
                block.penalty = std::move(pen);
                push(std::move(block));
                break;
            }
            case TermKind::FactorConstant: {
                const auto& col = table.categorical(term.covariate);
                if (col.levels.size() < 2)
                    throw validation_error("fit: factor '" + term.covariate +
                                           "' has a single level");
                TermBlock<Scalar> block;
                block.label = term.covariate;
                block.term_index = ti;
                block.type = BlockType::Factor;
                block.covariate = term.covariate;
                block.factor_reference = col.reference;
                Matrix dummies = Matrix::Zero(n, Eigen::Index(col.levels.size()) - 1);
                for (const auto& level : col.levels) {
                    if (level == col.reference) continue;
                    block.factor_levels.push_back(level);
                    const Eigen::Index c = Eigen::Index(block.factor_levels.size()) - 1;
                    for (Eigen::Index i = 0; i < n; ++i)
                        if (col.labels[std::size_t(i)] == level) dummies(i, c) = Scalar(1);
                }
                block.stacked = detail::replicate_unit(dummies, m);
                push(std::move(block));
                break;
            }
        }
    }
    return design;
}

}  // namespace firefda
