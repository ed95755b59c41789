#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "firefda/common.hpp"
#include "firefda/design.hpp"
#include "firefda/grid.hpp"

namespace firefda {

/// A fitted function-on-scalar model. Either an additive penalized fit
/// (blocks populated) or a pointwise per-grid-point OLS fit
/// (pointwise_coefs populated). fitted + residuals reproduces the observed
/// curves exactly.
template <typename Scalar = double>
struct FittedModel {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vector = Eigen::Vector<Scalar, Eigen::Dynamic>;

    ModelSpec<Scalar> spec;
    TimeGrid<Scalar> grid;
    std::vector<std::string> unit_ids;

    std::vector<TermBlock<Scalar>> blocks;  // additive fit only
    bool pointwise{false};
    Matrix pointwise_coefs;                  // (k+1) x N, row 0 = intercept curve
    std::vector<std::string> pointwise_names;

    Matrix fitted;     // n x N
    Matrix residuals;  // n x N
    Scalar rss{0};
    Scalar tss{0};
    Scalar edf_total{0};
    Eigen::Index n_obs{0};
    Scalar sigma2{0};

    std::map<std::string, Scalar> lambdas() const {
        std::map<std::string, Scalar> out;
        for (const auto& b : blocks)
            if (b.penalized) out[b.label] = b.lambda;
        return out;
    }
};

/// Percentage of observed variability explained: 100 times the adjusted R^2
/// pooled over all (unit, grid point) observations.
template <typename Scalar>
Scalar explained_variability(const FittedModel<Scalar>& m) {
    if (m.edf_total >= Scalar(m.n_obs))
        throw numeric_error("explained_variability: saturated fit (edf " +
                            std::to_string(double(m.edf_total)) + " >= " +
                            std::to_string(m.n_obs) + " observations)");
    const Scalar adj = (m.rss / (Scalar(m.n_obs) - m.edf_total)) /
                       (m.tss / (Scalar(m.n_obs) - Scalar(1)));
    return Scalar(100) * (Scalar(1) - adj);
}

namespace detail {

/// Penalized normal-equations solver over precomputed cross-products.
/// One smoothing parameter per penalized block; GCV = n * RSS / (n - edf)^2.
template <typename Scalar>
class PenalizedSolver {
public:
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vector = Eigen::Vector<Scalar, Eigen::Dynamic>;

    PenalizedSolver(const AssembledDesign<Scalar>& design, Matrix g, Vector b, Scalar yy,
                    Eigen::Index n_obs)
        : design_(design), g_(std::move(g)), b_(std::move(b)), yy_(yy), n_obs_(n_obs) {}

    struct Solution {
        bool ok{false};
        Vector theta;
        Scalar rss{0};
        Scalar edf_total{0};
        Scalar gcv{0};
        std::vector<Scalar> block_edf;
        Matrix a_inverse;  // for covariance; filled only when requested
    };

    Solution solve(const std::vector<Scalar>& lambdas, bool want_covariance = false) const {
        Solution out;
        Matrix a = g_;
        for (std::size_t bi = 0; bi < design_.blocks.size(); ++bi) {
            const auto& block = design_.blocks[bi];
            if (!block.penalized || lambdas[bi] == Scalar(0)) continue;
            const Eigen::Index c0 = design_.col_start[bi];
            const Eigen::Index p = block.penalty.rows();
            a.block(c0, c0, p, p) += lambdas[bi] * block.penalty;
        }
        Eigen::LDLT<Matrix> ldlt(a);
        const auto& d = ldlt.vectorD();
        const Scalar dmax = d.cwiseAbs().maxCoeff();
        if (ldlt.info() != Eigen::Success || !(dmax > Scalar(0)) ||
            d.minCoeff() <= dmax * Scalar(1e-12)) {
            return out;  // singular for these smoothing parameters
        }
        out.theta = ldlt.solve(b_);
        const Matrix smoother = ldlt.solve(g_);  // A^-1 G, trace = edf
        out.edf_total = smoother.trace();
        out.block_edf.resize(design_.blocks.size());
        for (std::size_t bi = 0; bi < design_.blocks.size(); ++bi) {
            const Eigen::Index c0 = design_.col_start[bi];
            const Eigen::Index p = design_.blocks[bi].stacked.cols();
            out.block_edf[bi] = smoother.diagonal().segment(c0, p).sum();
        }
        out.rss = std::max(yy_ - Scalar(2) * out.theta.dot(b_) + out.theta.dot(g_ * out.theta),
                           Scalar(0));
        const Scalar denom = Scalar(n_obs_) - out.edf_total;
        out.gcv = denom > Scalar(0) ? Scalar(n_obs_) * out.rss / (denom * denom)
                                    : std::numeric_limits<Scalar>::infinity();
        if (want_covariance)
            out.a_inverse = ldlt.solve(Matrix::Identity(a.rows(), a.cols()));
        out.ok = true;
        return out;
    }

private:
    const AssembledDesign<Scalar>& design_;
    Matrix g_;
    Vector b_;
    Scalar yy_;
    Eigen::Index n_obs_;
};

template <typename Scalar>
std::vector<Scalar> gcv_multipliers() {
    // 7 log-spaced points covering 1e-4 .. 1e4 around the scale heuristic.
    std::vector<Scalar> mult;
    for (int i = 0; i < 7; ++i)
        mult.push_back(std::pow(Scalar(10), Scalar(-4) + Scalar(8) * Scalar(i) / Scalar(6)));
    return mult;
}

}  // namespace detail

/// Penalized additive fit of the stacked model: one design over all
/// (unit, grid point) pairs, one smoothing parameter per penalized block
/// chosen by GCV on a 7-point log grid with two coordinate sweeps.
template <typename Scalar>
FittedModel<Scalar> fit_additive(const FunctionalDataset<Scalar>& ds,
                                 const CovariateTable<Scalar>& table,
                                 const ModelSpec<Scalar>& spec) {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vector = Eigen::Vector<Scalar, Eigen::Dynamic>;

    AssembledDesign<Scalar> design = build_design(ds, table, spec);
    const Eigen::Index n = ds.n_units();
    const Eigen::Index m = ds.grid.n_points;
    const Eigen::Index n_obs = n * m;
    if (n_obs <= design.n_cols)
        throw numeric_error("fit_additive: more columns (" + std::to_string(design.n_cols) +
                            ") than observations (" + std::to_string(n_obs) + ")");

    Matrix x = design.stacked();
    Vector y(n_obs);
    for (Eigen::Index i = 0; i < n; ++i) y.segment(i * m, m) = ds.curves.row(i).transpose();

    Matrix g_lower = Matrix::Zero(design.n_cols, design.n_cols);
    g_lower.template selfadjointView<Eigen::Lower>().rankUpdate(x.transpose());
    const Matrix g = g_lower.template selfadjointView<Eigen::Lower>();
    g_lower.resize(0, 0);
    const Vector b = x.transpose() * y;
    const Scalar yy = y.squaredNorm();

    detail::PenalizedSolver<Scalar> solver(design, g, b, yy, n_obs);

    // Scale heuristic and initial smoothing parameters.
    std::vector<Scalar> lambdas(design.blocks.size(), Scalar(0));
    std::vector<Scalar> base(design.blocks.size(), Scalar(0));
    std::vector<std::size_t> free_blocks;
    for (std::size_t bi = 0; bi < design.blocks.size(); ++bi) {
        const auto& block = design.blocks[bi];
        if (!block.penalized) continue;
        const Eigen::Index c0 = design.col_start[bi];
        const Eigen::Index p = block.stacked.cols();
        const Scalar gt = g.diagonal().segment(c0, p).sum();
        const Scalar pt = block.penalty.trace();
        base[bi] = pt > Scalar(0) ? std::max(gt, Scalar(1e-12)) / pt : Scalar(1);
        if (block.fixed_lambda) {
            lambdas[bi] = *block.fixed_lambda;
        } else {
            lambdas[bi] = base[bi];
            free_blocks.push_back(bi);
        }
    }

    if (!free_blocks.empty()) {
        const auto multipliers = detail::gcv_multipliers<Scalar>();
        for (int sweep = 0; sweep < 2; ++sweep) {
            for (std::size_t bi : free_blocks) {
                Scalar best_gcv = std::numeric_limits<Scalar>::infinity();
                Scalar best_lambda = lambdas[bi];
                for (const Scalar mult : multipliers) {
                    auto trial = lambdas;
                    trial[bi] = base[bi] * mult;
                    const auto sol = solver.solve(trial);
                    if (sol.ok && sol.gcv < best_gcv) {
                        best_gcv = sol.gcv;
                        best_lambda = trial[bi];
                    }
                }
                lambdas[bi] = best_lambda;
            }
        }
    }

    const auto final_sol = solver.solve(lambdas, /*want_covariance=*/true);
    if (!final_sol.ok)
        throw numeric_error(
            "fit_additive: design is rank deficient after constraints; remove collinear terms "
            "or increase the smoothing parameters");
    if (final_sol.edf_total >= Scalar(n_obs))
        throw numeric_error("fit_additive: saturated fit");

    FittedModel<Scalar> model;
    model.spec = spec;
    model.grid = ds.grid;
    model.unit_ids = ds.unit_ids;
    model.n_obs = n_obs;

    const Vector fitted_vec = x * final_sol.theta;
    model.fitted.resize(n, m);
    for (Eigen::Index i = 0; i < n; ++i) model.fitted.row(i) = fitted_vec.segment(i * m, m);
    model.residuals = ds.curves - model.fitted;
    model.rss = model.residuals.squaredNorm();
    model.tss = (y.array() - y.mean()).square().sum();
    model.edf_total = final_sol.edf_total;
    model.sigma2 = model.rss / (Scalar(n_obs) - model.edf_total);

    for (std::size_t bi = 0; bi < design.blocks.size(); ++bi) {
        auto& block = design.blocks[bi];
        const Eigen::Index c0 = design.col_start[bi];
        const Eigen::Index p = block.stacked.cols();
        block.coef = final_sol.theta.segment(c0, p);
        block.lambda = block.penalized ? lambdas[bi] : Scalar(0);
        block.edf = final_sol.block_edf[bi];
        block.ref_df = p;
        block.se.resize(p);
        for (Eigen::Index c = 0; c < p; ++c)
            block.se(c) = std::sqrt(std::max(model.sigma2 * final_sol.a_inverse(c0 + c, c0 + c),
                                             Scalar(0)));
        if (block.penalized) {
            const Scalar fit_norm2 = (x.middleCols(c0, p) * block.coef).squaredNorm();
            block.f_stat = block.edf > Scalar(0)
                               ? fit_norm2 / (block.edf * model.sigma2)
                               : Scalar(0);
        }
        block.stacked.resize(0, 0);  // drop the heavy columns
        model.blocks.push_back(std::move(block));
    }
    return model;
}

/// Per-grid-point ordinary least squares of the response on [1, x_1..x_k];
/// the same design is used at every grid point, so one QR factorization
/// solves all of them. No smoothing across t.
template <typename Scalar>
FittedModel<Scalar> fit_pointwise_linear(const FunctionalDataset<Scalar>& ds,
                                         const CovariateTable<Scalar>& table,
                                         const std::vector<std::string>& covariates) {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    if (table.unit_ids() != ds.unit_ids)
        throw validation_error("fit: covariate table is not aligned with the dataset units");
    const Eigen::Index n = ds.n_units();
    const Eigen::Index m = ds.grid.n_points;
    const Eigen::Index k = Eigen::Index(covariates.size());
    if (n <= k + 1)
        throw validation_error("fit_pointwise_linear: need more units than coefficients");

    Matrix d(n, k + 1);
    d.col(0).setOnes();
    std::vector<std::string> names{"(Intercept)"};
    for (Eigen::Index j = 0; j < k; ++j) {
        d.col(j + 1) = table.numeric(covariates[std::size_t(j)]).values;
        names.push_back(covariates[std::size_t(j)]);
    }

    Eigen::ColPivHouseholderQR<Matrix> qr(d);
    qr.setThreshold(Scalar(1e-10));
    if (qr.rank() < k + 1) {
        std::string collinear;
        const auto perm = qr.colsPermutation().indices();
        for (Eigen::Index r = qr.rank(); r < k + 1; ++r) {
            if (!collinear.empty()) collinear += ", ";
            collinear += names[std::size_t(perm(r))];
        }
        throw numeric_error("fit_pointwise_linear: design is rank deficient; collinear columns: " +
                            collinear);
    }

    FittedModel<Scalar> model;
    model.grid = ds.grid;
    model.unit_ids = ds.unit_ids;
    model.pointwise = true;
    model.pointwise_names = names;
    model.pointwise_coefs = qr.solve(ds.curves);  // (k+1) x N
    model.fitted = d * model.pointwise_coefs;
    model.residuals = ds.curves - model.fitted;
    model.n_obs = n * m;
    model.rss = model.residuals.squaredNorm();
    model.tss = (ds.curves.array() - ds.curves.mean()).square().sum();
    model.edf_total = Scalar((k + 1) * m);
    if (model.edf_total < Scalar(model.n_obs))
        model.sigma2 = model.rss / (Scalar(model.n_obs) - model.edf_total);
    return model;
}

namespace detail {

template <typename Scalar>
Scalar smooth_value(const TermBlock<Scalar>& block, Scalar x) {
    // s(x) = B_x(x) Z_x * coef
    const auto row = block.x_spline.evaluate(x);
    return (row.transpose() * block.z_x * block.coef).value();
}

template <typename Scalar>
Eigen::Vector<Scalar, Eigen::Dynamic> tensor_curve(const TermBlock<Scalar>& block,
                                                   const TimeGrid<Scalar>& grid, Scalar x) {
    // gamma(t, x) over the grid: columns are t-major, coef reshapes to kt x kx.
    const auto bt = bspline_design(grid.points(), block.t_spline);
    const auto bx_row = (block.x_spline.evaluate(x).transpose() * block.z_x).transpose();
    const Eigen::Index kt = bt.cols(), kx = bx_row.size();
    Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
        theta(block.coef.data(), kt, kx);
    return bt * (theta * bx_row);
}

}  // namespace detail

/// Sum of every term contribution at the given covariate configuration,
/// evaluated on the model grid. Numeric values are on the standardized
/// scale the model was fitted on; smooth terms refuse extrapolation outside
/// their knot ranges. An omitted factor defaults to its reference level.
template <typename Scalar>
Curve<Scalar> predict(const FittedModel<Scalar>& m, const std::map<std::string, Scalar>& numeric,
                      const std::map<std::string, std::string>& categorical = {}) {
    using Vector = Eigen::Vector<Scalar, Eigen::Dynamic>;

    auto numeric_at = [&](const std::string& name) -> Scalar {
        auto it = numeric.find(name);
        if (it == numeric.end())
            throw validation_error("predict: missing value for covariate '" + name + "'");
        return it->second;
    };

    if (m.pointwise) {
        Vector out = m.pointwise_coefs.row(0).transpose();
        for (std::size_t j = 1; j < m.pointwise_names.size(); ++j)
            out += numeric_at(m.pointwise_names[j]) *
                   m.pointwise_coefs.row(Eigen::Index(j)).transpose();
        return Curve<Scalar>(m.grid, std::move(out));
    }

    Vector out = Vector::Zero(m.grid.n_points);
    for (const auto& block : m.blocks) {
        switch (block.type) {
            case BlockType::InterceptConst:
                out.array() += block.coef(0);
                break;
            case BlockType::InterceptCurve:
                out += bspline_design(m.grid.points(), block.t_spline) * (block.z_t * block.coef);
                break;
            case BlockType::Linear:
                out.array() += numeric_at(block.covariate) * block.coef(0);
                break;
            case BlockType::SmoothX:
                out.array() += detail::smooth_value(block, numeric_at(block.covariate));
                break;
            case BlockType::VaryingT: {
                const auto bt = bspline_design(m.grid.points(), block.t_spline);
                const Vector beta_t =
                    block.z_t.size() > 0 ? Vector(bt * (block.z_t * block.coef))
                                         : Vector(bt * block.coef);
                out += numeric_at(block.covariate) * beta_t;
                break;
            }
            case BlockType::TensorTX:
                out += detail::tensor_curve(block, m.grid, numeric_at(block.covariate));
                break;
            case BlockType::Factor: {
                auto it = categorical.find(block.covariate);
                if (it == categorical.end()) break;  // defaults to the reference level
                const auto& level = it->second;
                if (level == block.factor_reference) break;
                auto pos = std::find(block.factor_levels.begin(), block.factor_levels.end(),
                                     level);
                if (pos == block.factor_levels.end())
                    throw validation_error("predict: unknown level '" + level + "' for factor '" +
                                           block.covariate + "'");
                out.array() += block.coef(pos - block.factor_levels.begin());
                break;
            }
        }
    }
    return Curve<Scalar>(m.grid, std::move(out));
}

/// The model's intercept curve: the predicted response at the reference
/// configuration (all numeric covariates at their standardized mean of 0,
/// factors at their reference level).
template <typename Scalar>
Curve<Scalar> intercept_curve(const FittedModel<Scalar>& m) {
    std::map<std::string, Scalar> zeros;
    if (m.pointwise) {
        for (std::size_t j = 1; j < m.pointwise_names.size(); ++j)
            zeros[m.pointwise_names[j]] = Scalar(0);
    } else {
        for (const auto& block : m.blocks)
            if (block.covariate != "intercept") zeros[block.covariate] = Scalar(0);
    }
    return predict(m, zeros);
}

/// Table-style summary: parametric terms with estimates, standard errors
/// (penalized normal-equations covariance) and t values; smooth terms with
/// effective degrees of freedom, reference df and an approximate F
/// statistic. The F values are labelled approximate: they are scaled
/// block-fit ratios, not the reference software's test statistics.
template <typename Scalar = double>
struct TermSummary {
    struct ParametricRow {
        std::string term;
        Scalar estimate;
        Scalar std_error;
        Scalar t_value;
    };
    struct SmoothRow {
        std::string term;
        Scalar edf;
        Scalar ref_df;
        Scalar f_approx;
    };
    std::vector<ParametricRow> parametric;
    std::vector<SmoothRow> smooths;
    bool approximate{true};
};

template <typename Scalar>
TermSummary<Scalar> term_summary(const FittedModel<Scalar>& m) {
    if (m.pointwise)
        throw validation_error("term_summary: requires an additive fit, not a pointwise one");
    TermSummary<Scalar> out;
    for (const auto& block : m.blocks) {
        if (block.penalized) {
            out.smooths.push_back({block.label, block.edf, Scalar(block.ref_df), block.f_stat});
            continue;
        }
        if (block.type == BlockType::Factor) {
            for (Eigen::Index c = 0; c < block.coef.size(); ++c) {
                const std::string term =
                    block.covariate + ":" + block.factor_levels[std::size_t(c)];
                const Scalar se = block.se(c);
                out.parametric.push_back(
                    {term, block.coef(c), se, se > Scalar(0) ? block.coef(c) / se : Scalar(0)});
            }
            continue;
        }
        const Scalar se = block.se(0);
        out.parametric.push_back(
            {block.label, block.coef(0), se, se > Scalar(0) ? block.coef(0) / se : Scalar(0)});
    }
    return out;
}

using FittedModelD = FittedModel<double>;
using TermSummaryD = TermSummary<double>;

}  // namespace firefda
