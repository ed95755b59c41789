#pragma once

#include <Eigen/Dense>

#include <array>
#include <atomic>
#include <cmath>
#include <future>
#include <string>
#include <thread>
#include <vector>

#include "firefda/common.hpp"
#include "firefda/fosr.hpp"

namespace firefda {

/// One or two covariates that summarize the same underlying characteristic
/// and are swept jointly (e.g. latitude with longitude).
struct CovariateGroup {
    std::string name;
    std::vector<std::string> members;
};

/// The five candidate kinds for a numeric covariate in complexity order.
inline constexpr std::array<TermKind, 5> sweep_kinds = {
    TermKind::ConstantLinear, TermKind::Smooth, TermKind::VaryingLinear,
    TermKind::VaryingPlusSmooth, TermKind::Bivariate};

/// Explained-variability table of the per-group sweep: one row per group,
/// the five kinds in complexity order as columns, and the selected kind.
template <typename Scalar = double>
struct SweepTable {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    std::vector<CovariateGroup> groups;
    Matrix explained;               // n_groups x 5
    std::vector<TermKind> selected;  // per group
    Scalar threshold{1};
};

/// Simplicity-based choice among the five kinds: walk backwards from the
/// most complex model and step down whenever the loss in explained
/// variability is below the threshold. From VaryingPlusSmooth the simpler
/// candidate is whichever of Smooth / VaryingLinear explains more (Smooth
/// on a tie); from either of those the last step down is ConstantLinear.
template <typename Scalar>
TermKind select_kind(const Eigen::Vector<Scalar, Eigen::Dynamic>& row, Scalar threshold) {
    if (row.size() != 5) throw validation_error("select_kind: need exactly 5 values");
    if (!row.allFinite()) throw validation_error("select_kind: non-finite explained variability");

    const Scalar cl = row(0), sm = row(1), vl = row(2), vps = row(3), biv = row(4);
    if (!(biv - vps < threshold)) return TermKind::Bivariate;
    const Scalar cand_ev = std::max(sm, vl);
    if (!(vps - cand_ev < threshold)) return TermKind::VaryingPlusSmooth;
    const TermKind cand = sm >= vl ? TermKind::Smooth : TermKind::VaryingLinear;
    if (!(cand_ev - cl < threshold)) return cand;
    return TermKind::ConstantLinear;
}

/// The terms one group contributes for a given kind: categorical members
/// always enter as factor constants, numeric members get the kind itself.
template <typename Scalar>
void add_group_terms(ModelSpec<Scalar>& spec, const CovariateGroup& group, TermKind kind,
                     const CovariateTable<Scalar>& table, const BasisConfig& t_basis,
                     const BasisConfig& x_basis) {
    if (group.members.empty() || group.members.size() > 2)
        throw validation_error("sweep: group '" + group.name + "' must have 1 or 2 members");
    for (const auto& member : group.members) {
        if (table.has_categorical(member)) {
            spec.add(member, TermKind::FactorConstant);
        } else {
            spec.add(member, kind, t_basis, x_basis);
        }
    }
}

/// Fits intercept + group terms for every (group, kind) pair and records
/// the explained variability, then applies select_kind per row. Rows are
/// independent; `jobs` > 1 fits them concurrently with a deterministic
/// assembly order.
template <typename Scalar>
SweepTable<Scalar> sweep(const FunctionalDataset<Scalar>& ds, const CovariateTable<Scalar>& table,
                         const std::vector<CovariateGroup>& groups,
                         const BasisConfig& t_basis = {}, const BasisConfig& x_basis = {},
                         Scalar threshold = Scalar(1), unsigned jobs = 1) {
    if (groups.empty()) throw validation_error("sweep: no covariate groups");

    SweepTable<Scalar> out;
    out.groups = groups;
    out.threshold = threshold;
    out.explained.resize(Eigen::Index(groups.size()), 5);

    struct Task {
        std::size_t group;
        std::size_t kind;
    };
    std::vector<Task> tasks;
    for (std::size_t g = 0; g < groups.size(); ++g)
        for (std::size_t k = 0; k < sweep_kinds.size(); ++k) tasks.push_back({g, k});

    auto run_task = [&](const Task& task) {
        const auto& group = groups[task.group];
        const TermKind kind = sweep_kinds[task.kind];
        try {
            auto spec = ModelSpec<Scalar>::with_intercept(t_basis);
            add_group_terms(spec, group, kind, table, t_basis, x_basis);
            const auto model = fit_additive(ds, table, spec);
            out.explained(Eigen::Index(task.group), Eigen::Index(task.kind)) =
                explained_variability(model);
        } catch (const validation_error& e) {
            throw validation_error("sweep (group '" + group.name + "', kind " +
                                   term_kind_name(kind) + "): " + e.what());
        } catch (const numeric_error& e) {
            throw numeric_error("sweep (group '" + group.name + "', kind " +
                                term_kind_name(kind) + "): " + e.what());
        }
    };

    if (jobs <= 1) {
        for (const auto& task : tasks) run_task(task);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::future<void>> workers;
        const unsigned n_workers = std::min<unsigned>(jobs, unsigned(tasks.size()));
        for (unsigned w = 0; w < n_workers; ++w)
            workers.push_back(std::async(std::launch::async, [&] {
                for (;;) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= tasks.size()) return;
                    run_task(tasks[i]);
                }
            }));
        for (auto& f : workers) f.get();  // rethrows the first failure
    }

    for (std::size_t g = 0; g < groups.size(); ++g)
        out.selected.push_back(
            select_kind<Scalar>(out.explained.row(Eigen::Index(g)).transpose(), threshold));
    return out;
}

/// Full-model spec from the sweep selections: one functional intercept plus,
/// per group, the selected kind applied to each member (categoricals as
/// factor constants).
template <typename Scalar>
ModelSpec<Scalar> build_full_spec(const SweepTable<Scalar>& table,
                                  const CovariateTable<Scalar>& covariates,
                                  const BasisConfig& t_basis = {},
                                  const BasisConfig& x_basis = {}) {
    if (table.groups.empty()) throw validation_error("build_full_spec: empty sweep table");
    if (table.selected.size() != table.groups.size())
        throw validation_error("build_full_spec: every row needs a selected kind");

    std::vector<std::string> seen;
    auto spec = ModelSpec<Scalar>::with_intercept(t_basis);
    for (std::size_t g = 0; g < table.groups.size(); ++g) {
        for (const auto& member : table.groups[g].members) {
            if (std::find(seen.begin(), seen.end(), member) != seen.end())
                throw validation_error("build_full_spec: covariate '" + member +
                                       "' appears in more than one group");
            seen.push_back(member);
        }
        add_group_terms(spec, table.groups[g], table.selected[g], covariates, t_basis, x_basis);
    }
    return spec;
}

using SweepTableD = SweepTable<double>;

}  // namespace firefda
