#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "firefda/common.hpp"

namespace firefda {

/// Per-unit scalar covariates: numeric columns (with optional recorded
/// standardization) and categorical columns with a declared reference level.
/// Column order is preserved for deterministic serialization.
template <typename Scalar = double>
class CovariateTable {
public:
    using Vector = Eigen::Vector<Scalar, Eigen::Dynamic>;

    struct NumericColumn {
        std::string name;
        Vector values;
        std::optional<std::pair<Scalar, Scalar>> standardization;  // (mean, sd) if applied
    };

    struct CategoricalColumn {
        std::string name;
        std::vector<std::string> labels;  // one per unit
        std::vector<std::string> levels;  // distinct, sorted
        std::string reference;
    };

    CovariateTable() = default;
    explicit CovariateTable(std::vector<std::string> unit_ids) : unit_ids_(std::move(unit_ids)) {
        if (unit_ids_.empty()) throw validation_error("CovariateTable: no units");
    }

    const std::vector<std::string>& unit_ids() const { return unit_ids_; }
    Eigen::Index n_units() const { return Eigen::Index(unit_ids_.size()); }

    void add_numeric(const std::string& name, Vector values,
                     std::optional<std::pair<Scalar, Scalar>> standardization = {}) {
        if (values.size() != n_units())
            throw validation_error("CovariateTable: column '" + name + "' has length " +
                                   std::to_string(values.size()) + ", expected " +
                                   std::to_string(n_units()));
        if (!values.allFinite())
            throw validation_error("CovariateTable: column '" + name + "' has non-finite values");
        ensure_new(name);
        numeric_.push_back({name, std::move(values), standardization});
    }

    void add_categorical(const std::string& name, std::vector<std::string> labels,
                         std::string reference = "") {
        if (Eigen::Index(labels.size()) != n_units())
            throw validation_error("CovariateTable: column '" + name + "' has length " +
                                   std::to_string(labels.size()) + ", expected " +
                                   std::to_string(n_units()));
        ensure_new(name);
        std::map<std::string, Eigen::Index> counts;
        for (const auto& l : labels) ++counts[l];
        if (counts.empty()) throw validation_error("CovariateTable: empty categorical column");
        std::vector<std::string> levels;
        for (const auto& [level, cnt] : counts) levels.push_back(level);
        if (reference.empty()) {
            // Default reference: most frequent level, lexicographic tie-break.
            Eigen::Index best = -1;
            for (const auto& [level, cnt] : counts)
                if (cnt > best) {
                    best = cnt;
                    reference = level;
                }
        } else if (!counts.count(reference)) {
            throw validation_error("CovariateTable: reference level '" + reference +
                                   "' not present in column '" + name + "'");
        }
        categorical_.push_back({name, std::move(labels), std::move(levels), std::move(reference)});
    }

    bool has_numeric(const std::string& name) const { return find_numeric(name) != nullptr; }
    bool has_categorical(const std::string& name) const { return find_categorical(name) != nullptr; }

    const NumericColumn& numeric(const std::string& name) const {
        if (const auto* c = find_numeric(name)) return *c;
        throw validation_error("CovariateTable: no numeric column '" + name + "'");
    }

    const CategoricalColumn& categorical(const std::string& name) const {
        if (const auto* c = find_categorical(name)) return *c;
        throw validation_error("CovariateTable: no categorical column '" + name + "'");
    }

    const std::vector<NumericColumn>& numeric_columns() const { return numeric_; }
    const std::vector<CategoricalColumn>& categorical_columns() const { return categorical_; }

    /// Returns a copy with every numeric column centered and scaled to unit
    /// standard deviation, recording (mean, sd). Zero-variance columns are
    /// rejected here.
    CovariateTable standardized() const {
        CovariateTable out(unit_ids_);
        for (const auto& col : numeric_) {
            const Scalar mean = col.values.mean();
            const Scalar sd = std::sqrt((col.values.array() - mean).square().sum() /
                                        Scalar(col.values.size() - 1));
            if (!(sd > Scalar(0)))
                throw validation_error("CovariateTable: covariate '" + col.name +
                                       "' has zero variance and cannot be standardized");
            out.add_numeric(col.name, ((col.values.array() - mean) / sd).matrix(),
                            std::make_pair(mean, sd));
        }
        for (const auto& col : categorical_) {
            auto copy = col;
            out.categorical_.push_back(std::move(copy));
        }
        return out;
    }

    /// Subset of rows, preserving column order and standardization metadata.
    CovariateTable select_rows(const std::vector<Eigen::Index>& rows) const {
        std::vector<std::string> ids;
        ids.reserve(rows.size());
        for (auto r : rows) ids.push_back(unit_ids_.at(std::size_t(r)));
        CovariateTable out(std::move(ids));
        for (const auto& col : numeric_) {
            Vector v(Eigen::Index(rows.size()));
            for (std::size_t i = 0; i < rows.size(); ++i) v(Eigen::Index(i)) = col.values(rows[i]);
            out.add_numeric(col.name, std::move(v), col.standardization);
        }
        for (const auto& col : categorical_) {
            std::vector<std::string> labels;
            labels.reserve(rows.size());
            for (auto r : rows) labels.push_back(col.labels.at(std::size_t(r)));
            out.add_categorical(col.name, std::move(labels), col.reference);
        }
        return out;
    }

private:
    void ensure_new(const std::string& name) const {
        if (has_numeric(name) || has_categorical(name))
            throw validation_error("CovariateTable: duplicate column '" + name + "'");
    }

    const NumericColumn* find_numeric(const std::string& name) const {
        for (const auto& c : numeric_)
            if (c.name == name) return &c;
        return nullptr;
    }

    const CategoricalColumn* find_categorical(const std::string& name) const {
        for (const auto& c : categorical_)
            if (c.name == name) return &c;
        return nullptr;
    }

    std::vector<std::string> unit_ids_;
    std::vector<NumericColumn> numeric_;
    std::vector<CategoricalColumn> categorical_;
};

using CovariateTableD = CovariateTable<double>;

}  // namespace firefda
