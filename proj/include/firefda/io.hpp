#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "firefda/covariates.hpp"
#include "firefda/design.hpp"
#include "firefda/grid.hpp"
#include "firefda/modelsel.hpp"
#include "firefda/stl.hpp"

namespace firefda::io {

using ordered_json = nlohmann::ordered_json;

/// Shortest round-trip decimal representation; identical bytes for
/// identical doubles, which the deterministic-output contract relies on.
std::string format_double(double v);

/// Functional dataset as CSV (`unit_id,t_0,...,t_{N-1}`) with the grid in a
/// sidecar JSON holding start, step and points_per_year.
void write_dataset_csv(const FunctionalDatasetD& ds, const std::filesystem::path& csv_path,
                       const std::filesystem::path& sidecar_path);
FunctionalDatasetD read_dataset_csv(const std::filesystem::path& csv_path,
                                    const std::filesystem::path& sidecar_path);

/// Long-format series rows as read from `unit_id,calendar_index,value`.
/// An empty or "nan" value field marks a missing observation.
struct LongSeries {
    std::string unit_id;
    std::vector<std::pair<long, std::optional<double>>> observations;  // (calendar, value)
};
std::vector<LongSeries> read_long_series_csv(const std::filesystem::path& path);

/// `unit_id,event_index` with event_index in calendar units.
std::map<std::string, long> read_events_csv(const std::filesystem::path& path);

/// Wide covariate CSV: `unit_id,<col>...`. Columns named in `categorical`
/// are read as level labels, everything else as numeric; optional reference
/// levels by column name.
CovariateTableD read_covariates_csv(const std::filesystem::path& path,
                                    const std::vector<std::string>& categorical,
                                    const std::map<std::string, std::string>& references = {});
void write_covariates_csv(const std::filesystem::path& path, const CovariateTableD& table);

/// Per-unit decomposition table `calendar_index,observed,trend,seasonal,remainder`;
/// the observed field is empty at missing points.
void write_decomposition_csv(const std::filesystem::path& path, const RawSeriesD& series,
                             const DecompositionD& dec);

/// Long-format raw series plus events, the ingestion input format.
void write_long_series_csv(const std::filesystem::path& path,
                           const std::vector<RawSeriesD>& series);
void write_events_csv(const std::filesystem::path& path, const std::vector<RawSeriesD>& series);

/// Sweep table mirroring the five kinds in complexity order plus the
/// selected column.
void write_sweep_csv(const std::filesystem::path& path, const SweepTableD& table);
SweepTableD read_sweep_csv(const std::filesystem::path& path,
                           const std::vector<CovariateGroup>& groups);

/// ModelSpec <-> JSON.
ordered_json model_spec_to_json(const ModelSpecD& spec);
ModelSpecD model_spec_from_json(const ordered_json& j);

TermKind term_kind_from_name(const std::string& name);

void write_json(const std::filesystem::path& path, const ordered_json& j);
ordered_json read_json(const std::filesystem::path& path);

/// FNV-1a hash of a string, hex-encoded; used for config fingerprints.
std::string fnv1a_hex(const std::string& data);

}  // namespace firefda::io
