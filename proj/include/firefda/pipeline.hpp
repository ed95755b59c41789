#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "firefda/covariates.hpp"
#include "firefda/design.hpp"
#include "firefda/fosr.hpp"
#include "firefda/fpca.hpp"
#include "firefda/modelsel.hpp"
#include "firefda/stl.hpp"
#include "firefda/synth.hpp"

namespace firefda::pipeline {

/// One JSON document drives every stage; CLI flags override single fields.
struct PipelineConfig {
    std::string input_mode = "synthetic";  // "synthetic" or "csv"
    std::string series_csv;
    std::string events_csv;
    std::string covariates_csv;
    std::vector<std::string> categorical = {"landcover"};
    std::map<std::string, std::string> reference_levels;

    int points_per_year = 26;
    int years_post = 7;
    int years_pre_min = 5;
    double max_missing_fraction = 0.20;

    StlConfig stl{};
    BasisConfig t_basis{};
    BasisConfig x_basis{};
    double sweep_threshold = 1.0;
    Eigen::Index fpca_components = 4;
    double fpca_band_multiplier = 2.0;  // times sqrt(lambda_j) in the FPCA plot

    unsigned jobs = 1;
    std::uint64_t seed = 42;
    synth::SynthConfig synth{};
    std::vector<CovariateGroup> groups;  // empty: one group per numeric column
    std::string out_dir = "out";
};

PipelineConfig config_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json config_to_json(const PipelineConfig& cfg);
PipelineConfig load_config(const std::filesystem::path& path);

/// Normalized difference vegetation index, (nir - red) / (nir + red).
double ndvi(double red, double nir);

struct IngestResult {
    std::vector<RawSeriesD> series;  // retained units, input order
    CovariateTableD covariates;      // raw scale, aligned with series
    std::vector<std::pair<std::string, std::string>> dropped;  // (unit, reason)
};

/// CSV ingestion with the inclusion criteria: enough pre-event years,
/// enough post-event years, bounded missingness. Units failing a criterion
/// are dropped with a reason; a series unit missing from the covariate
/// table is an error.
IngestResult ingest(const PipelineConfig& cfg);

/// Ingest from CSVs or generate synthetically, per config.
IngestResult load_input(const PipelineConfig& cfg);

/// STL per unit (optionally in parallel), per-unit decomposition CSVs when
/// out_dir is nonempty, and the aligned trend dataset.
FunctionalDatasetD decompose_and_align(const std::vector<RawSeriesD>& series,
                                       const PipelineConfig& cfg,
                                       const std::filesystem::path& out_dir = {});

/// Groups from config, or one group per numeric covariate with categorical
/// columns attached to a group of their own name when configured.
std::vector<CovariateGroup> resolve_groups(const PipelineConfig& cfg,
                                           const CovariateTableD& covariates);

/// Stage artifact writers, shared between `run` and the per-stage
/// subcommands so both paths emit identical files. Each appends the
/// relative paths it wrote to `artifacts`.
void write_align_artifacts(const FunctionalDatasetD& dataset,
                           const std::filesystem::path& out_dir,
                           std::vector<std::string>& artifacts);
void write_fpca_artifacts(const FpcaResultD& result, double band_multiplier,
                          const std::filesystem::path& out_dir,
                          std::vector<std::string>& artifacts);
void write_fit_artifacts(const FittedModelD& model, const TimeGridD& grid,
                         const std::filesystem::path& out_dir,
                         std::vector<std::string>& artifacts);

/// Runs every stage and writes the artifact directory; returns the list of
/// artifact paths relative to out_dir (the manifest content).
std::vector<std::string> run_pipeline(const PipelineConfig& cfg);

}  // namespace firefda::pipeline
