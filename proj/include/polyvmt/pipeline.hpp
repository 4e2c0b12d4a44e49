#pragma once

#include "polyvmt/effects.hpp"
#include "polyvmt/hexgrid.hpp"
#include "polyvmt/io.hpp"
#include "polyvmt/subcenter.hpp"
#include "polyvmt/synthdata.hpp"

#include <cstdint>
#include <exception>
#include <filesystem>
#include <string>
#include <vector>

namespace polyvmt {

/// Exit statuses of the command-line tool.
enum ExitCode : int {
    kExitOk = 0,
    kExitUnexpected = 1,
    kExitConfig = 2,
    kExitData = 3,
    kExitEstimation = 4,
    kExitMissingArtifact = 5,
};

int exit_code_for(const std::exception& e);

/// One family of models sharing access columns and instruments. Each family is
/// fitted on every configured sample with Tobit, and with two-step IV-Tobit
/// when it has instruments.
struct ModelFamily {
    std::string name;
    std::vector<std::string> access;
    std::vector<std::string> instruments;
};

struct PipelineConfig {
    KeyValues resolved;   // every key after defaults, file and overrides

    std::filesystem::path out_dir;
    std::uint64_t seed = 0;
    unsigned threads = 1;

    BBox bbox;
    double cell_area = 1.0;
    Orientation orientation = Orientation::PointyTop;
    std::optional<Equirectangular> projection;
    OutOfBoundsPolicy out_of_bbox = OutOfBoundsPolicy::Drop;

    std::filesystem::path establishments;
    std::filesystem::path households;
    std::vector<std::string> amenity_layers;
    std::string anchor;

    double percentile = 0.95;
    double min_jobs = 10'000.0;
    PercentilePopulation percentile_population = PercentilePopulation::AllCells;
    std::vector<RankInterval> rank_grouping;
    double access_scale = 10'000.0;

    double outlier_cap = 200.0;
    std::vector<std::string> controls;
    std::vector<ModelFamily> families;
    std::vector<std::string> samples;
    std::vector<std::string> stability_families;
    ElasticityPolicy elasticity_policy = ElasticityPolicy::ObservedPositive;
    int bootstrap_reps = 200;

    std::string scenario_model;
    std::string scenario_variable;
    double scenario_pct = 100.0;
    std::string quintile_variable;
    int quintile_k = 5;

    SynthConfig synth;

    std::filesystem::path amenity_path(const std::string& layer) const;
    std::filesystem::path artifact(const std::string& file) const { return out_dir / file; }
};

/// Built-in defaults.
KeyValues default_key_values();

/// Defaults, then the file (if any), then `overrides`. Unknown keys and
/// invalid values raise ConfigError.
PipelineConfig resolve_config(const std::optional<std::filesystem::path>& file, const KeyValues& overrides = {});
PipelineConfig resolve_config(const KeyValues& kv);

const std::vector<std::string>& stage_names();

/// Runs one stage. Reads and writes only the declared files under out_dir.
void run_stage(std::string_view stage, const PipelineConfig& cfg);

void stage_synth(const PipelineConfig& cfg);
void stage_grid(const PipelineConfig& cfg);
void stage_centers(const PipelineConfig& cfg);
void stage_access(const PipelineConfig& cfg);
void stage_estimate(const PipelineConfig& cfg);
void stage_iv_estimate(const PipelineConfig& cfg);
void stage_elasticity(const PipelineConfig& cfg);
void stage_scenario(const PipelineConfig& cfg);
void stage_report(const PipelineConfig& cfg);

/// Named access vectors as written to access.csv: acc_all, acc_centered,
/// acc_noncentered, acc_<rank label>..., iv_<layer>..., iv_anchor.
std::vector<AccessVector> compute_access_vectors(const PipelineConfig& cfg, const HexGrid& grid,
                                                 const EmploymentField& field, const SubCenterSet& centers,
                                                 const std::vector<AmenityField>& amenities, CellId anchor);

HexGrid build_configured_grid(const PipelineConfig& cfg);

} // namespace polyvmt
