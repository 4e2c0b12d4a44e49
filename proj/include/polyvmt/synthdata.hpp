#pragma once

#include "polyvmt/access.hpp"
#include "polyvmt/hexgrid.hpp"
#include "polyvmt/household.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace polyvmt {

enum class AmenityShape {
    Stations,      // discrete points around each cluster anchor
    RadialLines,   // polylines from the historic anchor out to each cluster
    ChainLines,    // polylines joining clusters in size order
};

struct AmenityLayerSpec {
    std::string name;
    AmenityShape shape = AmenityShape::Stations;
    Point2 offset;              // shift from the cluster anchors, miles
    int noise_points = 4;       // uniformly scattered extra points
};

struct SynthConfig {
    std::uint64_t seed = 20120101;
    BBox bbox{0.0, 0.0, 30.0, 30.0};
    double cell_area = 1.0;
    Orientation orientation = Orientation::PointyTop;

    // Employment geography
    int cluster_count = 10;
    std::vector<Point2> cluster_centers;   // drawn uniformly in the inner bbox when empty
    std::vector<double> cluster_jobs;      // defaults to a geometric size ladder
    double largest_cluster_jobs = 120'000.0;
    double cluster_size_ratio = 0.8;       // each cluster relative to the previous one
    double cluster_spread = 1.0;           // Gaussian sd, miles
    double cluster_truncation = 3.0;       // in units of spread
    double cluster_separation = 4.0;       // minimum gap between drawn centers, in units of spread
    double background_intensity = 150.0;   // jobs per square mile
    double mean_establishment_size = 12.0;

    // Historic layers used as instruments
    std::vector<AmenityLayerSpec> amenity_layers{
        {"rail_stations", AmenityShape::Stations, {0.6, -0.4}, 4},
        {"streetcar_lines", AmenityShape::RadialLines, {0.3, 0.3}, 4},
        {"planned_highways", AmenityShape::ChainLines, {-0.5, 0.5}, 4},
    };
    Point2 anchor_offset{0.8, 0.6};        // historic anchor relative to the largest cluster

    // Households and the VMT process
    std::size_t households = 5000;
    std::map<std::string, double> access_beta{{"acc_centered", -6.0}, {"acc_noncentered", -15.0}};
    double beta_vehicles = 11.0;
    double beta_income_step = 1.5;         // per income category above the reference
    double beta_hh_size = 3.0;
    double beta_tract_density = -0.3;
    double sigma = 42.0;
    double target_censoring = 0.27;
    double endogeneity = 5.0;              // loading of the shared unobservable on the error
    std::vector<std::string> instruments{"iv_rail_stations", "iv_streetcar_lines", "iv_planned_highways",
                                         "iv_anchor"};
    double urban_core_share = 0.7;         // western share of the bbox flagged urban core

    /// Throws ConfigError on invalid settings.
    void validate() const;
    std::vector<double> resolved_cluster_jobs() const;
};

struct AmenityLayer {
    std::string name;
    std::vector<PointRecord> points;
};

struct Region {
    std::vector<PointRecord> establishments;
    std::vector<AmenityLayer> amenities;
    std::vector<Point2> cluster_centers;
    Point2 anchor;
};

/// Clustered Gaussian establishments over a uniform background, plus amenity
/// layers tied to the cluster anchors. Pure function of the config.
Region gen_region(const SynthConfig& cfg);

struct SynthTruth {
    double intercept = 0.0;
    std::map<std::string, double> beta;   // every structural coefficient by regressor name
    double sigma = 0.0;
    double endogeneity = 0.0;
    double target_censoring = 0.0;
    double realized_censoring = 0.0;
    std::vector<std::string> endogenous;
    std::vector<std::string> instruments;
};

struct SynthHouseholds {
    HouseholdSample sample;   // access vectors attached
    SynthTruth truth;
    std::vector<double> unobservable;   // per cell
};

/// Households on uniformly drawn cells with Tobit VMT. The shared
/// unobservable is the instrument-orthogonal part of the cell's access mix
/// (sign chosen so higher access pairs with a lower error); it enters VMT
/// with loading `endogeneity`. The intercept is bisected so the censored
/// share lands within one point of the target.
SynthHouseholds gen_households(const SynthConfig& cfg, const HexGrid& grid, std::span<const AccessVector> access);

} // namespace polyvmt
