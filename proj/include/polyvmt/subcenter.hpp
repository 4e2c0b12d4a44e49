#pragma once

#include "polyvmt/hexgrid.hpp"

#include <optional>
#include <string>
#include <vector>

namespace polyvmt {

/// Which cells enter the density percentile.
enum class PercentilePopulation { AllCells, PositiveCells };

struct SubCenter {
    int rank = 0;                  // 1-based, by total jobs descending
    std::vector<CellId> members;   // ascending
    double total_jobs = 0.0;
    double peak_density = 0.0;     // jobs per square mile
};

struct SubCenterSet {
    std::vector<SubCenter> centers;
    double threshold_density = 0.0;
    double min_total_jobs = 0.0;
    double percentile = 0.0;

    /// Center index (0-based) per cell, or -1.
    std::vector<int> membership(std::size_t cells) const;
    double total_jobs() const;
};

/// Nearest-rank percentile of cell densities (jobs / cell area).
double density_threshold(const EmploymentField& field, const HexGrid& grid, double percentile,
                         PercentilePopulation population = PercentilePopulation::AllCells);

/// Cells strictly above the density threshold, grouped by shared edges;
/// components with at least `min_total_jobs` become centers.
SubCenterSet identify_subcenters(const HexGrid& grid, const EmploymentField& field, double percentile,
                                 double min_total_jobs,
                                 PercentilePopulation population = PercentilePopulation::AllCells);

/// Closed rank interval; `last` empty means unbounded.
struct RankInterval {
    int first = 1;
    std::optional<int> last;

    bool contains(int rank) const noexcept { return rank >= first && (!last || rank <= *last); }
    std::string label() const;
};

/// Parses "1,2,3+" style groupings: `a` is [a, a], `a-b` is [a, b], `a+` is [a, inf).
std::vector<RankInterval> parse_rank_grouping(std::string_view text);

struct CellClassification {
    std::vector<RankInterval> grouping;
    std::vector<int> labels;   // interval index per cell, kOutside when in no center

    static constexpr int kOutside = -1;
    std::vector<std::string> label_names() const;
};

/// Intervals must be disjoint and cover [1, inf); otherwise ConfigError.
void validate_grouping(const std::vector<RankInterval>& grouping);

CellClassification classify_cells(const HexGrid& grid, const SubCenterSet& centers,
                                  const std::vector<RankInterval>& grouping);

} // namespace polyvmt
