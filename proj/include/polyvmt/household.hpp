#pragma once

#include "polyvmt/access.hpp"
#include "polyvmt/hexgrid.hpp"
#include "polyvmt/io.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace polyvmt {

inline constexpr double kDefaultOutlierCap = 200.0;
inline constexpr int kIncomeCategories = 10;

struct Household {
    long long id = 0;
    double vmt = 0.0;            // miles per day
    double vehicles = 0.0;
    int income_cat = 1;          // 1..10, 1 is the reference category
    double hh_size = 1.0;
    double tract_density = 0.0;  // 1,000 persons per square mile
    HexCoord cell;
    bool urban_core = false;
};

struct LoadReport {
    std::size_t rows_read = 0;
    std::size_t dropped_missing = 0;
    std::size_t dropped_outlier = 0;
    std::size_t retained = 0;
    double censor_share = 0.0;   // share of retained rows with VMT == 0
};

struct HouseholdSample {
    std::vector<Household> rows;
    /// Access values attached per row, keyed by column name.
    std::map<std::string, std::vector<double>> access;
    LoadReport report;

    std::size_t size() const noexcept { return rows.size(); }
    Eigen::VectorXd vmt() const;
    /// Throws LookupError for unknown columns.
    const std::vector<double>& access_column(const std::string& name) const;
    std::vector<std::string> access_names() const;
};

/// Columns: household_id,vmt,vehicles,income_cat,hh_size,tract_density,cell_q,cell_r,urban_core.
/// Rows with a missing modeled field are dropped first, then rows with VMT above the cap.
HouseholdSample load_households(const std::filesystem::path& path, double outlier_cap = kDefaultOutlierCap);
HouseholdSample parse_households(const CsvTable& table, double outlier_cap = kDefaultOutlierCap);
void write_households(const std::filesystem::path& path, const HouseholdSample& sample);

/// Attaches each vector's value at the household's residence cell.
void attach_access(HouseholdSample& sample, const HexGrid& grid, std::span<const AccessVector> vectors);
/// Same, from an access table keyed by `cell_q,cell_r`.
void attach_access(HouseholdSample& sample, const CsvTable& access_table);

/// Regressors: intercept, access columns, then expanded controls. Recognised
/// controls: vehicles, income (dummies income_2..income_10), hh_size,
/// tract_density, urban_core.
struct Design {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    std::vector<std::string> names;
    std::vector<std::size_t> rows;   // sample row indices used

    std::size_t index_of(const std::string& name) const;
};

using RowFilter = std::function<bool(const Household&)>;

Design build_design(const HouseholdSample& sample, const std::vector<std::string>& access_cols,
                    const std::vector<std::string>& controls, const RowFilter& filter = {});

std::vector<std::string> default_controls();

} // namespace polyvmt
