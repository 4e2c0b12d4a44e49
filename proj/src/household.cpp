#include "polyvmt/household.hpp"

#include "polyvmt/error.hpp"

#include <algorithm>
#include <cmath>

namespace polyvmt {

Eigen::VectorXd HouseholdSample::vmt() const {
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        y(static_cast<Eigen::Index>(i)) = rows[i].vmt;
    return y;
}

const std::vector<double>& HouseholdSample::access_column(const std::string& name) const {
    const auto it = access.find(name);
    if (it == access.end())
        throw LookupError("no access column '" + name + "' attached to the household sample");
    return it->second;
}

std::vector<std::string> HouseholdSample::access_names() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : access)
        out.push_back(k);
    return out;
}

HouseholdSample parse_households(const CsvTable& table, double outlier_cap) {
    if (!(outlier_cap > 0.0))
        throw ConfigError("outlier cap must be positive");
    const std::size_t c_id = table.column("household_id");
    const std::size_t c_vmt = table.column("vmt");
    const std::size_t c_veh = table.column("vehicles");
    const std::size_t c_inc = table.column("income_cat");
    const std::size_t c_size = table.column("hh_size");
    const std::size_t c_dens = table.column("tract_density");
    const std::size_t c_q = table.column("cell_q");
    const std::size_t c_r = table.column("cell_r");
    const std::size_t c_urban = table.column("urban_core");

    HouseholdSample sample;
    auto& rep = sample.report;
    for (std::size_t k = 0; k < table.rows.size(); ++k) {
        const auto& row = table.rows[k];
        ++rep.rows_read;
        const auto id = parse_int(row[c_id]);
        const auto vmt = parse_double(row[c_vmt]);
        const auto veh = parse_double(row[c_veh]);
        const auto inc = parse_int(row[c_inc]);
        const auto size = parse_double(row[c_size]);
        const auto dens = parse_double(row[c_dens]);
        const auto q = parse_int(row[c_q]);
        const auto r = parse_int(row[c_r]);
        const auto urban = parse_int(row[c_urban]);
        if (!vmt || !veh || !inc || !size || !dens || !q || !r || !urban) {
            ++rep.dropped_missing;
            continue;
        }
        if (*vmt < 0.0)
            throw DataError("household row " + std::to_string(k) + " has negative VMT");
        if (*inc < 1 || *inc > kIncomeCategories)
            throw DataError("household row " + std::to_string(k) + " has income category outside 1-10");
        if (*vmt > outlier_cap) {
            ++rep.dropped_outlier;
            continue;
        }
        Household h;
        h.id = id.value_or(static_cast<long long>(k));
        h.vmt = *vmt;
        h.vehicles = *veh;
        h.income_cat = static_cast<int>(*inc);
        h.hh_size = *size;
        h.tract_density = *dens;
        h.cell = {static_cast<int>(*q), static_cast<int>(*r)};
        h.urban_core = *urban != 0;
        sample.rows.push_back(h);
    }
    rep.retained = sample.rows.size();
    if (sample.rows.empty())
        throw DataError("no households retained after filtering (" + std::to_string(rep.dropped_missing) +
                        " missing, " + std::to_string(rep.dropped_outlier) + " over the outlier cap)");
    const auto zeros = std::count_if(sample.rows.begin(), sample.rows.end(),
                                     [](const Household& h) { return h.vmt == 0.0; });
    rep.censor_share = static_cast<double>(zeros) / static_cast<double>(sample.rows.size());
    return sample;
}

HouseholdSample load_households(const std::filesystem::path& path, double outlier_cap) {
    return parse_households(read_csv(path), outlier_cap);
}

void write_households(const std::filesystem::path& path, const HouseholdSample& sample) {
    CsvWriter csv({"household_id", "vmt", "vehicles", "income_cat", "hh_size", "tract_density", "cell_q",
                   "cell_r", "urban_core"});
    for (const auto& h : sample.rows)
        csv.row({format_int(h.id), format_double(h.vmt), format_double(h.vehicles), format_int(h.income_cat),
                 format_double(h.hh_size), format_double(h.tract_density), format_int(h.cell.q),
                 format_int(h.cell.r), h.urban_core ? "1" : "0"});
    csv.save(path);
}

void attach_access(HouseholdSample& sample, const HexGrid& grid, std::span<const AccessVector> vectors) {
    std::vector<CellId> cells(sample.size());
    for (std::size_t i = 0; i < sample.size(); ++i)
        cells[i] = grid.id_of(sample.rows[i].cell);
    for (const auto& v : vectors) {
        if (v.values.size() != grid.size())
            throw DataError("access vector '" + v.name + "' does not match the grid");
        std::vector<double> col(sample.size());
        for (std::size_t i = 0; i < sample.size(); ++i)
            col[i] = v.values[cells[i]];
        sample.access[v.name] = std::move(col);
    }
}

void attach_access(HouseholdSample& sample, const CsvTable& access_table) {
    const std::size_t cq = access_table.column("cell_q");
    const std::size_t cr = access_table.column("cell_r");
    std::map<HexCoord, std::size_t> index;
    for (std::size_t k = 0; k < access_table.rows.size(); ++k) {
        const auto q = parse_int(access_table.rows[k][cq]);
        const auto r = parse_int(access_table.rows[k][cr]);
        if (!q || !r)
            throw DataError("access table row " + std::to_string(k) + " has no cell coordinate");
        index[{static_cast<int>(*q), static_cast<int>(*r)}] = k;
    }
    std::vector<std::size_t> at(sample.size());
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const auto it = index.find(sample.rows[i].cell);
        if (it == index.end())
            throw LookupError("household " + std::to_string(sample.rows[i].id) + " lives in cell (" +
                              std::to_string(sample.rows[i].cell.q) + ", " + std::to_string(sample.rows[i].cell.r) +
                              ") which has no access values");
        at[i] = it->second;
    }
    for (std::size_t c = 0; c < access_table.header.size(); ++c) {
        if (c == cq || c == cr)
            continue;
        std::vector<double> col(sample.size());
        for (std::size_t i = 0; i < sample.size(); ++i) {
            const auto v = parse_double(access_table.rows[at[i]][c]);
            if (!v)
                throw DataError("missing access value in column '" + access_table.header[c] + "'");
            col[i] = *v;
        }
        sample.access[access_table.header[c]] = std::move(col);
    }
}

std::size_t Design::index_of(const std::string& name) const {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end())
        throw LookupError("no regressor named '" + name + "'");
    return static_cast<std::size_t>(it - names.begin());
}

std::vector<std::string> default_controls() { return {"vehicles", "income", "hh_size", "tract_density"}; }

Design build_design(const HouseholdSample& sample, const std::vector<std::string>& access_cols,
                    const std::vector<std::string>& controls, const RowFilter& filter) {
    Design d;
    for (std::size_t i = 0; i < sample.size(); ++i)
        if (!filter || filter(sample.rows[i]))
            d.rows.push_back(i);
    if (d.rows.empty())
        throw DataError("row filter leaves no households");

    using Getter = std::function<double(std::size_t)>;
    std::vector<Getter> cols;
    d.names.push_back("intercept");
    cols.push_back([](std::size_t) { return 1.0; });
    for (const auto& a : access_cols) {
        const auto& values = sample.access_column(a);
        d.names.push_back(a);
        cols.push_back([&values](std::size_t i) { return values[i]; });
    }
    for (const auto& c : controls) {
        const auto& rows = sample.rows;
        if (c == "vehicles") {
            d.names.push_back(c);
            cols.push_back([&rows](std::size_t i) { return rows[i].vehicles; });
        } else if (c == "income") {
            for (int cat = 2; cat <= kIncomeCategories; ++cat) {
                d.names.push_back("income_" + std::to_string(cat));
                cols.push_back([&rows, cat](std::size_t i) { return rows[i].income_cat == cat ? 1.0 : 0.0; });
            }
        } else if (c == "hh_size") {
            d.names.push_back(c);
            cols.push_back([&rows](std::size_t i) { return rows[i].hh_size; });
        } else if (c == "tract_density") {
            d.names.push_back(c);
            cols.push_back([&rows](std::size_t i) { return rows[i].tract_density; });
        } else if (c == "urban_core") {
            d.names.push_back(c);
            cols.push_back([&rows](std::size_t i) { return rows[i].urban_core ? 1.0 : 0.0; });
        } else if (sample.access.count(c)) {
            const auto& values = sample.access_column(c);
            d.names.push_back(c);
            cols.push_back([&values](std::size_t i) { return values[i]; });
        } else {
            throw ConfigError("unknown control variable '" + c + "'");
        }
    }

    const auto n = static_cast<Eigen::Index>(d.rows.size());
    const auto p = static_cast<Eigen::Index>(cols.size());
    d.X.resize(n, p);
    d.y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const std::size_t row = d.rows[static_cast<std::size_t>(i)];
        d.y(i) = sample.rows[row].vmt;
        for (Eigen::Index j = 0; j < p; ++j)
            d.X(i, j) = cols[static_cast<std::size_t>(j)](row);
    }
    return d;
}

} // namespace polyvmt
