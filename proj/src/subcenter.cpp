#include "polyvmt/subcenter.hpp"

#include "polyvmt/error.hpp"
#include "polyvmt/io.hpp"
#include "polyvmt/numeric.hpp"

#include <algorithm>
#include <cmath>

namespace polyvmt {

std::vector<int> SubCenterSet::membership(std::size_t cells) const {
    std::vector<int> out(cells, -1);
    for (std::size_t c = 0; c < centers.size(); ++c)
        for (CellId id : centers[c].members)
            out.at(id) = static_cast<int>(c);
    return out;
}

double SubCenterSet::total_jobs() const {
    CompensatedSum acc;
    for (const auto& c : centers)
        acc.add(c.total_jobs);
    return acc.value();
}

double density_threshold(const EmploymentField& field, const HexGrid& grid, double percentile,
                         PercentilePopulation population) {
    if (!(percentile > 0.0 && percentile < 1.0))
        throw ConfigError("percentile must lie in (0, 1), got " + format_double(percentile));
    if (grid.size() == 0)
        throw ConfigError("grid has no cells");
    if (field.size() != grid.size())
        throw DataError("employment field size does not match the grid");

    std::vector<double> density;
    density.reserve(grid.size());
    for (double jobs : field.values())
        if (population == PercentilePopulation::AllCells || jobs > 0.0)
            density.push_back(jobs / grid.cell_area());
    if (density.empty())
        throw DataError("no cells with positive employment to form the percentile");
    std::sort(density.begin(), density.end());
    const auto n = static_cast<double>(density.size());
    auto rank = static_cast<std::size_t>(std::ceil(percentile * n));
    rank = std::clamp<std::size_t>(rank, 1, density.size());
    return density[rank - 1];
}

SubCenterSet identify_subcenters(const HexGrid& grid, const EmploymentField& field, double percentile,
                                 double min_total_jobs, PercentilePopulation population) {
    if (!(min_total_jobs >= 0.0))
        throw ConfigError("min_total_jobs must be non-negative");
    SubCenterSet out;
    out.percentile = percentile;
    out.min_total_jobs = min_total_jobs;
    out.threshold_density = density_threshold(field, grid, percentile, population);

    const std::size_t n = grid.size();
    std::vector<char> candidate(n, 0);
    for (CellId id = 0; id < n; ++id)
        candidate[id] = field[id] / grid.cell_area() > out.threshold_density;

    // Seeds are visited in id order and members sorted, so the output does not
    // depend on traversal details.
    std::vector<char> seen(n, 0);
    std::vector<CellId> stack;
    for (CellId seed = 0; seed < n; ++seed) {
        if (!candidate[seed] || seen[seed])
            continue;
        SubCenter comp;
        seen[seed] = 1;
        stack.assign(1, seed);
        while (!stack.empty()) {
            const CellId cur = stack.back();
            stack.pop_back();
            comp.members.push_back(cur);
            for (CellId nb : grid.neighbors(cur)) {
                if (candidate[nb] && !seen[nb]) {
                    seen[nb] = 1;
                    stack.push_back(nb);
                }
            }
        }
        std::sort(comp.members.begin(), comp.members.end());
        CompensatedSum total;
        for (CellId id : comp.members) {
            total.add(field[id]);
            comp.peak_density = std::max(comp.peak_density, field[id] / grid.cell_area());
        }
        comp.total_jobs = total.value();
        if (comp.total_jobs >= min_total_jobs)
            out.centers.push_back(std::move(comp));
    }

    std::sort(out.centers.begin(), out.centers.end(), [](const SubCenter& a, const SubCenter& b) {
        if (a.total_jobs != b.total_jobs)
            return a.total_jobs > b.total_jobs;
        return a.members.front() < b.members.front();
    });
    for (std::size_t k = 0; k < out.centers.size(); ++k)
        out.centers[k].rank = static_cast<int>(k + 1);
    return out;
}

std::string RankInterval::label() const {
    if (!last)
        return "rank_" + std::to_string(first) + "_plus";
    if (*last == first)
        return "rank_" + std::to_string(first);
    return "rank_" + std::to_string(first) + "_" + std::to_string(*last);
}

std::vector<RankInterval> parse_rank_grouping(std::string_view text) {
    std::vector<RankInterval> out;
    for (const auto& item : split_list(text)) {
        if (item.empty())
            throw ConfigError("empty rank interval in grouping '" + std::string(text) + "'");
        RankInterval iv;
        try {
            if (item.back() == '+') {
                iv.first = std::stoi(item.substr(0, item.size() - 1));
            } else if (const auto dash = item.find('-'); dash != std::string::npos) {
                iv.first = std::stoi(item.substr(0, dash));
                iv.last = std::stoi(item.substr(dash + 1));
            } else {
                iv.first = std::stoi(item);
                iv.last = iv.first;
            }
        } catch (const std::logic_error&) {
            throw ConfigError("malformed rank interval '" + item + "'");
        }
        out.push_back(iv);
    }
    validate_grouping(out);
    return out;
}

void validate_grouping(const std::vector<RankInterval>& grouping) {
    if (grouping.empty())
        throw ConfigError("rank grouping is empty");
    std::vector<RankInterval> sorted = grouping;
    for (const auto& iv : sorted)
        if (iv.first < 1 || (iv.last && *iv.last < iv.first))
            throw ConfigError("invalid rank interval " + iv.label());
    std::sort(sorted.begin(), sorted.end(),
              [](const RankInterval& a, const RankInterval& b) { return a.first < b.first; });
    if (sorted.front().first != 1)
        throw ConfigError("rank grouping must start at rank 1");
    for (std::size_t k = 0; k + 1 < sorted.size(); ++k) {
        if (!sorted[k].last || *sorted[k].last >= sorted[k + 1].first)
            throw ConfigError("rank intervals " + sorted[k].label() + " and " + sorted[k + 1].label() +
                              " overlap");
        if (*sorted[k].last + 1 != sorted[k + 1].first)
            throw ConfigError("rank grouping leaves a gap after " + sorted[k].label());
    }
    if (sorted.back().last)
        throw ConfigError("rank grouping must end with an unbounded interval");
}

std::vector<std::string> CellClassification::label_names() const {
    std::vector<std::string> out;
    for (const auto& iv : grouping)
        out.push_back(iv.label());
    return out;
}

CellClassification classify_cells(const HexGrid& grid, const SubCenterSet& centers,
                                  const std::vector<RankInterval>& grouping) {
    validate_grouping(grouping);
    CellClassification out;
    out.grouping = grouping;
    out.labels.assign(grid.size(), CellClassification::kOutside);
    for (const auto& center : centers.centers) {
        int label = CellClassification::kOutside;
        for (std::size_t k = 0; k < grouping.size(); ++k)
            if (grouping[k].contains(center.rank))
                label = static_cast<int>(k);
        for (CellId id : center.members) {
            if (id >= grid.size())
                throw LookupError("center member " + std::to_string(id) + " is not a grid cell");
            out.labels[id] = label;
        }
    }
    return out;
}

} // namespace polyvmt
