#include "polyvmt/access.hpp"

#include "polyvmt/error.hpp"
#include "polyvmt/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace polyvmt {

namespace {

struct Source {
    CellId id;
    double x;
    double y;
    double weight;
};

std::vector<double> gravity_sum(const HexGrid& grid, std::span<const double> weights,
                                const std::vector<char>& mask, double scale, unsigned threads) {
    const std::size_t n = grid.size();
    std::vector<Source> sources;
    for (CellId j = 0; j < n; ++j) {
        if (mask[j] && weights[j] != 0.0) {
            const Point2 c = grid.centroid(j);
            sources.push_back({j, c.x, c.y, weights[j]});
        }
    }
    std::vector<double> out(n, 0.0);
    parallel_for(n, threads, [&](std::size_t i) {
        const Point2 ci = grid.centroid(i);
        CompensatedSum acc;
        for (const auto& s : sources) {
            if (s.id == i) {
                acc.add(s.weight);
                continue;
            }
            const double dx = s.x - ci.x;
            const double dy = s.y - ci.y;
            const double d2 = dx * dx + dy * dy;
            if (d2 == 0.0)
                throw DataError("cells " + std::to_string(i) + " and " + std::to_string(s.id) +
                                " have coincident centroids");
            acc.add(s.weight / d2);
        }
        out[i] = acc.value() / scale;
    });
    return out;
}

} // namespace

std::string to_string(AccessKind kind) {
    switch (kind) {
    case AccessKind::EmploymentGravity: return "employment-gravity";
    case AccessKind::AmenityGravity: return "amenity-gravity";
    case AccessKind::AnchorInverseDistance: return "anchor-inverse-distance";
    }
    return "unknown";
}

AmenityField::AmenityField(std::vector<double> indicator) : values_(std::move(indicator)) {
    for (std::size_t i = 0; i < values_.size(); ++i)
        if (values_[i] != 0.0 && values_[i] != 1.0)
            throw DataError("amenity indicator at cell " + std::to_string(i) + " is not binary");
}

AmenityField AmenityField::from_points(const HexGrid& grid, std::span<const PointRecord> points) {
    std::vector<double> ind(grid.size(), 0.0);
    for (const auto& p : points)
        ind[grid.assign(p)] = 1.0;
    return AmenityField(std::move(ind));
}

std::size_t AmenityField::count() const {
    return static_cast<std::size_t>(std::count(values_.begin(), values_.end(), 1.0));
}

AccessVector gravity_access(const HexGrid& grid, const EmploymentField& field, const CellMask& mask,
                            double scale, unsigned threads) {
    if (!(scale > 0.0))
        throw ConfigError("access scale must be positive");
    if (field.size() != grid.size())
        throw DataError("employment field size does not match the grid");
    std::vector<char> m(grid.size(), 1);
    if (mask)
        for (CellId j = 0; j < grid.size(); ++j)
            m[j] = mask(j) ? 1 : 0;
    AccessVector out;
    out.kind = AccessKind::EmploymentGravity;
    out.scale = scale;
    out.mask = mask ? "custom" : "all";
    out.values = gravity_sum(grid, field.values(), m, scale, threads);
    return out;
}

std::vector<AccessVector> partition_access(const HexGrid& grid, const EmploymentField& field,
                                           const CellClassification& classification, double scale,
                                           unsigned threads) {
    if (classification.labels.size() != grid.size())
        throw DataError("classification covers " + std::to_string(classification.labels.size()) +
                        " cells but the grid has " + std::to_string(grid.size()));
    std::vector<AccessVector> out;
    auto all = gravity_access(grid, field, {}, scale, threads);
    all.name = "all";
    out.push_back(std::move(all));

    const auto names = classification.label_names();
    for (int label = 0; label <= static_cast<int>(names.size()); ++label) {
        const int wanted = label < static_cast<int>(names.size()) ? label : CellClassification::kOutside;
        auto v = gravity_access(
            grid, field, [&](CellId id) { return classification.labels[id] == wanted; }, scale, threads);
        v.name = wanted == CellClassification::kOutside ? "outside" : names[static_cast<std::size_t>(label)];
        v.mask = v.name;
        out.push_back(std::move(v));
    }
    return out;
}

AccessVector amenity_access(const HexGrid& grid, const AmenityField& amenity, unsigned threads) {
    if (amenity.size() != grid.size())
        throw DataError("amenity field size does not match the grid");
    std::vector<char> m(grid.size(), 1);
    AccessVector out;
    out.kind = AccessKind::AmenityGravity;
    out.scale = 1.0;
    out.mask = "all";
    out.values = gravity_sum(grid, amenity.values(), m, 1.0, threads);
    return out;
}

AccessVector anchor_inverse_distance(const HexGrid& grid, CellId anchor) {
    if (anchor >= grid.size())
        throw LookupError("unknown anchor cell id " + std::to_string(anchor));
    AccessVector out;
    out.kind = AccessKind::AnchorInverseDistance;
    out.scale = 1.0;
    out.mask = "anchor";
    out.values.resize(grid.size());
    for (CellId i = 0; i < grid.size(); ++i) {
        if (i == anchor) {
            out.values[i] = 1.0;
            continue;
        }
        const double d = grid.distance(i, anchor);
        if (d == 0.0)
            throw DataError("cell " + std::to_string(i) + " shares its centroid with the anchor");
        out.values[i] = 1.0 / d;
    }
    return out;
}

std::vector<int> quantile_classes(std::span<const double> values, int k) {
    if (k < 2)
        throw ConfigError("quantile classes need k >= 2");
    const std::size_t n = values.size();
    if (n < static_cast<std::size_t>(k))
        throw DataError("cannot form " + std::to_string(k) + " classes from " + std::to_string(n) + " cells");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (values[a] != values[b])
            return values[a] < values[b];
        return a < b;
    });
    std::vector<int> out(n, 0);
    int prev_class = 0;
    for (std::size_t pos = 0; pos < n; ++pos) {
        const std::size_t rank = pos + 1;
        int cls = static_cast<int>((rank * static_cast<std::size_t>(k) + n - 1) / n);
        if (pos > 0 && values[order[pos]] == values[order[pos - 1]])
            cls = prev_class;
        out[order[pos]] = cls;
        prev_class = cls;
    }
    return out;
}

} // namespace polyvmt
