#include "polyvmt/hexgrid.hpp"

#include "polyvmt/error.hpp"
#include "polyvmt/io.hpp"
#include "polyvmt/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace polyvmt {

namespace {

constexpr double kSqrt3 = std::numbers::sqrt3;
constexpr std::array<HexCoord, 6> kDirections{{{1, 0}, {1, -1}, {0, -1}, {-1, 0}, {-1, 1}, {0, 1}}};

HexCoord cube_round(double fq, double fr) {
    const double fs = -fq - fr;
    double q = std::round(fq);
    double r = std::round(fr);
    const double s = std::round(fs);
    const double dq = std::abs(q - fq);
    const double dr = std::abs(r - fr);
    const double ds = std::abs(s - fs);
    if (dq > dr && dq > ds)
        q = -r - s;
    else if (dr > ds)
        r = -q - s;
    return {static_cast<int>(q), static_cast<int>(r)};
}

std::string point_text(Point2 p) {
    return "(" + format_double(p.x) + ", " + format_double(p.y) + ")";
}

// Projection interval of a point set onto `axis`.
template <std::size_t N>
std::pair<double, double> project(const std::array<Point2, N>& pts, Point2 axis) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& p : pts) {
        const double d = p.x * axis.x + p.y * axis.y;
        lo = std::min(lo, d);
        hi = std::max(hi, d);
    }
    return {lo, hi};
}

// Separating-axis test; interiors intersect iff every axis shows positive overlap.
bool interiors_intersect(const std::array<Point2, 6>& hex, const BBox& box, double tol) {
    const std::array<Point2, 4> rect{{{box.xmin, box.ymin}, {box.xmax, box.ymin},
                                      {box.xmax, box.ymax}, {box.xmin, box.ymax}}};
    std::array<Point2, 5> axes{};
    axes[0] = {1.0, 0.0};
    axes[1] = {0.0, 1.0};
    for (std::size_t k = 0; k < 3; ++k) {
        const Point2 a = hex[k];
        const Point2 b = hex[k + 1];
        axes[2 + k] = {-(b.y - a.y), b.x - a.x};
    }
    for (const auto& axis : axes) {
        const double norm = std::hypot(axis.x, axis.y);
        const Point2 unit{axis.x / norm, axis.y / norm};
        const auto [hl, hh] = project(hex, unit);
        const auto [rl, rh] = project(rect, unit);
        if (std::min(hh, rh) - std::max(hl, rl) <= tol)
            return false;
    }
    return true;
}

} // namespace

std::string to_string(Orientation o) {
    return o == Orientation::PointyTop ? "pointy" : "flat";
}

Orientation parse_orientation(std::string_view s) {
    if (s == "pointy" || s == "pointy-top" || s == "pointy_top")
        return Orientation::PointyTop;
    if (s == "flat" || s == "flat-top" || s == "flat_top")
        return Orientation::FlatTop;
    throw ConfigError("unknown hexagon orientation '" + std::string(s) + "' (expected pointy or flat)");
}

double hex_side_length(double cell_area) {
    return std::sqrt(2.0 * cell_area / (3.0 * kSqrt3));
}

HexGrid::HexGrid(BBox bbox, double cell_area, Orientation orientation, Point2 origin,
                 std::vector<HexCoord> coords)
    : bbox_(bbox), cell_area_(cell_area), side_(hex_side_length(cell_area)), orientation_(orientation),
      origin_(origin), coords_(std::move(coords)) {
    std::sort(coords_.begin(), coords_.end());
    coords_.erase(std::unique(coords_.begin(), coords_.end()), coords_.end());
    centroids_.reserve(coords_.size());
    for (const auto& c : coords_)
        centroids_.push_back(to_plane(c));
    adjacency_.resize(coords_.size());
    for (CellId id = 0; id < coords_.size(); ++id) {
        for (std::size_t k = 0; k < 6; ++k) {
            const HexCoord n{coords_[id].q + kDirections[k].q, coords_[id].r + kDirections[k].r};
            adjacency_[id][k] = find(n).value_or(kNoCell);
        }
    }
}

HexGrid HexGrid::build(const BBox& bbox, double cell_area, Orientation orientation) {
    if (!(bbox.width() > 0.0) || !(bbox.height() > 0.0))
        throw ConfigError("degenerate bounding box: width and height must be positive (got " +
                          format_double(bbox.width()) + " x " + format_double(bbox.height()) + ")");
    if (!(cell_area > 0.0) || !std::isfinite(cell_area))
        throw ConfigError("cell area must be positive (got " + format_double(cell_area) + ")");

    const Point2 origin{bbox.xmin, bbox.ymin};
    HexGrid probe(bbox, cell_area, orientation, origin, {});

    // Axial is linear in the plane, so the bbox corners bound the candidate range.
    int qmin = std::numeric_limits<int>::max();
    int qmax = std::numeric_limits<int>::min();
    int rmin = qmin;
    int rmax = qmax;
    const double s = probe.side_;
    for (const Point2 corner : {Point2{bbox.xmin, bbox.ymin}, Point2{bbox.xmax, bbox.ymin},
                                Point2{bbox.xmin, bbox.ymax}, Point2{bbox.xmax, bbox.ymax}}) {
        const double dx = corner.x - origin.x;
        const double dy = corner.y - origin.y;
        double fq = 0.0;
        double fr = 0.0;
        if (orientation == Orientation::PointyTop) {
            fq = (kSqrt3 / 3.0 * dx - dy / 3.0) / s;
            fr = (2.0 / 3.0 * dy) / s;
        } else {
            fq = (2.0 / 3.0 * dx) / s;
            fr = (-dx / 3.0 + kSqrt3 / 3.0 * dy) / s;
        }
        qmin = std::min(qmin, static_cast<int>(std::floor(fq)) - 2);
        qmax = std::max(qmax, static_cast<int>(std::ceil(fq)) + 2);
        rmin = std::min(rmin, static_cast<int>(std::floor(fr)) - 2);
        rmax = std::max(rmax, static_cast<int>(std::ceil(fr)) + 2);
    }

    const double tol = 1e-12 * std::max({s, bbox.width(), bbox.height()});
    std::vector<HexCoord> coords;
    for (int q = qmin; q <= qmax; ++q) {
        for (int r = rmin; r <= rmax; ++r) {
            const Point2 c = probe.to_plane({q, r});
            std::array<Point2, 6> hex{};
            for (std::size_t k = 0; k < 6; ++k) {
                const double angle = (orientation == Orientation::PointyTop ? 30.0 : 0.0) + 60.0 * k;
                const double rad = angle * std::numbers::pi / 180.0;
                hex[k] = {c.x + s * std::cos(rad), c.y + s * std::sin(rad)};
            }
            if (interiors_intersect(hex, bbox, tol))
                coords.push_back({q, r});
        }
    }
    return HexGrid(bbox, cell_area, orientation, origin, std::move(coords));
}

HexGrid HexGrid::rectangular(int cols, int rows, double cell_area, Orientation orientation) {
    if (cols <= 0 || rows <= 0)
        throw ConfigError("rectangular grid needs positive dimensions");
    if (!(cell_area > 0.0) || !std::isfinite(cell_area))
        throw ConfigError("cell area must be positive (got " + format_double(cell_area) + ")");
    std::vector<HexCoord> coords;
    coords.reserve(static_cast<std::size_t>(cols) * rows);
    if (orientation == Orientation::PointyTop) {
        for (int r = 0; r < rows; ++r)
            for (int col = 0; col < cols; ++col)
                coords.push_back({col - (r >> 1), r});
    } else {
        for (int q = 0; q < cols; ++q)
            for (int row = 0; row < rows; ++row)
                coords.push_back({q, row - (q >> 1)});
    }
    HexGrid probe(BBox{}, cell_area, orientation, Point2{}, {});
    BBox box{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
             -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (const auto& c : coords) {
        const Point2 p = probe.to_plane(c);
        box.xmin = std::min(box.xmin, p.x);
        box.ymin = std::min(box.ymin, p.y);
        box.xmax = std::max(box.xmax, p.x);
        box.ymax = std::max(box.ymax, p.y);
    }
    // A single row or column has a flat centroid hull; half a side stays inside the cells.
    const double pad = 0.5 * probe.side_;
    if (box.width() <= 0.0) {
        box.xmin -= pad;
        box.xmax += pad;
    }
    if (box.height() <= 0.0) {
        box.ymin -= pad;
        box.ymax += pad;
    }
    return HexGrid(box, cell_area, orientation, Point2{}, std::move(coords));
}

Point2 HexGrid::to_plane(HexCoord c) const {
    const double q = c.q;
    const double r = c.r;
    if (orientation_ == Orientation::PointyTop)
        return {origin_.x + side_ * (kSqrt3 * q + kSqrt3 / 2.0 * r), origin_.y + side_ * (1.5 * r)};
    return {origin_.x + side_ * (1.5 * q), origin_.y + side_ * (kSqrt3 / 2.0 * q + kSqrt3 * r)};
}

HexCoord HexGrid::coord(CellId id) const {
    if (id >= coords_.size())
        throw LookupError("unknown cell id " + std::to_string(id));
    return coords_[id];
}

Point2 HexGrid::centroid(CellId id) const {
    if (id >= centroids_.size())
        throw LookupError("unknown cell id " + std::to_string(id));
    return centroids_[id];
}

std::optional<CellId> HexGrid::find(HexCoord c) const {
    const auto it = std::lower_bound(coords_.begin(), coords_.end(), c);
    if (it == coords_.end() || *it != c)
        return std::nullopt;
    return static_cast<CellId>(it - coords_.begin());
}

CellId HexGrid::id_of(HexCoord c) const {
    if (auto id = find(c))
        return *id;
    throw LookupError("unknown cell (" + std::to_string(c.q) + ", " + std::to_string(c.r) + ")");
}

std::vector<CellId> HexGrid::neighbors(CellId id) const {
    if (id >= adjacency_.size())
        throw LookupError("unknown cell id " + std::to_string(id));
    std::vector<CellId> out;
    for (CellId n : adjacency_[id])
        if (n != kNoCell)
            out.push_back(n);
    std::sort(out.begin(), out.end());
    return out;
}

std::array<Point2, 6> HexGrid::vertices(CellId id) const {
    const Point2 c = centroid(id);
    std::array<Point2, 6> out{};
    for (std::size_t k = 0; k < 6; ++k) {
        const double angle = (orientation_ == Orientation::PointyTop ? 30.0 : 0.0) + 60.0 * k;
        const double rad = angle * std::numbers::pi / 180.0;
        out[k] = {c.x + side_ * std::cos(rad), c.y + side_ * std::sin(rad)};
    }
    return out;
}

bool HexGrid::contains(CellId id, Point2 p, double tol) const {
    const Point2 c = centroid(id);
    const double dx = p.x - c.x;
    const double dy = p.y - c.y;
    const double apothem = side_ * kSqrt3 / 2.0;
    const double base = orientation_ == Orientation::PointyTop ? 0.0 : 30.0;
    for (int k = 0; k < 3; ++k) {
        const double rad = (base + 60.0 * k) * std::numbers::pi / 180.0;
        if (std::abs(dx * std::cos(rad) + dy * std::sin(rad)) > apothem + tol * side_)
            return false;
    }
    return true;
}

CellId HexGrid::assign(Point2 p) const {
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !bbox_.contains(p))
        throw DataError("point " + point_text(p) + " is outside the grid bounding box");
    const double dx = p.x - origin_.x;
    const double dy = p.y - origin_.y;
    double fq = 0.0;
    double fr = 0.0;
    if (orientation_ == Orientation::PointyTop) {
        fq = (kSqrt3 / 3.0 * dx - dy / 3.0) / side_;
        fr = (2.0 / 3.0 * dy) / side_;
    } else {
        fq = (2.0 / 3.0 * dx) / side_;
        fr = (-dx / 3.0 + kSqrt3 / 3.0 * dy) / side_;
    }
    const HexCoord guess = cube_round(fq, fr);

    // The hexagon tiling is the Voronoi diagram of the centroids: nearest
    // centroid wins, and near-equidistant candidates resolve to the lowest id.
    std::array<CellId, 7> candidates{};
    std::size_t count = 0;
    if (auto id = find(guess))
        candidates[count++] = *id;
    for (const auto& d : kDirections)
        if (auto id = find({guess.q + d.q, guess.r + d.r}))
            candidates[count++] = *id;
    if (count == 0)
        throw DataError("point " + point_text(p) + " is not covered by any cell");

    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < count; ++k) {
        const Point2 c = centroids_[candidates[k]];
        best = std::min(best, (p.x - c.x) * (p.x - c.x) + (p.y - c.y) * (p.y - c.y));
    }
    const double tie_tol = 1e-9 * side_ * side_;
    CellId chosen = kNoCell;
    for (std::size_t k = 0; k < count; ++k) {
        const Point2 c = centroids_[candidates[k]];
        const double d2 = (p.x - c.x) * (p.x - c.x) + (p.y - c.y) * (p.y - c.y);
        if (d2 <= best + tie_tol)
            chosen = std::min(chosen, candidates[k]);
    }
    return chosen;
}

double HexGrid::distance(CellId i, CellId j) const {
    const Point2 a = centroid(i);
    const Point2 b = centroid(j);
    return std::hypot(a.x - b.x, a.y - b.y);
}

EmploymentField::EmploymentField(std::vector<double> values) : values_(std::move(values)) {
    for (std::size_t i = 0; i < values_.size(); ++i)
        if (!(values_[i] >= 0.0) || !std::isfinite(values_[i]))
            throw DataError("employment value at cell " + std::to_string(i) + " must be finite and non-negative");
}

double EmploymentField::total() const { return compensated_sum(values_); }

AggregateResult aggregate_points(const HexGrid& grid, std::span<const PointRecord> points,
                                 OutOfBoundsPolicy policy) {
    std::vector<double> sums(grid.size(), 0.0);
    AggregateResult result;
    for (std::size_t k = 0; k < points.size(); ++k) {
        const auto& p = points[k];
        if (!(p.weight >= 0.0) || !std::isfinite(p.weight) || !std::isfinite(p.x) || !std::isfinite(p.y))
            throw DataError("point record " + std::to_string(k) + " has a negative or non-finite value");
        if (!grid.bbox().contains({p.x, p.y})) {
            if (policy == OutOfBoundsPolicy::Strict)
                throw DataError("point record " + std::to_string(k) + " at " + point_text({p.x, p.y}) +
                                " is outside the grid bounding box");
            ++result.dropped;
            result.dropped_weight += p.weight;
            continue;
        }
        sums[grid.assign(p)] += p.weight;
    }
    result.field = EmploymentField(std::move(sums));
    return result;
}

Point2 Equirectangular::to_miles(double lon, double lat) const {
    constexpr double deg = std::numbers::pi / 180.0;
    return {kEarthRadiusMiles * std::cos(lat0 * deg) * (lon - lon0) * deg,
            kEarthRadiusMiles * (lat - lat0) * deg};
}

std::vector<PointRecord> read_points(const std::filesystem::path& path,
                                     const std::optional<Equirectangular>& projection) {
    const CsvTable table = read_csv(path);
    const std::size_t cx = table.column(projection ? "lon" : "x_mi");
    const std::size_t cy = table.column(projection ? "lat" : "y_mi");
    const auto cw = table.find_column("weight");
    std::vector<PointRecord> out;
    out.reserve(table.rows.size());
    for (std::size_t k = 0; k < table.rows.size(); ++k) {
        const auto& row = table.rows[k];
        const auto x = parse_double(row[cx]);
        const auto y = parse_double(row[cy]);
        const auto w = cw ? parse_double(row[*cw]) : std::optional<double>(1.0);
        if (!x || !y || !w)
            throw DataError(path.string() + ": record " + std::to_string(k) + " has a missing value");
        if (*w < 0.0)
            throw DataError(path.string() + ": record " + std::to_string(k) + " has a negative weight");
        Point2 p{*x, *y};
        if (projection)
            p = projection->to_miles(*x, *y);
        out.push_back({p.x, p.y, *w});
    }
    return out;
}

void write_points(const std::filesystem::path& path, std::span<const PointRecord> points) {
    CsvWriter csv({"x_mi", "y_mi", "weight"});
    for (const auto& p : points)
        csv.row({format_double(p.x), format_double(p.y), format_double(p.weight)});
    csv.save(path);
}

} // namespace polyvmt
