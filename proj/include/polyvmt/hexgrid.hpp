#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace polyvmt {

enum class Orientation { PointyTop, FlatTop };

std::string to_string(Orientation o);
Orientation parse_orientation(std::string_view s);

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

/// Planar rectangle in miles.
struct BBox {
    double xmin = 0.0;
    double ymin = 0.0;
    double xmax = 0.0;
    double ymax = 0.0;

    double width() const noexcept { return xmax - xmin; }
    double height() const noexcept { return ymax - ymin; }
    bool contains(Point2 p) const noexcept {
        return p.x >= xmin && p.x <= xmax && p.y >= ymin && p.y <= ymax;
    }
};

/// Axial hexagon coordinate. Ordering is lexicographic on (q, r).
struct HexCoord {
    int q = 0;
    int r = 0;

    auto operator<=>(const HexCoord&) const = default;
};

/// Index into a HexGrid. Ids are assigned in lexicographic (q, r) order, so
/// comparing ids compares coordinates.
using CellId = std::size_t;
inline constexpr CellId kNoCell = std::numeric_limits<CellId>::max();

/// A geocoded input: an establishment (weight = employees) or an amenity point (weight 1).
struct PointRecord {
    double x = 0.0;
    double y = 0.0;
    double weight = 1.0;
};

/// Side length of a regular hexagon with the given area.
double hex_side_length(double cell_area);

/// Hexagonal tessellation in planar miles. Immutable after construction.
class HexGrid {
public:
    /// All cells whose interior intersects `bbox`; cell (0, 0) is centred on
    /// the lower-left corner.
    static HexGrid build(const BBox& bbox, double cell_area = 1.0,
                         Orientation orientation = Orientation::PointyTop);

    /// Offset-coordinate block of `cols` x `rows` cells (odd rows shifted for
    /// pointy-top, odd columns for flat-top). The bbox is the centroid hull.
    static HexGrid rectangular(int cols, int rows, double cell_area = 1.0,
                               Orientation orientation = Orientation::PointyTop);

    std::size_t size() const noexcept { return coords_.size(); }
    const BBox& bbox() const noexcept { return bbox_; }
    double cell_area() const noexcept { return cell_area_; }
    double side_length() const noexcept { return side_; }
    Orientation orientation() const noexcept { return orientation_; }

    HexCoord coord(CellId id) const;
    Point2 centroid(CellId id) const;
    std::span<const HexCoord> coords() const noexcept { return coords_; }

    std::optional<CellId> find(HexCoord c) const;
    /// Throws LookupError for coordinates outside the grid.
    CellId id_of(HexCoord c) const;

    /// Edge-adjacent cells present in the grid, ascending.
    std::vector<CellId> neighbors(CellId id) const;

    /// Cell containing `p`. Points on a shared edge or vertex go to the
    /// smallest id. Throws DataError when `p` is outside the bbox.
    CellId assign(Point2 p) const;
    CellId assign(const PointRecord& p) const { return assign(Point2{p.x, p.y}); }

    /// True when `p` lies inside or on the boundary of the cell's hexagon.
    bool contains(CellId id, Point2 p, double tol = 1e-9) const;

    /// Centroid-to-centroid planar distance in miles.
    double distance(CellId i, CellId j) const;

    /// Hexagon vertices, counter-clockwise.
    std::array<Point2, 6> vertices(CellId id) const;

    /// Axial coordinate to plane, relative to this grid's origin.
    Point2 to_plane(HexCoord c) const;

private:
    HexGrid(BBox bbox, double cell_area, Orientation orientation, Point2 origin,
            std::vector<HexCoord> coords);

    BBox bbox_;
    double cell_area_;
    double side_;
    Orientation orientation_;
    Point2 origin_;
    std::vector<HexCoord> coords_;
    std::vector<Point2> centroids_;
    std::vector<std::array<CellId, 6>> adjacency_;
};

/// Non-negative job totals per cell.
class EmploymentField {
public:
    EmploymentField() = default;
    explicit EmploymentField(std::size_t cells) : values_(cells, 0.0) {}
    /// Throws DataError on negative or non-finite values.
    explicit EmploymentField(std::vector<double> values);

    std::size_t size() const noexcept { return values_.size(); }
    double operator[](CellId id) const { return values_.at(id); }
    std::span<const double> values() const noexcept { return values_; }
    double total() const;

private:
    std::vector<double> values_;
};

enum class OutOfBoundsPolicy { Strict, Drop };

struct AggregateResult {
    EmploymentField field;
    std::size_t dropped = 0;
    double dropped_weight = 0.0;
};

/// Sums point weights per cell. Under the Strict policy an out-of-bbox point
/// raises a DataError naming the record index.
AggregateResult aggregate_points(const HexGrid& grid, std::span<const PointRecord> points,
                                 OutOfBoundsPolicy policy = OutOfBoundsPolicy::Strict);

/// Equirectangular lon/lat to planar miles around a reference point.
struct Equirectangular {
    double lon0 = 0.0;
    double lat0 = 0.0;
    static constexpr double kEarthRadiusMiles = 3958.8;

    Point2 to_miles(double lon, double lat) const;
};

/// Reads `x_mi,y_mi,weight`, or `lon,lat,weight` when a projection is given.
/// A missing weight column means weight 1.
std::vector<PointRecord> read_points(const std::filesystem::path& path,
                                     const std::optional<Equirectangular>& projection = std::nullopt);
void write_points(const std::filesystem::path& path, std::span<const PointRecord> points);

} // namespace polyvmt
