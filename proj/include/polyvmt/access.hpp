#pragma once

#include "polyvmt/hexgrid.hpp"
#include "polyvmt/subcenter.hpp"

#include <functional>
#include <string>
#include <vector>

namespace polyvmt {

enum class AccessKind { EmploymentGravity, AmenityGravity, AnchorInverseDistance };

std::string to_string(AccessKind kind);

/// Per-cell accessibility index.
struct AccessVector {
    std::string name;
    AccessKind kind = AccessKind::EmploymentGravity;
    double scale = 1.0;
    std::string mask;   // which sources were counted
    std::vector<double> values;
};

/// Per-cell 0/1 indicator of an amenity layer.
class AmenityField {
public:
    AmenityField() = default;
    /// Throws DataError if any value is not exactly 0 or 1.
    explicit AmenityField(std::vector<double> indicator);

    /// Cells containing at least one point of the layer.
    static AmenityField from_points(const HexGrid& grid, std::span<const PointRecord> points);

    std::size_t size() const noexcept { return values_.size(); }
    std::span<const double> values() const noexcept { return values_; }
    std::size_t count() const;

private:
    std::vector<double> values_;
};

inline constexpr double kEmploymentAccessScale = 10'000.0;

using CellMask = std::function<bool(CellId)>;

/// value_i = (sum_{j != i, mask(j)} E_j / D_ij^2 + mask(i) * E_i) / scale.
/// Each cell's sum runs over sources in id order with compensated
/// summation, so results do not depend on `threads`.
AccessVector gravity_access(const HexGrid& grid, const EmploymentField& field, const CellMask& mask = {},
                            double scale = kEmploymentAccessScale, unsigned threads = 1);

/// One vector per classification label, one for cells outside every center
/// ("outside") and the all-jobs vector ("all"), in the order all, labels..., outside.
std::vector<AccessVector> partition_access(const HexGrid& grid, const EmploymentField& field,
                                           const CellClassification& classification,
                                           double scale = kEmploymentAccessScale, unsigned threads = 1);

/// Gravity index over a binary layer, no scale divisor.
AccessVector amenity_access(const HexGrid& grid, const AmenityField& amenity, unsigned threads = 1);

/// 1 at the anchor cell, 1 / D elsewhere.
AccessVector anchor_inverse_distance(const HexGrid& grid, CellId anchor);

/// Classes 1..k by ascending (value, cell id) rank r: class = ceil(r k / n).
/// Tied values all take the class of the first of them.
std::vector<int> quantile_classes(std::span<const double> values, int k);

} // namespace polyvmt
