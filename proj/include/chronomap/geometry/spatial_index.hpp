#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "chronomap/geometry/geometry.hpp"

namespace chronomap::geo {

/// Static bounding-box index (bulk-loaded R-tree). Entry ids are positions
/// in the box list given at construction. Immutable and shareable.
class SpatialIndex {
public:
    SpatialIndex();
    explicit SpatialIndex(std::span<const BBox> boxes);
    ~SpatialIndex();
    SpatialIndex(const SpatialIndex&);
    SpatialIndex& operator=(const SpatialIndex&);
    SpatialIndex(SpatialIndex&&) noexcept;
    SpatialIndex& operator=(SpatialIndex&&) noexcept;

    /// Ids whose boxes intersect the window (closed boxes), ascending.
    [[nodiscard]] std::vector<std::size_t> query(const BBox& window) const;
    [[nodiscard]] std::size_t size() const noexcept;

private:
    struct Impl;
    std::shared_ptr<const Impl> impl_;
};

}  // namespace chronomap::geo
