#include "chronomap/geometry/spatial_index.hpp"

#include <algorithm>
#include <iterator>
#include <utility>

#include <boost/geometry.hpp>
#include <boost/geometry/index/rtree.hpp>

namespace chronomap::geo {

namespace bg = boost::geometry;
namespace bgi = boost::geometry::index;

using BPoint = bg::model::point<double, 2, bg::cs::cartesian>;
using BBoxModel = bg::model::box<BPoint>;
using Entry = std::pair<BBoxModel, std::size_t>;

struct SpatialIndex::Impl {
    bgi::rtree<Entry, bgi::quadratic<16>> tree;
    std::size_t count{0};
};

namespace {

BBoxModel model(const BBox& b) { return {BPoint(b.min_x, b.min_y), BPoint(b.max_x, b.max_y)}; }

}  // namespace

SpatialIndex::SpatialIndex() : impl_(std::make_shared<Impl>()) {}

SpatialIndex::SpatialIndex(std::span<const BBox> boxes) {
    std::vector<Entry> entries;
    entries.reserve(boxes.size());
    for (std::size_t i = 0; i < boxes.size(); ++i) entries.emplace_back(model(boxes[i]), i);
    auto impl = std::make_shared<Impl>();
    impl->tree = bgi::rtree<Entry, bgi::quadratic<16>>(entries.begin(), entries.end());
    impl->count = boxes.size();
    impl_ = std::move(impl);
}

SpatialIndex::~SpatialIndex() = default;
SpatialIndex::SpatialIndex(const SpatialIndex&) = default;
SpatialIndex& SpatialIndex::operator=(const SpatialIndex&) = default;
SpatialIndex::SpatialIndex(SpatialIndex&&) noexcept = default;
SpatialIndex& SpatialIndex::operator=(SpatialIndex&&) noexcept = default;

std::vector<std::size_t> SpatialIndex::query(const BBox& window) const {
    std::vector<Entry> hits;
    impl_->tree.query(bgi::intersects(model(window)), std::back_inserter(hits));
    std::vector<std::size_t> ids;
    ids.reserve(hits.size());
    for (const auto& h : hits) ids.push_back(h.second);
    std::sort(ids.begin(), ids.end());
    return ids;
}

std::size_t SpatialIndex::size() const noexcept { return impl_->count; }

}  // namespace chronomap::geo
