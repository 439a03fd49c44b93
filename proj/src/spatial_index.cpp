#include "sgseg/spatial_index.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "sgseg/error.hpp"

namespace sgseg {

namespace {

constexpr std::uint32_t kLeafSize = 12;

bool closer(const Neighbor& a, const Neighbor& b) {
  return a.distance < b.distance || (a.distance == b.distance && a.id < b.id);
}

}  // namespace

SpatialIndex::SpatialIndex(const MoleculeTable& table)
    : dims_(table.dims()), coords_(table.coords()) {
  if (table.empty()) throw Error(ErrorCode::EmptyTable, "cannot index an empty table");
  ids_.resize(table.size());
  std::iota(ids_.begin(), ids_.end(), MoleculeId{0});
  nodes_.reserve(2 * table.size() / kLeafSize + 1);
  build(0, static_cast<std::uint32_t>(ids_.size()));
}

std::int32_t SpatialIndex::build(std::uint32_t begin, std::uint32_t end) {
  const auto index = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(Node{begin, end});
  if (end - begin <= kLeafSize) return index;

  int best_dim = 0;
  double best_spread = -1.0;
  for (int d = 0; d < dims_; ++d) {
    double lo = INFINITY, hi = -INFINITY;
    for (std::uint32_t i = begin; i < end; ++i) {
      const double c = coords_[static_cast<std::size_t>(ids_[i]) * dims_ + d];
      lo = std::min(lo, c);
      hi = std::max(hi, c);
    }
    if (hi - lo > best_spread) {
      best_spread = hi - lo;
      best_dim = d;
    }
  }
  if (best_spread <= 0.0) return index;  // all points coincide

  const std::uint32_t mid = begin + (end - begin) / 2;
  auto coord = [&](MoleculeId id) { return coords_[static_cast<std::size_t>(id) * dims_ + best_dim]; };
  std::nth_element(ids_.begin() + begin, ids_.begin() + mid, ids_.begin() + end,
                   [&](MoleculeId a, MoleculeId b) { return coord(a) < coord(b); });
  const double split = coord(ids_[mid]);

  const std::int32_t left = build(begin, mid);
  const std::int32_t right = build(mid, end);
  Node& node = nodes_[index];
  node.left = left;
  node.right = right;
  node.split_dim = best_dim;
  node.split_value = split;
  return index;
}

void SpatialIndex::knn_search(std::int32_t node_index, std::span<const double> point,
                              std::size_t k, std::int64_t skip_id,
                              std::vector<Neighbor>& heap) const {
  const Node& node = nodes_[node_index];
  if (node.split_dim < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const MoleculeId id = ids_[i];
      if (static_cast<std::int64_t>(id) == skip_id) continue;
      const Neighbor candidate{id, distance(point, position(id))};
      if (heap.size() < k) {
        heap.push_back(candidate);
        std::push_heap(heap.begin(), heap.end(), closer);
      } else if (closer(candidate, heap.front())) {
        std::pop_heap(heap.begin(), heap.end(), closer);
        heap.back() = candidate;
        std::push_heap(heap.begin(), heap.end(), closer);
      }
    }
    return;
  }
  const double diff = point[node.split_dim] - node.split_value;
  const std::int32_t near = diff <= 0 ? node.left : node.right;
  const std::int32_t far = diff <= 0 ? node.right : node.left;
  knn_search(near, point, k, skip_id, heap);
  // Equal distance must still be explored: a lower id may sit at the bound.
  if (heap.size() < k || std::abs(diff) <= heap.front().distance) {
    knn_search(far, point, k, skip_id, heap);
  }
}

std::vector<Neighbor> SpatialIndex::knn(std::span<const double> point, std::size_t k) const {
  if (k == 0 || k > size()) throw Error(ErrorCode::KTooLarge, "k must satisfy 1 <= k <= n");
  if (point.size() != static_cast<std::size_t>(dims_)) {
    throw Error(ErrorCode::DimensionMismatch, "query point has wrong dimension");
  }
  std::vector<Neighbor> heap;
  heap.reserve(k);
  knn_search(0, point, k, -1, heap);
  std::sort_heap(heap.begin(), heap.end(), closer);
  return heap;
}

std::vector<Neighbor> SpatialIndex::knn_of(MoleculeId id, std::size_t k, SelfPolicy self) const {
  if (id >= size()) throw Error(ErrorCode::InvalidArgument, "molecule id out of range");
  const std::size_t others = self == SelfPolicy::Include ? k - 1 : k;
  if (k == 0 || others > size() - 1) {
    throw Error(ErrorCode::KTooLarge, "k exceeds the number of available molecules");
  }
  std::vector<Neighbor> result;
  result.reserve(k);
  if (self == SelfPolicy::Include) result.push_back({id, 0.0});
  if (others == 0) return result;
  std::vector<Neighbor> heap;
  heap.reserve(others);
  knn_search(0, position(id), others, id, heap);
  std::sort_heap(heap.begin(), heap.end(), closer);
  result.insert(result.end(), heap.begin(), heap.end());
  return result;
}

std::vector<MoleculeId> SpatialIndex::annulus(std::span<const double> point, double r_min,
                                              double r_max) const {
  if (!(r_min >= 0.0) || !(r_min < r_max)) {
    throw Error(ErrorCode::InvalidRange, "annulus requires 0 <= r_min < r_max");
  }
  std::vector<MoleculeId> out;
  for_each_within(point, r_max, [&](MoleculeId id, double d) {
    if (d > r_min) out.push_back(id);
  });
  std::sort(out.begin(), out.end());
  return out;
}

BucketGrid::BucketGrid(const MoleculeTable& table, double cell_size)
    : dims_(table.dims()), cell_size_(cell_size) {
  if (!(cell_size > 0.0)) throw Error(ErrorCode::InvalidArgument, "grid cell size must be > 0");
  std::vector<std::pair<std::int64_t, MoleculeId>> keyed(table.size());
  std::array<std::int64_t, 3> cell{};
  for (MoleculeId i = 0; i < table.size(); ++i) {
    auto p = table.position(i);
    for (int d = 0; d < dims_; ++d) cell[d] = cell_coord(p[d]);
    keyed[i] = {key(std::span<const std::int64_t>(cell.data(), dims_)), i};
  }
  std::sort(keyed.begin(), keyed.end());
  members_.resize(keyed.size());
  for (std::size_t i = 0; i < keyed.size(); ++i) {
    members_[i] = keyed[i].second;
    auto [it, inserted] = cells_.try_emplace(keyed[i].first, Range{static_cast<std::uint32_t>(i),
                                                                   static_cast<std::uint32_t>(i)});
    it->second.end = static_cast<std::uint32_t>(i + 1);
  }
}

std::int64_t BucketGrid::cell_coord(double c) const {
  return static_cast<std::int64_t>(std::floor(c / cell_size_));
}

std::int64_t BucketGrid::key(std::span<const std::int64_t> cell) const {
  // 21 bits per axis, offset to keep coordinates non-negative.
  constexpr std::int64_t kOffset = 1 << 20;
  constexpr std::int64_t kMask = (1 << 21) - 1;
  std::int64_t k = 0;
  for (std::int64_t c : cell) k = (k << 21) | ((c + kOffset) & kMask);
  return k;
}

void BucketGrid::cover(std::span<const double> point, std::vector<Range>& out) const {
  out.clear();
  std::array<std::int64_t, 3> base{};
  for (int d = 0; d < dims_; ++d) base[d] = cell_coord(point[d]);
  const int combos = dims_ == 3 ? 27 : 9;
  std::array<std::int64_t, 3> cell{};
  for (int c = 0; c < combos; ++c) {
    int rest = c;
    for (int d = 0; d < dims_; ++d) {
      cell[d] = base[d] + (rest % 3) - 1;
      rest /= 3;
    }
    auto it = cells_.find(key(std::span<const std::int64_t>(cell.data(), dims_)));
    if (it != cells_.end()) out.push_back(it->second);
  }
}

}  // namespace sgseg
