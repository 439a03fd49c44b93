#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sgseg/molecule_table.hpp"

namespace sgseg {

struct Neighbor {
  MoleculeId id;
  double distance;

  bool operator==(const Neighbor&) const = default;
};

/// Whether a molecule-centered kNN query counts the molecule itself.
enum class SelfPolicy { Include, Exclude };

/// Static kd-tree over the positions of a MoleculeTable. Results are exactly
/// those of brute force with Euclidean distance (see sgseg::distance); ties
/// at equal distance are ordered by ascending molecule id.
///
/// The tree keeps a copy of the coordinates, so it does not borrow the table.
class SpatialIndex {
 public:
  explicit SpatialIndex(const MoleculeTable& table);

  std::size_t size() const { return ids_.size(); }
  int dims() const { return dims_; }
  std::span<const double> position(MoleculeId id) const {
    return {coords_.data() + static_cast<std::size_t>(id) * dims_, static_cast<std::size_t>(dims_)};
  }

  /// k nearest molecules to an arbitrary point, sorted by (distance, id).
  std::vector<Neighbor> knn(std::span<const double> point, std::size_t k) const;

  /// k nearest neighbours of molecule `id`. With SelfPolicy::Include the
  /// molecule itself is always the first entry (distance 0) followed by its
  /// k-1 nearest other molecules, even when other molecules share its
  /// position. With Exclude the molecule is never returned.
  std::vector<Neighbor> knn_of(MoleculeId id, std::size_t k, SelfPolicy self) const;

  /// Ids with r_min < distance <= r_max, ascending by id.
  std::vector<MoleculeId> annulus(std::span<const double> point, double r_min, double r_max) const;

  /// Calls visit(id, distance) for every molecule with distance <= radius.
  template <class Visitor>
  void for_each_within(std::span<const double> point, double radius, Visitor&& visit) const {
    if (!nodes_.empty()) visit_within(0, point, radius, visit);
  }

 private:
  struct Node {
    std::uint32_t begin, end;
    std::int32_t left = -1, right = -1;
    int split_dim = -1;
    double split_value = 0.0;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end);
  void knn_search(std::int32_t node, std::span<const double> point, std::size_t k,
                  std::int64_t skip_id, std::vector<Neighbor>& heap) const;

  template <class Visitor>
  void visit_within(std::int32_t node_index, std::span<const double> point, double radius,
                    Visitor& visit) const {
    const Node& node = nodes_[node_index];
    if (node.split_dim < 0) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const MoleculeId id = ids_[i];
        const double d = distance(point, position(id));
        if (d <= radius) visit(id, d);
      }
      return;
    }
    const double diff = point[node.split_dim] - node.split_value;
    const std::int32_t near = diff <= 0 ? node.left : node.right;
    const std::int32_t far = diff <= 0 ? node.right : node.left;
    visit_within(near, point, radius, visit);
    if (std::abs(diff) <= radius) visit_within(far, point, radius, visit);
  }

  int dims_;
  std::vector<double> coords_;
  std::vector<MoleculeId> ids_;
  std::vector<Node> nodes_;
};

/// Uniform bucket grid with cell edge `cell_size`. A ball of radius
/// <= cell_size around any point is covered by the 3^D cells around the
/// point's cell; the members of those cells form contiguous id ranges that
/// can be sampled uniformly without enumerating distances.
class BucketGrid {
 public:
  BucketGrid(const MoleculeTable& table, double cell_size);

  struct Range {
    std::uint32_t begin, end;
  };

  /// Ranges into members() covering every molecule within cell_size of point.
  void cover(std::span<const double> point, std::vector<Range>& out) const;
  const std::vector<MoleculeId>& members() const { return members_; }
  double cell_size() const { return cell_size_; }

 private:
  std::int64_t key(std::span<const std::int64_t> cell) const;
  std::int64_t cell_coord(double c) const;

  int dims_;
  double cell_size_;
  std::vector<MoleculeId> members_;
  std::unordered_map<std::int64_t, Range> cells_;
};

}  // namespace sgseg
