#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "sgseg/molecule_table.hpp"
#include "sgseg/segmentation.hpp"

namespace sgseg {

/// Per-cell molecule counts on a regular 2D grid. Bin (bx, by) covers
/// [origin + b * bin_size, origin + (b + 1) * bin_size).
struct CountImage {
  double origin_x = 0.0, origin_y = 0.0;
  double bin_size = 1.0;
  std::size_t width = 0, height = 0;

  struct Bin {
    std::uint32_t pixel;  // by * width + bx
    double count;
  };
  /// One sparse channel per cell id, bins ascending by pixel.
  std::vector<std::vector<Bin>> channels;

  double channel_total(std::size_t cell) const;
};

/// Grid over the bounding box of the assigned molecules. Requires 2D input.
CountImage rasterize_counts(const CellSegmentation& seg, const MoleculeTable& table, double bin_size);

struct LabelMask {
  double origin_x = 0.0, origin_y = 0.0;
  double bin_size = 1.0;
  std::size_t width = 0, height = 0;
  std::vector<CellId> labels;  // row-major, kUnassigned = background

  CellId at(std::size_t x, std::size_t y) const { return labels[y * width + x]; }
  /// Centre of pixel (x, y) in micrometres.
  std::array<double, 2> center(std::size_t x, std::size_t y) const {
    return {origin_x + (static_cast<double>(x) + 0.5) * bin_size,
            origin_y + (static_cast<double>(y) + 0.5) * bin_size};
  }
};

/// Dense window of one smoothed channel, in LabelMask pixel coordinates.
struct SmoothedChannel {
  std::size_t x0 = 0, y0 = 0, width = 0, height = 0;
  std::vector<double> values;
  double total() const;
};

/// Truncated (radius ceil(3 sigma) pixels), renormalised 1D Gaussian taps.
std::vector<double> gaussian_kernel(double sigma_pixels);

/// Kernel radius in pixels that smooth_and_label pads the mask with.
std::size_t smoothing_radius(double sigma, double bin_size);

SmoothedChannel smooth_channel(const CountImage& image, std::size_t cell, double sigma);

/// Gaussian-smooths every channel (sigma in micrometres) and labels each
/// pixel with the strongest channel; ties go to the lower cell id and
/// all-zero pixels are background. The mask is padded by the kernel radius
/// on every side so no smoothed mass is cut off.
LabelMask smooth_and_label(const CountImage& image, double sigma);

struct CellPolygon {
  CellId cell;
  std::vector<std::array<double, 2>> vertices;
};

/// Boundary pixels of the cell (4-adjacent to another label, background or
/// the mask edge), ordered along the longest path of their Euclidean
/// minimum spanning tree.
CellPolygon extract_contour(const LabelMask& mask, CellId cell);

/// Boundary pixel coordinates (x, y) of the cell, row-major.
std::vector<std::array<std::size_t, 2>> boundary_pixels(const LabelMask& mask, CellId cell);

/// Vertex indices along the longest path of the Euclidean MST over points.
std::vector<std::size_t> mst_longest_path(const std::vector<std::array<double, 2>>& points);

/// Whole chain for every cell present in the mask. 3D tables are projected
/// onto x/y with a warning. Polygons with fewer than 3 vertices are dropped.
std::vector<CellPolygon> cell_contours(const CellSegmentation& seg, const MoleculeTable& table,
                                       double bin_size, double sigma);

void write_geojson(std::ostream& out, const std::vector<CellPolygon>& polygons);
/// cell_id,vertex,x,y
void write_vertex_list(std::ostream& out, const std::vector<CellPolygon>& polygons);

}  // namespace sgseg
