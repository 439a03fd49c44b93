#include "sgseg/contours.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>

#include <json.hpp>

#include "sgseg/error.hpp"
#include "sgseg/log.hpp"

namespace sgseg {

double CountImage::channel_total(std::size_t cell) const {
  double total = 0.0;
  for (const auto& b : channels.at(cell)) total += b.count;
  return total;
}

double SmoothedChannel::total() const {
  double t = 0.0;
  for (double v : values) t += v;
  return t;
}

CountImage rasterize_counts(const CellSegmentation& seg, const MoleculeTable& table,
                            double bin_size) {
  if (table.dims() != 2) throw Error(ErrorCode::Requires2D, "count images need 2D positions");
  if (!(bin_size > 0.0)) throw Error(ErrorCode::InvalidArgument, "bin size must be > 0");
  if (seg.molecule_count() != table.size()) {
    throw Error(ErrorCode::AlignmentError, "segmentation and table sizes differ");
  }
  CountImage image;
  image.bin_size = bin_size;
  image.channels.resize(seg.cell_count());
  double lo_x = INFINITY, lo_y = INFINITY, hi_x = -INFINITY, hi_y = -INFINITY;
  for (MoleculeId i = 0; i < table.size(); ++i) {
    if (seg.cell_of(i) == kUnassigned) continue;
    auto p = table.position(i);
    lo_x = std::min(lo_x, p[0]);
    lo_y = std::min(lo_y, p[1]);
    hi_x = std::max(hi_x, p[0]);
    hi_y = std::max(hi_y, p[1]);
  }
  if (lo_x > hi_x) return image;
  image.origin_x = lo_x;
  image.origin_y = lo_y;
  auto bin_of = [&](double v, double origin) {
    return static_cast<std::size_t>(std::floor((v - origin) / bin_size));
  };
  image.width = bin_of(hi_x, lo_x) + 1;
  image.height = bin_of(hi_y, lo_y) + 1;

  for (std::size_t c = 0; c < seg.cell_count(); ++c) {
    std::map<std::uint32_t, double> bins;
    for (MoleculeId i : seg.cells()[c]) {
      auto p = table.position(i);
      const std::size_t bx = std::min(bin_of(p[0], lo_x), image.width - 1);
      const std::size_t by = std::min(bin_of(p[1], lo_y), image.height - 1);
      bins[static_cast<std::uint32_t>(by * image.width + bx)] += 1.0;
    }
    for (const auto& [pixel, count] : bins) image.channels[c].push_back({pixel, count});
  }
  return image;
}

std::vector<double> gaussian_kernel(double sigma_pixels) {
  if (!(sigma_pixels > 0.0)) return {1.0};
  const auto radius = static_cast<int>(std::ceil(3.0 * sigma_pixels));
  std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int t = -radius; t <= radius; ++t) {
    const double v = std::exp(-0.5 * t * t / (sigma_pixels * sigma_pixels));
    taps[static_cast<std::size_t>(t + radius)] = v;
    sum += v;
  }
  for (double& v : taps) v /= sum;
  return taps;
}

std::size_t smoothing_radius(double sigma, double bin_size) {
  return (gaussian_kernel(sigma / bin_size).size() - 1) / 2;
}

SmoothedChannel smooth_channel(const CountImage& image, std::size_t cell, double sigma) {
  if (sigma < 0.0) throw Error(ErrorCode::InvalidArgument, "sigma must be >= 0");
  const auto& bins = image.channels.at(cell);
  SmoothedChannel out;
  if (bins.empty()) return out;
  const std::vector<double> kernel = gaussian_kernel(sigma / image.bin_size);
  const std::size_t r = (kernel.size() - 1) / 2;

  std::size_t bx0 = image.width, by0 = image.height, bx1 = 0, by1 = 0;
  for (const auto& b : bins) {
    const std::size_t x = b.pixel % image.width, y = b.pixel / image.width;
    bx0 = std::min(bx0, x);
    bx1 = std::max(bx1, x);
    by0 = std::min(by0, y);
    by1 = std::max(by1, y);
  }
  // Image pixel x maps to mask pixel x + r, so the window starts at bx0.
  out.x0 = bx0;
  out.y0 = by0;
  out.width = bx1 - bx0 + 1 + 2 * r;
  out.height = by1 - by0 + 1 + 2 * r;
  const std::size_t src_w = bx1 - bx0 + 1, src_h = by1 - by0 + 1;

  std::vector<double> raw(src_w * src_h, 0.0);
  for (const auto& b : bins) {
    const std::size_t x = b.pixel % image.width - bx0, y = b.pixel / image.width - by0;
    raw[y * src_w + x] += b.count;
  }
  // Horizontal pass: src_h rows of out.width.
  std::vector<double> horiz(src_h * out.width, 0.0);
  for (std::size_t y = 0; y < src_h; ++y) {
    for (std::size_t x = 0; x < src_w; ++x) {
      const double v = raw[y * src_w + x];
      if (v == 0.0) continue;
      for (std::size_t t = 0; t < kernel.size(); ++t) horiz[y * out.width + x + t] += v * kernel[t];
    }
  }
  out.values.assign(out.width * out.height, 0.0);
  for (std::size_t y = 0; y < src_h; ++y) {
    for (std::size_t x = 0; x < out.width; ++x) {
      const double v = horiz[y * out.width + x];
      if (v == 0.0) continue;
      for (std::size_t t = 0; t < kernel.size(); ++t) out.values[(y + t) * out.width + x] += v * kernel[t];
    }
  }
  return out;
}

LabelMask smooth_and_label(const CountImage& image, double sigma) {
  if (sigma < 0.0) throw Error(ErrorCode::InvalidArgument, "sigma must be >= 0");
  const std::size_t r = smoothing_radius(sigma, image.bin_size);
  LabelMask mask;
  mask.bin_size = image.bin_size;
  mask.origin_x = image.origin_x - static_cast<double>(r) * image.bin_size;
  mask.origin_y = image.origin_y - static_cast<double>(r) * image.bin_size;
  if (image.width == 0 || image.height == 0) return mask;
  mask.width = image.width + 2 * r;
  mask.height = image.height + 2 * r;
  mask.labels.assign(mask.width * mask.height, kUnassigned);
  std::vector<double> best(mask.labels.size(), 0.0);
  for (std::size_t c = 0; c < image.channels.size(); ++c) {
    const SmoothedChannel ch = smooth_channel(image, c, sigma);
    for (std::size_t y = 0; y < ch.height; ++y) {
      for (std::size_t x = 0; x < ch.width; ++x) {
        const double v = ch.values[y * ch.width + x];
        const std::size_t p = (ch.y0 + y) * mask.width + ch.x0 + x;
        if (v > best[p]) {
          best[p] = v;
          mask.labels[p] = static_cast<CellId>(c);
        }
      }
    }
  }
  return mask;
}

std::vector<std::array<std::size_t, 2>> boundary_pixels(const LabelMask& mask, CellId cell) {
  std::vector<std::array<std::size_t, 2>> out;
  for (std::size_t y = 0; y < mask.height; ++y) {
    for (std::size_t x = 0; x < mask.width; ++x) {
      if (mask.at(x, y) != cell) continue;
      const bool edge = x == 0 || y == 0 || x + 1 == mask.width || y + 1 == mask.height ||
                        mask.at(x - 1, y) != cell || mask.at(x + 1, y) != cell ||
                        mask.at(x, y - 1) != cell || mask.at(x, y + 1) != cell;
      if (edge) out.push_back({x, y});
    }
  }
  return out;
}

std::vector<std::size_t> mst_longest_path(const std::vector<std::array<double, 2>>& points) {
  const std::size_t n = points.size();
  if (n == 0) return {};
  if (n == 1) return {0};
  auto dist = [&](std::size_t a, std::size_t b) {
    return std::hypot(points[a][0] - points[b][0], points[a][1] - points[b][1]);
  };
  // Prim on the complete graph, O(n^2).
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::vector<double> key(n, INFINITY);
  std::vector<std::size_t> parent(n, kNone);
  std::vector<char> in_tree(n, 0);
  std::vector<std::vector<std::pair<std::size_t, double>>> adj(n);
  key[0] = 0.0;
  for (std::size_t step = 0; step < n; ++step) {
    std::size_t u = kNone;
    for (std::size_t v = 0; v < n; ++v) {
      if (!in_tree[v] && (u == kNone || key[v] < key[u])) u = v;
    }
    in_tree[u] = 1;
    if (parent[u] != kNone) {
      adj[u].push_back({parent[u], key[u]});
      adj[parent[u]].push_back({u, key[u]});
    }
    for (std::size_t v = 0; v < n; ++v) {
      if (in_tree[v]) continue;
      const double d = dist(u, v);
      if (d < key[v]) {
        key[v] = d;
        parent[v] = u;
      }
    }
  }
  // Tree diameter: farthest vertex from 0, then farthest from that one.
  auto farthest = [&](std::size_t source, std::vector<std::size_t>& via) {
    std::vector<double> d(n, -1.0);
    via.assign(n, kNone);
    std::vector<std::size_t> stack{source};
    d[source] = 0.0;
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      for (const auto& [v, w] : adj[u]) {
        if (d[v] >= 0.0) continue;
        d[v] = d[u] + w;
        via[v] = u;
        stack.push_back(v);
      }
    }
    std::size_t best = source;
    for (std::size_t v = 0; v < n; ++v) {
      if (d[v] > d[best]) best = v;
    }
    return best;
  };
  std::vector<std::size_t> via;
  const std::size_t a = farthest(0, via);
  const std::size_t b = farthest(a, via);
  std::vector<std::size_t> path;
  for (std::size_t v = b; v != kNone; v = via[v]) path.push_back(v);
  return path;
}

CellPolygon extract_contour(const LabelMask& mask, CellId cell) {
  const auto pixels = boundary_pixels(mask, cell);
  if (pixels.empty()) {
    throw Error(ErrorCode::CellNotInMask, "cell " + std::to_string(cell) + " has no pixels in the mask");
  }
  std::vector<std::array<double, 2>> points;
  points.reserve(pixels.size());
  for (const auto& [x, y] : pixels) points.push_back(mask.center(x, y));
  CellPolygon polygon{cell, {}};
  for (std::size_t v : mst_longest_path(points)) polygon.vertices.push_back(points[v]);
  return polygon;
}

std::vector<CellPolygon> cell_contours(const CellSegmentation& seg, const MoleculeTable& table,
                                       double bin_size, double sigma) {
  const MoleculeTable* planar = &table;
  MoleculeTable projected;
  if (table.dims() == 3) {
    log_warning("contours are computed on the x/y projection; z is ignored");
    projected = MoleculeTable(2, table.panel());
    for (MoleculeId i = 0; i < table.size(); ++i) {
      auto p = table.position(i);
      const double xy[2] = {p[0], p[1]};
      projected.add(xy, table.label(i));
    }
    planar = &projected;
  }
  const LabelMask mask = smooth_and_label(rasterize_counts(seg, *planar, bin_size), sigma);
  std::vector<bool> present(seg.cell_count(), false);
  for (CellId label : mask.labels) {
    if (label != kUnassigned) present[static_cast<std::size_t>(label)] = true;
  }
  std::vector<CellPolygon> polygons;
  std::size_t degenerate = 0;
  for (std::size_t c = 0; c < seg.cell_count(); ++c) {
    if (!present[c]) continue;
    CellPolygon polygon = extract_contour(mask, static_cast<CellId>(c));
    if (polygon.vertices.size() < 3) {
      ++degenerate;
      continue;
    }
    polygons.push_back(std::move(polygon));
  }
  if (degenerate > 0) {
    log_warning(std::to_string(degenerate) + " cells produced fewer than 3 contour vertices and were skipped");
  }
  return polygons;
}

void write_geojson(std::ostream& out, const std::vector<CellPolygon>& polygons) {
  nlohmann::json features = nlohmann::json::array();
  for (const auto& poly : polygons) {
    nlohmann::json ring = nlohmann::json::array();
    for (const auto& v : poly.vertices) ring.push_back({v[0], v[1]});
    if (!poly.vertices.empty()) ring.push_back({poly.vertices.front()[0], poly.vertices.front()[1]});
    features.push_back({{"type", "Feature"},
                        {"properties", {{"cell_id", poly.cell}}},
                        {"geometry", {{"type", "Polygon"}, {"coordinates", nlohmann::json::array({ring})}}}});
  }
  out << nlohmann::json{{"type", "FeatureCollection"}, {"features", features}}.dump() << '\n';
}

void write_vertex_list(std::ostream& out, const std::vector<CellPolygon>& polygons) {
  out << "cell_id,vertex,x,y\n";
  for (const auto& poly : polygons) {
    for (std::size_t v = 0; v < poly.vertices.size(); ++v) {
      out << poly.cell << ',' << v << ',' << format_double(poly.vertices[v][0]) << ','
          << format_double(poly.vertices[v][1]) << '\n';
    }
  }
}

}  // namespace sgseg
