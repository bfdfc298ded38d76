#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "error.hpp"

namespace bihlab {

using Index3 = std::array<int, 3>;

struct GridSpec {
  Index3 dims{2, 2, 2};
  double h = 1.0;

  void validate() const {
    for (int m = 0; m < 3; ++m)
      if (dims[m] < 2) throw Error(ErrorCode::ConfigError, "grid needs at least 2 nodes per axis");
    if (!(h > 0.0)) throw Error(ErrorCode::ConfigError, "grid spacing must be positive");
  }
  int num_nodes() const { return dims[0] * dims[1] * dims[2]; }
  bool contains(const Index3& x) const {
    for (int m = 0; m < 3; ++m)
      if (x[m] < 0 || x[m] >= dims[m]) return false;
    return true;
  }
  /// Linear node index, x fastest.
  int index(const Index3& x) const { return x[0] + dims[0] * (x[1] + dims[1] * x[2]); }
  Index3 coords(int i) const { return {i % dims[0], (i / dims[0]) % dims[1], i / (dims[0] * dims[1])}; }
};

/// Grid whose spacing makes the box the unit cube, h = 1/(n-1) along the first axis.
inline GridSpec unit_grid(int n) { return GridSpec{{n, n, n}, 1.0 / (n - 1)}; }

struct VoxelDomain {
  GridSpec grid;
  std::vector<std::uint8_t> active;

  bool is_active(const Index3& x) const { return grid.contains(x) && active[grid.index(x)] != 0; }
  int num_active() const {
    int c = 0;
    for (auto a : active) c += a != 0;
    return c;
  }
};

struct ShapeDescriptor {
  enum class Kind { FullBox, BoxMinusBox, MaskFile };
  Kind kind = Kind::FullBox;
  Index3 inner_lo{0, 0, 0};  // removed block for BoxMinusBox, inclusive bounds
  Index3 inner_hi{-1, -1, -1};
  std::string path;          // for MaskFile

  static ShapeDescriptor full_box() { return {}; }
  static ShapeDescriptor box_minus_box(Index3 lo, Index3 hi) {
    ShapeDescriptor d;
    d.kind = Kind::BoxMinusBox;
    d.inner_lo = lo;
    d.inner_hi = hi;
    return d;
  }
  /// Centered cubic cavity of edge `k` nodes inside the grid.
  static ShapeDescriptor centered_cavity(const GridSpec& g, int k) {
    Index3 lo, hi;
    for (int m = 0; m < 3; ++m) {
      lo[m] = (g.dims[m] - k) / 2;
      hi[m] = lo[m] + k - 1;
    }
    return box_minus_box(lo, hi);
  }
  static ShapeDescriptor mask_file(std::string p) {
    ShapeDescriptor d;
    d.kind = Kind::MaskFile;
    d.path = std::move(p);
    return d;
  }
};

inline std::vector<std::uint8_t> read_voxmask(const std::string& path, Index3& dims) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open mask file " + path);
  std::string magic;
  in >> magic >> dims[0] >> dims[1] >> dims[2];
  if (!in || magic != "voxmask") throw Error(ErrorCode::HeaderMismatch, "bad voxmask header in " + path);
  const long n = static_cast<long>(dims[0]) * dims[1] * dims[2];
  std::vector<std::uint8_t> mask(n);
  for (long i = 0; i < n; ++i) {
    int v;
    if (!(in >> v) || (v != 0 && v != 1)) throw Error(ErrorCode::IoError, "truncated or invalid voxmask payload");
    mask[i] = static_cast<std::uint8_t>(v);
  }
  return mask;
}

inline void write_voxmask(const std::string& path, const Index3& dims, const std::vector<std::uint8_t>& mask) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write mask file " + path);
  out << "voxmask " << dims[0] << ' ' << dims[1] << ' ' << dims[2] << '\n';
  for (std::size_t i = 0; i < mask.size(); ++i) out << int(mask[i]) << ((i + 1) % dims[0] == 0 ? '\n' : ' ');
}

/// Number of face-connected components of the active set.
inline int count_components(const GridSpec& g, const std::vector<std::uint8_t>& active) {
  std::vector<int> label(active.size(), -1);
  int comps = 0;
  std::vector<int> stack;
  for (int s = 0; s < g.num_nodes(); ++s) {
    if (!active[s] || label[s] >= 0) continue;
    label[s] = comps;
    stack.push_back(s);
    while (!stack.empty()) {
      const Index3 x = g.coords(stack.back());
      stack.pop_back();
      for (int m = 0; m < 3; ++m)
        for (int d : {-1, 1}) {
          Index3 y = x;
          y[m] += d;
          if (!g.contains(y)) continue;
          const int j = g.index(y);
          if (active[j] && label[j] < 0) {
            label[j] = comps;
            stack.push_back(j);
          }
        }
    }
    ++comps;
  }
  return comps;
}

inline VoxelDomain build_domain(GridSpec spec, const ShapeDescriptor& shape) {
  VoxelDomain dom;
  if (shape.kind == ShapeDescriptor::Kind::MaskFile) {
    Index3 dims;
    dom.active = read_voxmask(shape.path, dims);
    spec.dims = dims;
  }
  spec.validate();
  dom.grid = spec;
  if (shape.kind != ShapeDescriptor::Kind::MaskFile) {
    dom.active.assign(spec.num_nodes(), 1);
    if (shape.kind == ShapeDescriptor::Kind::BoxMinusBox)
      for (int i = 0; i < spec.num_nodes(); ++i) {
        const Index3 x = spec.coords(i);
        bool inside = true;
        for (int m = 0; m < 3; ++m) inside = inside && x[m] >= shape.inner_lo[m] && x[m] <= shape.inner_hi[m];
        if (inside) dom.active[i] = 0;
      }
  }
  if (dom.num_active() == 0) throw Error(ErrorCode::Empty, "domain has no active nodes");
  if (count_components(spec, dom.active) != 1) throw Error(ErrorCode::Disconnected, "active set is not face-connected");
  return dom;
}

/// Face between the active node `node` and its neighbour node + sign*e_axis, which is inactive or outside the grid.
struct BoundaryFace {
  Index3 node;
  int axis;
  int sign;
  Index3 outer() const {
    Index3 z = node;
    z[axis] += sign;
    return z;
  }
  /// Coordinate of the face centre along `m`, in node units.
  double center(int m) const { return node[m] + (m == axis ? 0.5 * sign : 0.0); }
};

using FaceSelector = std::function<bool(const BoundaryFace&)>;

enum class FaceTag : std::uint8_t { None = 0, T = 1, N = 2 };

struct BoundaryPartition {
  std::vector<BoundaryFace> faces;
  std::vector<std::uint8_t> is_t;
  // Per node and face slot (2*axis + (sign>0)): tag of the boundary face there.
  std::vector<std::array<FaceTag, 6>> slots;

  int num_t() const {
    int c = 0;
    for (auto t : is_t) c += t != 0;
    return c;
  }
  int num_n() const { return static_cast<int>(faces.size()) - num_t(); }
};

namespace selectors {
inline FaceSelector all_t() {
  return [](const BoundaryFace&) { return true; };
}
inline FaceSelector all_n() {
  return [](const BoundaryFace&) { return false; };
}
/// Faces whose centre lies below the plane coordinate along `axis` are tagged t.
inline FaceSelector half_split(int axis, double plane) {
  return [axis, plane](const BoundaryFace& f) { return f.center(axis) < plane; };
}
inline FaceSelector half_split(const GridSpec& g, int axis = 0) {
  return half_split(axis, 0.5 * (g.dims[axis] - 1));
}
}  // namespace selectors

inline BoundaryPartition partition_boundary(const VoxelDomain& dom, const FaceSelector& sel) {
  BoundaryPartition p;
  const GridSpec& g = dom.grid;
  p.slots.assign(g.num_nodes(), {FaceTag::None, FaceTag::None, FaceTag::None, FaceTag::None, FaceTag::None, FaceTag::None});
  for (int i = 0; i < g.num_nodes(); ++i) {
    if (!dom.active[i]) continue;
    const Index3 x = g.coords(i);
    for (int m = 0; m < 3; ++m)
      for (int s : {-1, 1}) {
        BoundaryFace f{x, m, s};
        if (dom.is_active(f.outer())) continue;
        const bool t = sel(f);
        p.faces.push_back(f);
        p.is_t.push_back(t ? 1 : 0);
        p.slots[i][2 * m + (s > 0)] = t ? FaceTag::T : FaceTag::N;
      }
  }
  return p;
}

/// True if the node box [lo, hi] (may extend past the grid) contains both sides of a boundary face with tag `tag`.
inline bool box_crosses(const GridSpec& g, const BoundaryPartition& p, const Index3& lo, const Index3& hi, FaceTag tag) {
  Index3 a, b;
  for (int m = 0; m < 3; ++m) {
    a[m] = std::max(lo[m], 0);
    b[m] = std::min(hi[m], g.dims[m] - 1);
    if (a[m] > b[m]) return false;
  }
  for (int z = a[2]; z <= b[2]; ++z)
    for (int y = a[1]; y <= b[1]; ++y)
      for (int x = a[0]; x <= b[0]; ++x) {
        const Index3 n{x, y, z};
        const auto& sl = p.slots[g.index(n)];
        for (int m = 0; m < 3; ++m)
          for (int s : {-1, 1}) {
            if (sl[2 * m + (s > 0)] != tag) continue;
            const int o = n[m] + s;
            if (o >= lo[m] && o <= hi[m]) return true;
          }
      }
  return false;
}

/// Node mask realizing a strong boundary condition by a band of excluded nodes near Gamma_t.
struct DofMask {
  std::string rank;
  std::vector<std::uint8_t> keep;
  int band_width = 0;

  int num_kept() const {
    int c = 0;
    for (auto k : keep) c += k != 0;
    return c;
  }
};

/// Excludes active nodes whose Chebyshev distance to the inner node of a Gamma_t face is below the width.
inline DofMask build_mask(const VoxelDomain& dom, const BoundaryPartition& part, const std::string& rank, int width) {
  const GridSpec& g = dom.grid;
  DofMask mask{rank, dom.active, width};
  if (width <= 0) return mask;
  for (std::size_t f = 0; f < part.faces.size(); ++f) {
    if (!part.is_t[f]) continue;
    const Index3 y = part.faces[f].node;
    for (int dz = -(width - 1); dz <= width - 1; ++dz)
      for (int dy = -(width - 1); dy <= width - 1; ++dy)
        for (int dx = -(width - 1); dx <= width - 1; ++dx) {
          const Index3 x{y[0] + dx, y[1] + dy, y[2] + dz};
          if (g.contains(x)) mask.keep[g.index(x)] = 0;
        }
  }
  return mask;
}

/// One mask per chain level. Widths must not increase along the chain.
inline std::vector<DofMask> build_masks(const VoxelDomain& dom, const BoundaryPartition& part,
                                        const std::vector<std::string>& ranks, const std::vector<int>& widths) {
  if (ranks.size() != widths.size()) throw Error(ErrorCode::ShapeMismatch, "one width per rank required");
  for (std::size_t k = 0; k < widths.size(); ++k) {
    if (widths[k] < 0) throw Error(ErrorCode::IncompatibleWidths, "negative band width");
    if (k + 1 < widths.size() && widths[k] < widths[k + 1])
      throw Error(ErrorCode::IncompatibleWidths,
                  "band width of " + ranks[k] + " is smaller than that of the following level " + ranks[k + 1]);
  }
  std::vector<DofMask> masks;
  for (std::size_t k = 0; k < widths.size(); ++k) masks.push_back(build_mask(dom, part, ranks[k], widths[k]));
  return masks;
}

}  // namespace bihlab
