#include "uvsplat/bvh.hpp"

#include <algorithm>
#include <limits>

#include "uvsplat/common.hpp"

namespace uvsplat {

TrianglePoint closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b,
                                        const Vec3& c) {
  // Ericson, Real-Time Collision Detection, 5.1.5
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = dot(ab, ap), d2 = dot(ac, ap);
  if (d1 <= 0.0 && d2 <= 0.0) return {a, {1, 0, 0}};

  const Vec3 bp = p - b;
  const double d3 = dot(ab, bp), d4 = dot(ac, bp);
  if (d3 >= 0.0 && d4 <= d3) return {b, {0, 1, 0}};

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double v = d1 / (d1 - d3);
    return {a + v * ab, {1 - v, v, 0}};
  }

  const Vec3 cp = p - c;
  const double d5 = dot(ab, cp), d6 = dot(ac, cp);
  if (d6 >= 0.0 && d5 <= d6) return {c, {0, 0, 1}};

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double w = d2 / (d2 - d6);
    return {a + w * ac, {1 - w, 0, w}};
  }

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return {b + w * (c - b), {0, 1 - w, w}};
  }

  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom, w = vc * denom;
  return {a + v * ab + w * ac, {1 - v - w, v, w}};
}

namespace {

inline double aabb_dist2(const Vec3& lo, const Vec3& hi, const Vec3& p) {
  double d2 = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double v = p[k];
    const double l = lo[k], h = hi[k];
    if (v < l) d2 += (l - v) * (l - v);
    if (v > h) d2 += (v - h) * (v - h);
  }
  return d2;
}

}  // namespace

TriangleBvh::TriangleBvh(const std::vector<Vec3>& vertices,
                         const std::vector<std::array<int, 3>>& faces)
    : vertices_(vertices), faces_(faces) {
  require(!faces.empty(), ErrorCode::empty_scan, "BVH over zero triangles");
  order_.resize(faces.size());
  centroids_.resize(faces.size());
  for (size_t i = 0; i < faces.size(); ++i) {
    order_[i] = int(i);
    centroids_[i] =
        (vertices[faces[i][0]] + vertices[faces[i][1]] + vertices[faces[i][2]]) / 3.0;
  }
  nodes_.reserve(faces.size() * 2);
  root_ = build(0, int(faces.size()));
}

int TriangleBvh::build(int begin, int end) {
  Node node;
  node.lo = {std::numeric_limits<double>::max(), std::numeric_limits<double>::max(),
             std::numeric_limits<double>::max()};
  node.hi = {-std::numeric_limits<double>::max(), -std::numeric_limits<double>::max(),
             -std::numeric_limits<double>::max()};
  for (int i = begin; i < end; ++i) {
    const auto& f = faces_[order_[i]];
    for (int k = 0; k < 3; ++k) {
      const Vec3& v = vertices_[f[k]];
      node.lo = {std::min(node.lo.x, v.x), std::min(node.lo.y, v.y), std::min(node.lo.z, v.z)};
      node.hi = {std::max(node.hi.x, v.x), std::max(node.hi.y, v.y), std::max(node.hi.z, v.z)};
    }
  }

  constexpr int kLeafSize = 4;
  if (end - begin <= kLeafSize) {
    node.first = begin;
    node.count = end - begin;
    nodes_.push_back(node);
    return int(nodes_.size()) - 1;
  }

  const Vec3 extent = node.hi - node.lo;
  int axis = 0;
  if (extent.y > extent.x) axis = 1;
  if (extent.z > extent[axis]) axis = 2;
  const int mid = (begin + end) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int a, int b) {
                     if (centroids_[a][axis] != centroids_[b][axis])
                       return centroids_[a][axis] < centroids_[b][axis];
                     return a < b;  // stable under duplicates
                   });

  const int idx = int(nodes_.size());
  nodes_.push_back(node);
  const int l = build(begin, mid);
  const int r = build(mid, end);
  nodes_[idx].left = l;
  nodes_[idx].right = r;
  return idx;
}

TriangleBvh::Hit TriangleBvh::closest(const Vec3& query) const {
  Hit best;
  best.dist2 = std::numeric_limits<double>::max();

  int stack[64];
  int top = 0;
  stack[top++] = root_;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (aabb_dist2(node.lo, node.hi, query) >= best.dist2) continue;
    if (node.left < 0) {
      for (int i = node.first; i < node.first + node.count; ++i) {
        const int fi = order_[i];
        const auto& f = faces_[fi];
        const TrianglePoint tp =
            closest_point_on_triangle(query, vertices_[f[0]], vertices_[f[1]], vertices_[f[2]]);
        const double d2 = norm2(tp.point - query);
        // tie-break on face index keeps queries deterministic
        if (d2 < best.dist2 || (d2 == best.dist2 && fi < best.face)) {
          best.dist2 = d2;
          best.face = fi;
          best.point = tp.point;
          best.bary = tp.bary;
        }
      }
    } else {
      const double dl = aabb_dist2(nodes_[node.left].lo, nodes_[node.left].hi, query);
      const double dr = aabb_dist2(nodes_[node.right].lo, nodes_[node.right].hi, query);
      // push the farther child first so the nearer one is processed next
      if (dl <= dr) {
        stack[top++] = node.right;
        stack[top++] = node.left;
      } else {
        stack[top++] = node.left;
        stack[top++] = node.right;
      }
    }
  }
  return best;
}

}  // namespace uvsplat
