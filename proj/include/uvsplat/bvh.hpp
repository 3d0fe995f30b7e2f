#pragma once

#include <array>
#include <vector>

#include "uvsplat/math.hpp"

namespace uvsplat {

// Closest point on triangle abc to p, plus its barycentric coordinates.
struct TrianglePoint {
  Vec3 point;
  Vec3 bary;  // (wa, wb, wc)
};
TrianglePoint closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

// Median-split AABB tree over triangles for nearest-surface-point queries.
class TriangleBvh {
 public:
  TriangleBvh(const std::vector<Vec3>& vertices, const std::vector<std::array<int, 3>>& faces);

  struct Hit {
    int face = -1;
    Vec3 point;
    Vec3 bary;
    double dist2 = 0.0;
  };
  Hit closest(const Vec3& query) const;

 private:
  struct Node {
    Vec3 lo, hi;
    int left = -1, right = -1;  // internal children, or
    int first = 0, count = 0;   // leaf triangle range
  };

  int build(int begin, int end);

  const std::vector<Vec3>& vertices_;
  const std::vector<std::array<int, 3>>& faces_;
  std::vector<int> order_;
  std::vector<Vec3> centroids_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace uvsplat
