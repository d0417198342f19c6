#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

namespace ippsim {

// Robot pose. The camera is fixed nadir (downward-facing), so no orientation
// is carried; z is the flight altitude for all planned poses.
struct Pose {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

inline double distance(const Pose& a, const Pose& b) {
  const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

// Nadir pinhole camera: a square ground footprint of `footprint` meters side
// length at flight altitude, sampled at width x height pixels. `noise_amp` is
// the amplitude of the additive uniform feature noise applied by the sensor.
struct CameraModel {
  int width = 400;
  int height = 400;
  double footprint = 40.0;
  double noise_amp = 0.05;

  bool valid() const { return width >= 2 && height >= 2 && footprint > 0.0; }
};

// Nominal ground position of pixel (m, n): the point where the pixel's ray
// crosses the z = 0 reference plane. Row m advances +y, column n advances +x.
inline void pixel_ground_point(const Pose& pose, const CameraModel& cam, int m,
                               int n, double* gx, double* gy) {
  *gx = pose.x + (n + 0.5 - 0.5 * cam.width) * (cam.footprint / cam.width);
  *gy = pose.y + (m + 0.5 - 0.5 * cam.height) * (cam.footprint / cam.height);
}

struct GridIndex {
  int x = 0;
  int y = 0;
  int z = 0;

  bool operator==(const GridIndex&) const = default;
};

// Amanatides-Woo voxel traversal over a grid of `nx of ny of nz` voxels of
// edge length `voxel` anchored at the origin. Visits every voxel the segment
// [a, b] passes through, in order, including the voxel containing b. The
// segment is clipped to the grid, so either endpoint may lie outside.
// Visitor signature: bool visit(const GridIndex&); return false to stop.
template <typename Visitor>
void traverse_segment(double ax, double ay, double az, double bx, double by,
                      double bz, double voxel, int nx, int ny, int nz,
                      Visitor&& visit) {
  const double dx = bx - ax, dy = by - ay, dz = bz - az;
  const double len = std::sqrt(dx * dx + dy * dy + dz * dz);
  if (!(len > 0.0)) {
    // Degenerate segment: visit the containing voxel if inside.
    const int ix = static_cast<int>(std::floor(ax / voxel));
    const int iy = static_cast<int>(std::floor(ay / voxel));
    const int iz = static_cast<int>(std::floor(az / voxel));
    if (ix >= 0 && ix < nx && iy >= 0 && iy < ny && iz >= 0 && iz < nz)
      visit(GridIndex{ix, iy, iz});
    return;
  }

  // Clip [t0, t1] to the grid box with the slab method.
  double t0 = 0.0, t1 = 1.0;
  const double lo[3] = {0.0, 0.0, 0.0};
  const double hi[3] = {nx * voxel, ny * voxel, nz * voxel};
  const double o[3] = {ax, ay, az};
  const double d[3] = {dx, dy, dz};
  for (int i = 0; i < 3; ++i) {
    if (d[i] == 0.0) {
      if (o[i] < lo[i] || o[i] >= hi[i]) return;
    } else {
      double ta = (lo[i] - o[i]) / d[i];
      double tb = (hi[i] - o[i]) / d[i];
      if (ta > tb) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
      if (t0 > t1) return;
    }
  }

  // Entry point, nudged forward so boundary starts resolve into the grid.
  const double eps = 1e-12 * std::max({hi[0], hi[1], hi[2], 1.0});
  const double px = ax + (t0 + eps / len) * dx;
  const double py = ay + (t0 + eps / len) * dy;
  const double pz = az + (t0 + eps / len) * dz;

  int ix = static_cast<int>(std::floor(px / voxel));
  int iy = static_cast<int>(std::floor(py / voxel));
  int iz = static_cast<int>(std::floor(pz / voxel));
  ix = std::max(0, std::min(nx - 1, ix));
  iy = std::max(0, std::min(ny - 1, iy));
  iz = std::max(0, std::min(nz - 1, iz));

  const int step_x = dx > 0 ? 1 : (dx < 0 ? -1 : 0);
  const int step_y = dy > 0 ? 1 : (dy < 0 ? -1 : 0);
  const int step_z = dz > 0 ? 1 : (dz < 0 ? -1 : 0);

  const double inf = std::numeric_limits<double>::infinity();
  auto axis_t_max = [&](double origin, double dir, int idx, int step) {
    if (step == 0) return inf;
    const double boundary = (idx + (step > 0 ? 1 : 0)) * voxel;
    return (boundary - origin) / dir;
  };
  double t_max_x = axis_t_max(ax, dx, ix, step_x);
  double t_max_y = axis_t_max(ay, dy, iy, step_y);
  double t_max_z = axis_t_max(az, dz, iz, step_z);
  const double t_delta_x = step_x ? voxel / std::abs(dx) : inf;
  const double t_delta_y = step_y ? voxel / std::abs(dy) : inf;
  const double t_delta_z = step_z ? voxel / std::abs(dz) : inf;

  while (true) {
    if (!visit(GridIndex{ix, iy, iz})) return;
    double t_next = std::min({t_max_x, t_max_y, t_max_z});
    if (t_next >= t1) return;  // segment ends inside the current voxel
    if (t_next == t_max_x) {
      ix += step_x;
      t_max_x += t_delta_x;
      if (ix < 0 || ix >= nx) return;
    } else if (t_next == t_max_y) {
      iy += step_y;
      t_max_y += t_delta_y;
      if (iy < 0 || iy >= ny) return;
    } else {
      iz += step_z;
      t_max_z += t_delta_z;
      if (iz < 0 || iz >= nz) return;
    }
  }
}

}  // namespace ippsim
