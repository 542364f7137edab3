#include "gpr3d/scene.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gpr3d {

const char* shape_name(ObjectShape s) {
  switch (s) {
    case ObjectShape::Cylinder: return "cylinder";
    case ObjectShape::Sphere: return "sphere";
    case ObjectShape::Box: return "box";
  }
  return "?";
}

ObjectShape shape_from_name(const std::string& name) {
  if (name == "cylinder") return ObjectShape::Cylinder;
  if (name == "sphere") return ObjectShape::Sphere;
  if (name == "box") return ObjectShape::Box;
  fail("scene: unknown object shape '" + name + "'");
}

namespace {

struct Mat3 {
  double m[3][3];
};

Mat3 rotation(const Vec3& e) {
  const double ca = std::cos(e.x), sa = std::sin(e.x);  // yaw   (z)
  const double cb = std::cos(e.y), sb = std::sin(e.y);  // pitch (y)
  const double cc = std::cos(e.z), sc = std::sin(e.z);  // roll  (x)
  Mat3 r;
  r.m[0][0] = ca * cb;
  r.m[0][1] = ca * sb * sc - sa * cc;
  r.m[0][2] = ca * sb * cc + sa * sc;
  r.m[1][0] = sa * cb;
  r.m[1][1] = sa * sb * sc + ca * cc;
  r.m[1][2] = sa * sb * cc - ca * sc;
  r.m[2][0] = -sb;
  r.m[2][1] = cb * sc;
  r.m[2][2] = cb * cc;
  return r;
}

Vec3 transpose_apply(const Mat3& r, Vec3 p) {
  return {r.m[0][0] * p.x + r.m[1][0] * p.y + r.m[2][0] * p.z,
          r.m[0][1] * p.x + r.m[1][1] * p.y + r.m[2][1] * p.z,
          r.m[0][2] * p.x + r.m[1][2] * p.y + r.m[2][2] * p.z};
}

}  // namespace

bool SubsurfaceObject::contains(Vec3 p) const {
  const Vec3 d = p - center;
  switch (shape) {
    case ObjectShape::Sphere:
      return d.x * d.x + d.y * d.y + d.z * d.z <= radius * radius;
    case ObjectShape::Cylinder: {
      const Vec3 q = transpose_apply(rotation(euler), d);
      return std::abs(q.z) <= 0.5 * length && q.x * q.x + q.y * q.y <= radius * radius;
    }
    case ObjectShape::Box: {
      const Vec3 q = transpose_apply(rotation(euler), d);
      return std::abs(q.x) <= 0.5 * edges.x && std::abs(q.y) <= 0.5 * edges.y &&
             std::abs(q.z) <= 0.5 * edges.z;
    }
  }
  return false;
}

void SubsurfaceObject::aabb(Vec3& lo, Vec3& hi) const {
  Vec3 half;
  switch (shape) {
    case ObjectShape::Sphere:
      half = {radius, radius, radius};
      break;
    case ObjectShape::Cylinder: {
      const Mat3 r = rotation(euler);
      // Axis is the rotated local z; extent_i = L/2*|u_i| + r*sqrt(1-u_i^2).
      const double u[3] = {r.m[0][2], r.m[1][2], r.m[2][2]};
      double h[3];
      for (int i = 0; i < 3; ++i)
        h[i] = 0.5 * length * std::abs(u[i]) + radius * std::sqrt(std::max(0.0, 1.0 - u[i] * u[i]));
      half = {h[0], h[1], h[2]};
      break;
    }
    case ObjectShape::Box: {
      const Mat3 r = rotation(euler);
      double h[3];
      for (int i = 0; i < 3; ++i)
        h[i] = 0.5 * (std::abs(r.m[i][0]) * edges.x + std::abs(r.m[i][1]) * edges.y +
                      std::abs(r.m[i][2]) * edges.z);
      half = {h[0], h[1], h[2]};
      break;
    }
  }
  lo = center - half;
  hi = center + half;
}

Scene sample_scene(Rng& rng, int n_objects, const SceneRanges& rr, double soil_epsilon_r) {
  require(n_objects >= 0 && n_objects <= 3,
          "sample_scene: n_objects " + std::to_string(n_objects) + " outside 0..3");
  Scene scene;
  scene.soil_epsilon_r = soil_epsilon_r;
  const double two_pi = 6.283185307179586476925286766559;
  for (int i = 0; i < n_objects; ++i) {
    SubsurfaceObject obj;
    obj.shape = static_cast<ObjectShape>(rng.uniform_int(0, 2));
    obj.center = {rng.uniform(rr.placement_lo.x, rr.placement_hi.x),
                  rng.uniform(rr.placement_lo.y, rr.placement_hi.y),
                  rng.uniform(rr.placement_lo.z, rr.placement_hi.z)};
    obj.epsilon_r = rng.uniform(rr.eps_lo, rr.eps_hi);
    switch (obj.shape) {
      case ObjectShape::Cylinder:
        obj.radius = rng.uniform(rr.cylinder_radius_lo, rr.cylinder_radius_hi);
        obj.length = rng.uniform(rr.cylinder_length_lo, rr.cylinder_length_hi);
        break;
      case ObjectShape::Sphere:
        obj.radius = rng.uniform(rr.sphere_radius_lo, rr.sphere_radius_hi);
        break;
      case ObjectShape::Box:
        obj.edges = {rng.uniform(rr.box_edge_lo, rr.box_edge_hi),
                     rng.uniform(rr.box_edge_lo, rr.box_edge_hi),
                     rng.uniform(rr.box_edge_lo, rr.box_edge_hi)};
        break;
    }
    obj.euler = {rng.uniform(0.0, two_pi), rng.uniform(0.0, two_pi), rng.uniform(0.0, two_pi)};
    scene.objects.push_back(obj);
  }
  return scene;
}

Tensor<double> rasterize_permittivity(const Scene& scene, const std::array<std::size_t, 3>& dims,
                                      Vec3 origin, Vec3 voxel_size, double background_epsilon_r) {
  require(dims[0] > 0 && dims[1] > 0 && dims[2] > 0, "rasterize_permittivity: empty grid");
  Tensor<double> map({dims[0], dims[1], dims[2]});
  const long nz = static_cast<long>(dims[0]);
#pragma omp parallel for schedule(static)
  for (long iz = 0; iz < nz; ++iz) {
    for (std::size_t iy = 0; iy < dims[1]; ++iy)
      for (std::size_t ix = 0; ix < dims[2]; ++ix) {
        const Vec3 p{origin.x + (static_cast<double>(ix) + 0.5) * voxel_size.x,
                     origin.y + (static_cast<double>(iy) + 0.5) * voxel_size.y,
                     origin.z + (static_cast<double>(iz) + 0.5) * voxel_size.z};
        double value = background_epsilon_r;
        for (const SubsurfaceObject& obj : scene.objects)
          if (obj.contains(p)) value = obj.epsilon_r;  // later objects overwrite
        map.data[(static_cast<std::size_t>(iz) * dims[1] + iy) * dims[2] + ix] = value;
      }
  }
  return map;
}

}  // namespace gpr3d
