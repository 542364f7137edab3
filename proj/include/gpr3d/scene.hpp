#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "gpr3d/rng.hpp"
#include "gpr3d/tensor.hpp"

namespace gpr3d {

struct Vec3 {
  double x = 0, y = 0, z = 0;
};

inline Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }

enum class ObjectShape { Cylinder, Sphere, Box };

const char* shape_name(ObjectShape s);
ObjectShape shape_from_name(const std::string& name);

/// A parameterized buried object. Sizes are in meters; orientation is a
/// yaw/pitch/roll triple (radians) applied as Rz * Ry * Rx. Spheres ignore
/// orientation; the cylinder axis is the rotated local z.
struct SubsurfaceObject {
  ObjectShape shape = ObjectShape::Sphere;
  Vec3 center;
  double radius = 0.0;  // cylinder / sphere
  double length = 0.0;  // cylinder
  Vec3 edges;           // box edge lengths
  Vec3 euler;
  double epsilon_r = 8.0;

  bool contains(Vec3 p) const;
  void aabb(Vec3& lo, Vec3& hi) const;
};

/// Ground-truth subsurface description. Conductivity is recorded but not
/// used by the forward model.
struct Scene {
  double soil_epsilon_r = 4.0;
  double soil_conductivity = 0.0;
  std::vector<SubsurfaceObject> objects;
  std::uint64_t seed = 0;
};

/// Sampling ranges for scene attributes.
struct SceneRanges {
  double eps_lo = 8.0, eps_hi = 27.0;
  double cylinder_radius_lo = 0.02, cylinder_radius_hi = 0.05;
  double cylinder_length_lo = 0.01, cylinder_length_hi = 0.33;
  double sphere_radius_lo = 0.02, sphere_radius_hi = 0.05;
  double box_edge_lo = 0.04, box_edge_hi = 0.10;
  Vec3 placement_lo{0.3, 0.3, 0.0};
  Vec3 placement_hi{0.7, 0.7, 0.26};
};

/// Draws n_objects (0..3) objects with attributes uniform in the configured
/// ranges. The draw order per object is fixed (shape, center, permittivity,
/// size parameters, orientation) so a seed pins the scene bit-exactly.
Scene sample_scene(Rng& rng, int n_objects, const SceneRanges& ranges = {},
                   double soil_epsilon_r = 4.0);

/// Voxelizes the scene onto a dims[0] x dims[1] x dims[2] grid (z, y, x
/// order to match C-scan depth-first layout). A voxel takes the permittivity
/// of the last object in list order whose volume contains its center;
/// otherwise background_epsilon_r.
Tensor<double> rasterize_permittivity(const Scene& scene, const std::array<std::size_t, 3>& dims,
                                      Vec3 origin, Vec3 voxel_size, double background_epsilon_r);

}  // namespace gpr3d
