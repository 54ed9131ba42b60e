#pragma once

#include <vhn/mesh.hpp>

namespace vhn::shapes {

/// Regular icosahedron inscribed in the unit sphere (12 vertices, 20 faces).
SurfaceMesh icosahedron();

/// Icosahedron with `subdivisions` rounds of 4:1 midpoint refinement, projected
/// onto the unit sphere: 12, 42, 162, 642, 2562, ... vertices.
SurfaceMesh icosphere(int subdivisions);

/// Per-axis scaling of the positions (x -> diag(s) x).
SurfaceMesh scaled(const SurfaceMesh& mesh, const Vec3& s);

/// Planar (nx + 1) x (ny + 1) grid in z = 0 over [0, width] x [0, height].
/// `alternate` flips every other quad diagonal.
SurfaceMesh grid(int nx, int ny, double width, double height, bool alternate = false);

/// The grid of `grid(nx, ny, width, height)` folded about every column line so
/// that column i has turned by `total_angle * i / nx`. Each strip between two
/// columns stays planar, so all edge lengths and corner angles are preserved.
SurfaceMesh bent_grid(int nx, int ny, double width, double height, double total_angle);

/// Surface of [-1, 1]^3 with each face split into n x n quads (2 triangles each).
SurfaceMesh subdivided_cube(int n);

/// Open pyramid: an apex and `sides` straight rays, with vertex rings at
/// distance 1 and 2 along each ray. Every ring-1 vertex lies on a fold
/// between two planar sides and is intrinsically flat.
SurfaceMesh pyramid_cone(int sides, double slope);

} // namespace vhn::shapes
