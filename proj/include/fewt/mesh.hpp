#pragma once

#include <array>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fewt/geometry.hpp"
#include "fewt/grid.hpp"

namespace fewt::mesh {

extern const int kEdgeTable[256];
extern const int kTriTable[256][16];

struct Triangle {
    std::array<Vec3, 3> v;
};

using ScalarField = std::function<double(const Vec3&)>;

// Iso-surface of the field sampled on a cell-vertex grid over the box
// (resolution nodes per axis), with linear edge interpolation. Triangle
// order is deterministic for a fixed field and resolution.
std::vector<Triangle> marching_cubes(const ScalarField& field, const Aabb& box,
                                     const std::array<int, 3>& resolution, double iso,
                                     std::size_t voxel_cap = 1u << 24);

// Binary STL (80-byte header, little-endian), written atomically. An empty
// triangle list yields a valid file with a zero triangle count.
void write_stl(const std::string& path, std::span<const Triangle> triangles);

// Marching cubes over the activated density; returns the triangle count so
// callers can warn on an empty surface.
std::size_t export_mesh(const grid::DensityGrid& density, double iso,
                        const std::array<int, 3>& resolution, const std::string& path,
                        std::size_t voxel_cap = 1u << 24);

std::size_t export_mesh(const ScalarField& field, const Aabb& box, double iso,
                        const std::array<int, 3>& resolution, const std::string& path,
                        std::size_t voxel_cap = 1u << 24);

}  // namespace fewt::mesh
