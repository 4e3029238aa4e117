#include "fewt/mesh.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "fewt/io.hpp"

namespace fewt::mesh {

namespace {

// Bourke corner layout: bottom face 0-3 counterclockwise, top face 4-7.
constexpr int kCornerOffset[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                                     {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
constexpr int kEdgeCorner[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                                    {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};

Vec3 interp_vertex(double iso, const Vec3& p1, const Vec3& p2, double v1, double v2) {
    if (std::abs(iso - v1) < 1e-12) return p1;
    if (std::abs(iso - v2) < 1e-12) return p2;
    if (std::abs(v1 - v2) < 1e-12) return p1;
    double mu = (iso - v1) / (v2 - v1);
    return p1 + (p2 - p1) * mu;
}

}  // namespace

std::vector<Triangle> marching_cubes(const ScalarField& field, const Aabb& box,
                                     const std::array<int, 3>& resolution, double iso,
                                     std::size_t voxel_cap) {
    for (int n : resolution)
        if (n < 2) throw std::invalid_argument("marching_cubes: resolution must be >= 2");
    std::size_t total =
        static_cast<std::size_t>(resolution[0]) * resolution[1] * resolution[2];
    if (total > voxel_cap)
        throw std::runtime_error("marching_cubes: voxel count " + std::to_string(total) +
                                 " exceeds cap " + std::to_string(voxel_cap));

    const int nx = resolution[0], ny = resolution[1], nz = resolution[2];
    Vec3 ext = box.extent();
    auto node = [&](int i, int j, int k) {
        return Vec3{box.min.x + ext.x * i / (nx - 1), box.min.y + ext.y * j / (ny - 1),
                    box.min.z + ext.z * k / (nz - 1)};
    };

    std::vector<double> values(total);
    for (int i = 0; i < nx; ++i)
        for (int j = 0; j < ny; ++j)
            for (int k = 0; k < nz; ++k)
                values[(static_cast<std::size_t>(i) * ny + j) * nz + k] = field(node(i, j, k));
    auto value = [&](int i, int j, int k) {
        return values[(static_cast<std::size_t>(i) * ny + j) * nz + k];
    };

    std::vector<Triangle> triangles;
    std::array<Vec3, 12> edge_vertex;
    for (int i = 0; i + 1 < nx; ++i)
        for (int j = 0; j + 1 < ny; ++j)
            for (int k = 0; k + 1 < nz; ++k) {
                double corner_value[8];
                Vec3 corner_pos[8];
                int cube_index = 0;
                for (int c = 0; c < 8; ++c) {
                    int ci = i + kCornerOffset[c][0];
                    int cj = j + kCornerOffset[c][1];
                    int ck = k + kCornerOffset[c][2];
                    corner_value[c] = value(ci, cj, ck);
                    corner_pos[c] = node(ci, cj, ck);
                    if (corner_value[c] < iso) cube_index |= 1 << c;
                }
                int edges = kEdgeTable[cube_index];
                if (edges == 0) continue;
                for (int e = 0; e < 12; ++e) {
                    if (!(edges & (1 << e))) continue;
                    int a = kEdgeCorner[e][0], b = kEdgeCorner[e][1];
                    edge_vertex[static_cast<size_t>(e)] = interp_vertex(
                        iso, corner_pos[a], corner_pos[b], corner_value[a], corner_value[b]);
                }
                const int* tri = kTriTable[cube_index];
                for (int e = 0; tri[e] != -1; e += 3) {
                    triangles.push_back({{edge_vertex[static_cast<size_t>(tri[e])],
                                          edge_vertex[static_cast<size_t>(tri[e + 1])],
                                          edge_vertex[static_cast<size_t>(tri[e + 2])]}});
                }
            }
    return triangles;
}

void write_stl(const std::string& path, std::span<const Triangle> triangles) {
    std::string out;
    out.resize(80, '\0');
    std::memcpy(out.data(), "fewt density mesh", 17);

    auto put_u32 = [&](std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    };
    auto put_f32 = [&](float f) {
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        put_u32(bits);
    };
    put_u32(static_cast<std::uint32_t>(triangles.size()));
    for (const Triangle& t : triangles) {
        Vec3 n = cross(t.v[1] - t.v[0], t.v[2] - t.v[0]);
        double len = norm(n);
        n = len > 0.0 ? n / len : Vec3{0, 0, 0};
        for (int c = 0; c < 3; ++c) put_f32(static_cast<float>(n[c]));
        for (const Vec3& v : t.v)
            for (int c = 0; c < 3; ++c) put_f32(static_cast<float>(v[c]));
        out.push_back('\0');
        out.push_back('\0');
    }
    io::atomic_write(path, out);
}

std::size_t export_mesh(const grid::DensityGrid& density, double iso,
                        const std::array<int, 3>& resolution, const std::string& path,
                        std::size_t voxel_cap) {
    ScalarField field = [&](const Vec3& p) { return density.eval(p); };
    return export_mesh(field, density.factors.geometry().aabb(), iso, resolution, path,
                       voxel_cap);
}

std::size_t export_mesh(const ScalarField& field, const Aabb& box, double iso,
                        const std::array<int, 3>& resolution, const std::string& path,
                        std::size_t voxel_cap) {
    auto triangles = marching_cubes(field, box, resolution, iso, voxel_cap);
    write_stl(path, triangles);
    return triangles.size();
}

}  // namespace fewt::mesh
