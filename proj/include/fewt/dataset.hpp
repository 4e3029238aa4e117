#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fewt/geometry.hpp"
#include "fewt/image.hpp"
#include "fewt/renderer.hpp"

namespace fewt::dataset {

// OpenGL-style pose: camera looks down -z, y up.
struct CameraModel {
    int width = 0;
    int height = 0;
    double camera_angle_x = 0.0;
    Mat4 camera_to_world = Mat4::identity();

    double focal() const;
    void validate() const;
};

struct PosedImage {
    CameraModel camera;
    img::Image image;
    std::string source_path;
};

struct Scene {
    std::vector<PosedImage> train;
    std::vector<PosedImage> val;
    std::vector<PosedImage> test;
};

struct LoadOptions {
    Vec3 background{1.0, 1.0, 1.0};
    int downscale = 1;
};

// Reads the transforms_{train,val,test}.json convention: top-level
// camera_angle_x plus frames[].{file_path, transform_matrix}. Missing val or
// test files yield empty splits; a missing train file is an error.
Scene load_scene(const std::string& root, const LoadOptions& options);

// Single split from an explicit transforms file.
std::vector<PosedImage> load_split(const std::string& root, const std::string& transforms_file,
                                   const LoadOptions& options);

// Pinhole ray through pixel center (u + 0.5, v + 0.5); u is the column index.
render::Ray generate_ray(const CameraModel& camera, int u, int v, double near, double far);

std::vector<render::Ray> generate_rays(const CameraModel& camera,
                                       std::span<const std::pair<int, int>> pixels, double near,
                                       double far);

// The 8-view blender split popularized by the few-shot lines of work; used as
// the default for NeRF-synthetic scenes and overridable in config.
inline constexpr std::array<int, 8> kBlenderFewShotViews{26, 86, 2, 55, 75, 93, 16, 73};

// Explicit ids are taken verbatim (and validated); otherwise `count` views are
// picked as an evenly spaced, seed-rotated spread over the split. count <= 0
// or count == size returns the whole split. selected_ids (when non-null)
// receives the chosen indices for the run manifest.
std::vector<PosedImage> few_shot_subset(const std::vector<PosedImage>& split,
                                        const std::vector<int>& explicit_ids, int count,
                                        std::uint64_t seed, std::vector<int>* selected_ids);

// ---- analytic oracle scenes ----

enum class AnalyticKind { Sphere, Boxes };

struct AnalyticField {
    std::function<double(const Vec3&)> density;
    std::function<Vec3(const Vec3&)> color;
    Aabb bounds;
};

// Sphere: density 50 inside radius 0.5 centered at the origin.
// Boxes: the sphere plus two axis-aligned boxes with distinct colors.
AnalyticField analytic_field(AnalyticKind kind);

struct AnalyticSceneSpec {
    AnalyticKind kind = AnalyticKind::Sphere;
    int resolution = 100;
    int train_views = 8;
    int test_views = 12;
    std::uint64_t seed = 0;
    int samples_per_ray = 1024;
    double near = 2.0;
    double far = 6.0;
    double ring_radius = 4.0;
    double camera_angle_x = 0.6911112;
    Vec3 background{1.0, 1.0, 1.0};
};

struct AnalyticScene {
    AnalyticField field;
    AnalyticSceneSpec spec;
    Scene scene;
};

// Midpoint quadrature against the analytic field, matching the renderer's
// compositing exactly.
Vec3 render_analytic(const AnalyticField& field, const render::Ray& ray, int n_samples,
                     const Vec3& background);

// Posed images rendered from a ring of cameras; deterministic for a fixed
// spec (the seed perturbs camera elevations and phases).
AnalyticScene make_analytic_scene(const AnalyticSceneSpec& spec);

// Writes transforms_train/test.json + PNGs in the NeRF-synthetic layout.
void save_scene(const std::string& dir, const Scene& scene, double camera_angle_x);

}  // namespace fewt::dataset
