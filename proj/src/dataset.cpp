#include "fewt/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "fewt/io.hpp"
#include "fewt/rng.hpp"
#include "fewt/threading.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace fewt::dataset {

double CameraModel::focal() const { return 0.5 * width / std::tan(0.5 * camera_angle_x); }

void CameraModel::validate() const {
    if (width < 1 || height < 1) throw std::invalid_argument("camera must have positive size");
    if (!(camera_angle_x > 0.0 && camera_angle_x < 3.14159265358979))
        throw std::invalid_argument("camera_angle_x must be in (0, pi)");
    // Rotation block orthonormality within 1e-4.
    for (int c = 0; c < 3; ++c) {
        Vec3 col{camera_to_world.at(0, c), camera_to_world.at(1, c), camera_to_world.at(2, c)};
        if (std::abs(norm(col) - 1.0) > 1e-4)
            throw std::invalid_argument("camera pose rotation is not orthonormal");
        for (int c2 = c + 1; c2 < 3; ++c2) {
            Vec3 col2{camera_to_world.at(0, c2), camera_to_world.at(1, c2),
                      camera_to_world.at(2, c2)};
            if (std::abs(dot(col, col2)) > 1e-4)
                throw std::invalid_argument("camera pose rotation is not orthonormal");
        }
    }
}

std::vector<PosedImage> load_split(const std::string& root, const std::string& transforms_file,
                                   const LoadOptions& options) {
    fs::path tf = fs::path(root) / transforms_file;
    json doc;
    try {
        doc = json::parse(io::read_file(tf.string()));
    } catch (const json::parse_error& e) {
        throw std::runtime_error("malformed JSON in " + tf.string() + ": " + e.what());
    }
    if (!doc.contains("camera_angle_x") || !doc.contains("frames"))
        throw std::runtime_error(tf.string() + ": missing camera_angle_x or frames");
    double angle = doc["camera_angle_x"].get<double>();

    const auto& frames = doc["frames"];
    std::vector<PosedImage> out(frames.size());

    parallel_blocks(frames.size(), 1, worker_count(0),
                    [&](std::size_t idx, std::size_t, std::size_t, int) {
        const auto& frame = frames[idx];
        std::string file_path = frame.at("file_path").get<std::string>();
        fs::path img_path = fs::path(root) / file_path;
        if (!img_path.has_extension()) img_path += ".png";

        PosedImage pi;
        pi.source_path = img_path.string();
        pi.image = img::read_png(img_path.string(), options.background);
        if (options.downscale > 1) pi.image = img::downscale(pi.image, options.downscale);

        const auto& mat = frame.at("transform_matrix");
        if (mat.size() != 4)
            throw std::runtime_error(img_path.string() + ": transform_matrix must be 4x4");
        for (int r = 0; r < 4; ++r) {
            if (mat[static_cast<size_t>(r)].size() != 4)
                throw std::runtime_error(img_path.string() + ": transform_matrix must be 4x4");
            for (int c = 0; c < 4; ++c)
                pi.camera.camera_to_world.at(r, c) =
                    mat[static_cast<size_t>(r)][static_cast<size_t>(c)].get<double>();
        }
        pi.camera.width = pi.image.width;
        pi.camera.height = pi.image.height;
        pi.camera.camera_angle_x = angle;
        pi.camera.validate();
        out[idx] = std::move(pi);
    });

    // Consistent sizes across the split.
    for (const auto& pi : out) {
        if (pi.image.width != out.front().image.width ||
            pi.image.height != out.front().image.height)
            throw std::runtime_error(pi.source_path + ": image size differs within split");
    }
    return out;
}

Scene load_scene(const std::string& root, const LoadOptions& options) {
    Scene scene;
    scene.train = load_split(root, "transforms_train.json", options);
    if (fs::exists(fs::path(root) / "transforms_val.json"))
        scene.val = load_split(root, "transforms_val.json", options);
    if (fs::exists(fs::path(root) / "transforms_test.json"))
        scene.test = load_split(root, "transforms_test.json", options);
    return scene;
}

render::Ray generate_ray(const CameraModel& camera, int u, int v, double near, double far) {
    double f = camera.focal();
    Vec3 dir_cam{(u + 0.5 - camera.width / 2.0) / f, -(v + 0.5 - camera.height / 2.0) / f, -1.0};
    render::Ray ray;
    ray.direction = normalized(camera.camera_to_world.rotate(dir_cam));
    ray.origin = camera.camera_to_world.translation();
    ray.near = near;
    ray.far = far;
    return ray;
}

std::vector<render::Ray> generate_rays(const CameraModel& camera,
                                       std::span<const std::pair<int, int>> pixels, double near,
                                       double far) {
    std::vector<render::Ray> rays;
    rays.reserve(pixels.size());
    for (const auto& [u, v] : pixels) {
        if (u < 0 || u >= camera.width || v < 0 || v >= camera.height)
            throw std::out_of_range("pixel index outside image bounds");
        rays.push_back(generate_ray(camera, u, v, near, far));
    }
    return rays;
}

std::vector<PosedImage> few_shot_subset(const std::vector<PosedImage>& split,
                                        const std::vector<int>& explicit_ids, int count,
                                        std::uint64_t seed, std::vector<int>* selected_ids) {
    std::vector<int> ids;
    if (!explicit_ids.empty()) {
        for (int id : explicit_ids) {
            if (id < 0 || id >= static_cast<int>(split.size()))
                throw std::out_of_range("few-shot view id " + std::to_string(id) +
                                        " outside split of size " + std::to_string(split.size()));
            ids.push_back(id);
        }
    } else if (count <= 0 || count >= static_cast<int>(split.size())) {
        if (count > static_cast<int>(split.size()))
            throw std::out_of_range("few-shot count exceeds available views");
        ids.resize(split.size());
        for (std::size_t i = 0; i < split.size(); ++i) ids[i] = static_cast<int>(i);
    } else {
        // Evenly spaced spread with a seeded rotation.
        Rng rng(seed);
        double phase = rng.uniform();
        double step = static_cast<double>(split.size()) / count;
        for (int j = 0; j < count; ++j) {
            int id = static_cast<int>(std::floor(std::fmod((j + phase) * step,
                                                           static_cast<double>(split.size()))));
            ids.push_back(id);
        }
        std::sort(ids.begin(), ids.end());
        ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
        // Collisions are only possible from fmod wraparound; backfill keeps
        // the count exact.
        for (std::size_t i = 0; ids.size() < static_cast<std::size_t>(count) && i < split.size();
             ++i) {
            int id = static_cast<int>(i);
            if (!std::binary_search(ids.begin(), ids.end(), id)) {
                ids.insert(std::upper_bound(ids.begin(), ids.end(), id), id);
            }
        }
    }
    std::vector<PosedImage> out;
    out.reserve(ids.size());
    for (int id : ids) out.push_back(split[static_cast<size_t>(id)]);
    if (selected_ids) *selected_ids = ids;
    return out;
}

AnalyticField analytic_field(AnalyticKind kind) {
    AnalyticField field;
    field.bounds = {{-1.5, -1.5, -1.5}, {1.5, 1.5, 1.5}};

    auto sphere_density = [](const Vec3& p, const Vec3& center, double radius) {
        Vec3 d = p - center;
        return dot(d, d) < radius * radius ? 50.0 : 0.0;
    };
    auto in_box = [](const Vec3& p, const Vec3& lo, const Vec3& hi) {
        return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y && p.z >= lo.z &&
               p.z <= hi.z;
    };
    // Smooth positional tint so appearance has learnable low/mid frequencies.
    auto tint = [](const Vec3& p, const Vec3& base) {
        Vec3 c{base.x * (0.75 + 0.25 * std::sin(4.0 * p.x + 2.0 * p.y)),
               base.y * (0.75 + 0.25 * std::sin(4.0 * p.y + 2.0 * p.z)),
               base.z * (0.75 + 0.25 * std::sin(4.0 * p.z + 2.0 * p.x))};
        return Vec3{std::clamp(c.x, 0.0, 1.0), std::clamp(c.y, 0.0, 1.0),
                    std::clamp(c.z, 0.0, 1.0)};
    };

    if (kind == AnalyticKind::Sphere) {
        field.density = [=](const Vec3& p) { return sphere_density(p, {0, 0, 0}, 0.5); };
        field.color = [=](const Vec3& p) { return tint(p, {0.9, 0.55, 0.25}); };
        return field;
    }

    // Sphere plus two boxes, mutually occluding from most ring viewpoints.
    const Vec3 sphere_c{-0.45, 0.1, 0.0};
    const Vec3 box1_lo{0.05, -0.55, -0.45}, box1_hi{0.85, 0.25, 0.35};
    const Vec3 box2_lo{-0.25, -0.2, 0.45}, box2_hi{0.35, 0.4, 0.95};
    field.density = [=](const Vec3& p) {
        if (sphere_density(p, sphere_c, 0.45) > 0.0) return 50.0;
        if (in_box(p, box1_lo, box1_hi)) return 50.0;
        if (in_box(p, box2_lo, box2_hi)) return 50.0;
        return 0.0;
    };
    field.color = [=](const Vec3& p) {
        if (sphere_density(p, sphere_c, 0.45) > 0.0) return tint(p, {0.9, 0.45, 0.2});
        if (in_box(p, box1_lo, box1_hi)) return tint(p, {0.25, 0.45, 0.9});
        if (in_box(p, box2_lo, box2_hi)) return tint(p, {0.3, 0.85, 0.35});
        return Vec3{0.0, 0.0, 0.0};
    };
    return field;
}

Vec3 render_analytic(const AnalyticField& field, const render::Ray& ray, int n_samples,
                     const Vec3& background) {
    Rng unused(0);
    std::vector<double> ts, deltas;
    if (!render::sample_ray(ray, field.bounds, n_samples, false, unused, ts, deltas))
        return background;
    render::SampleSet samples;
    samples.t = ts;
    samples.delta = deltas;
    samples.sigma.resize(ts.size());
    samples.color.resize(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) {
        Vec3 x = ray.origin + ray.direction * ts[i];
        samples.sigma[i] = field.density(x);
        samples.color[i] = field.color(x);
    }
    return render::composite(samples, background).color;
}

namespace {

Mat4 look_at_pose(const Vec3& eye, const Vec3& target, const Vec3& up_hint) {
    Vec3 backward = normalized(eye - target);  // camera +z
    Vec3 right = normalized(cross(up_hint, backward));
    Vec3 up = cross(backward, right);
    Mat4 m = Mat4::identity();
    for (int r = 0; r < 3; ++r) {
        m.at(r, 0) = right[r];
        m.at(r, 1) = up[r];
        m.at(r, 2) = backward[r];
        m.at(r, 3) = eye[r];
    }
    return m;
}

PosedImage render_view(const AnalyticField& field, const AnalyticSceneSpec& spec,
                       const Mat4& pose) {
    PosedImage pi;
    pi.camera.width = spec.resolution;
    pi.camera.height = spec.resolution;
    pi.camera.camera_angle_x = spec.camera_angle_x;
    pi.camera.camera_to_world = pose;
    pi.image = img::Image(spec.resolution, spec.resolution);

    parallel_blocks(static_cast<std::size_t>(spec.resolution), 1, worker_count(0),
                    [&](std::size_t v, std::size_t, std::size_t, int) {
                        for (int u = 0; u < spec.resolution; ++u) {
                            render::Ray ray = generate_ray(pi.camera, u, static_cast<int>(v),
                                                           spec.near, spec.far);
                            Vec3 c = render_analytic(field, ray, spec.samples_per_ray,
                                                     spec.background);
                            for (int ch = 0; ch < 3; ++ch)
                                pi.image.at(u, static_cast<int>(v), ch) =
                                    static_cast<float>(c[ch]);
                        }
                    });
    return pi;
}

}  // namespace

AnalyticScene make_analytic_scene(const AnalyticSceneSpec& spec) {
    AnalyticScene out;
    out.field = analytic_field(spec.kind);
    out.spec = spec;

    Rng rng(spec.seed);
    const double two_pi = 6.283185307179586;
    double train_phase = rng.uniform() * two_pi;
    double test_phase = train_phase + two_pi / (2.0 * std::max(1, spec.train_views));

    auto make_views = [&](int count, double phase, std::vector<PosedImage>& dst) {
        for (int i = 0; i < count; ++i) {
            double az = phase + two_pi * i / std::max(1, count);
            double elev = 0.35 + 0.25 * rng.uniform();  // radians above the equator
            Vec3 eye{spec.ring_radius * std::cos(az) * std::cos(elev),
                     spec.ring_radius * std::sin(az) * std::cos(elev),
                     spec.ring_radius * std::sin(elev)};
            Mat4 pose = look_at_pose(eye, {0, 0, 0}, {0, 0, 1});
            dst.push_back(render_view(out.field, spec, pose));
        }
    };
    make_views(spec.train_views, train_phase, out.scene.train);
    make_views(spec.test_views, test_phase, out.scene.test);
    return out;
}

void save_scene(const std::string& dir, const Scene& scene, double camera_angle_x) {
    auto write_split = [&](const std::vector<PosedImage>& split, const std::string& name) {
        if (split.empty()) return;
        fs::create_directories(fs::path(dir) / name);
        json doc;
        doc["camera_angle_x"] = camera_angle_x;
        doc["frames"] = json::array();
        for (std::size_t i = 0; i < split.size(); ++i) {
            std::string rel = "./" + name + "/r_" + std::to_string(i);
            json frame;
            frame["file_path"] = rel;
            json mat = json::array();
            for (int r = 0; r < 4; ++r) {
                json row = json::array();
                for (int c = 0; c < 4; ++c) row.push_back(split[i].camera.camera_to_world.at(r, c));
                mat.push_back(row);
            }
            frame["transform_matrix"] = mat;
            doc["frames"].push_back(frame);
            img::write_png((fs::path(dir) / (rel + ".png")).lexically_normal().string(),
                           split[i].image);
        }
        io::atomic_write((fs::path(dir) / ("transforms_" + name + ".json")).string(),
                         doc.dump(2) + "\n");
    };
    fs::create_directories(dir);
    write_split(scene.train, "train");
    write_split(scene.val, "val");
    write_split(scene.test, "test");
}

}  // namespace fewt::dataset
