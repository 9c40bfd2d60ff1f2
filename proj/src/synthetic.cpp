#include "mothpose/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "mothpose/errors.hpp"
#include "mothpose/image.hpp"
#include "mothpose/rng.hpp"

namespace mothpose {

namespace {

constexpr double kTau = 2.0 * std::numbers::pi;

// Blob markers in kLandmarkNames order: amplitude over the background and
// gaussian radii per axis. Distinct sizes, contrasts, and one dark marker
// keep the four visually separable.
struct MarkerShape {
    double amplitude, sigma_x, sigma_y;
};
constexpr MarkerShape kMarkers[4] = {
    {140.0, 14.0, 14.0}, // head: bright, round
    {110.0, 22.0, 14.0}, // abdomen: elongated along x
    {-105.0, 15.0, 15.0}, // left wing: dark
    {85.0, 11.0, 11.0},  // right wing: small, bright
};

// Body-relative landmark offsets at scale 1 (px).
constexpr double kOffsets[4][2] = {{88.0, -4.0}, {-80.0, 4.0}, {-6.0, -50.0}, {10.0, 50.0}};

double lerp(double a, double b, double t) { return a + (b - a) * t; }

// Position of a frame within the sequence, 0 at the start, 1 at the end.
double sequence_t(const SynthConfig& cfg, std::int64_t frame_id) {
    const double span = static_cast<double>(std::max<std::int64_t>(cfg.frame_count - 1, 1));
    return static_cast<double>(frame_id - 1) / span;
}

Tensor4 textured_background(const SynthConfig& cfg, std::int64_t frame_id) {
    Tensor4 img(1, 1, kNativeH, kNativeW);
    Rng phases = Rng::derive(cfg.rng_seed, static_cast<std::uint64_t>(frame_id) * 4 + 1);
    const double p1 = phases.uniform(0.0, kTau);
    const double p2 = phases.uniform(0.0, kTau);
    const std::uint64_t noise_key =
        cfg.rng_seed ^ (static_cast<std::uint64_t>(frame_id) * 0x9e3779b97f4a7c15ull);
    for (std::int64_t y = 0; y < kNativeH; ++y)
        for (std::int64_t x = 0; x < kNativeW; ++x) {
            const double fx = static_cast<double>(x);
            const double fy = static_cast<double>(y);
            double v = 100.0 + 22.0 * std::sin(kTau * (fx * 0.0103 + fy * 0.0041) + p1) +
                       16.0 * std::sin(kTau * (fy * 0.0117 - fx * 0.0059) + p2);
            v += Rng::derive(noise_key, static_cast<std::uint64_t>(y * kNativeW + x))
                     .uniform(-10.0, 10.0);
            img(0, 0, y, x) = v;
        }
    return img;
}

void clamp_to_byte_range(Tensor4& img) {
    for (auto& v : img.flat()) v = std::clamp(v, 0.0, 255.0);
}

void add_markers(const SynthConfig& cfg, const AnnotatedFrame& frame, Tensor4& img) {
    const double t = sequence_t(cfg, frame.frame_id);
    const double growth = lerp(1.0, cfg.marker_growth, t);
    const double fade = lerp(1.0, cfg.marker_fade, t);
    for (int l = 0; l < 4; ++l) {
        const MarkerShape& m = kMarkers[l];
        const double sx = m.sigma_x * growth;
        const double sy = m.sigma_y * growth;
        const double amp = m.amplitude * fade;
        const double cx = frame.landmark_x(l);
        const double cy = frame.landmark_y(l);
        const std::int64_t x0 = std::max<std::int64_t>(0, std::llround(cx - 4.0 * sx));
        const std::int64_t x1 = std::min<std::int64_t>(kNativeW - 1, std::llround(cx + 4.0 * sx));
        const std::int64_t y0 = std::max<std::int64_t>(0, std::llround(cy - 4.0 * sy));
        const std::int64_t y1 = std::min<std::int64_t>(kNativeH - 1, std::llround(cy + 4.0 * sy));
        for (std::int64_t y = y0; y <= y1; ++y)
            for (std::int64_t x = x0; x <= x1; ++x) {
                const double dx = (static_cast<double>(x) - cx) / sx;
                const double dy = (static_cast<double>(y) - cy) / sy;
                img(0, 0, y, x) += amp * std::exp(-0.5 * (dx * dx + dy * dy));
            }
    }
}

} // namespace

std::vector<AnnotatedFrame> synth_annotations(const SynthConfig& cfg) {
    if (cfg.frame_count < 1) throw SizeError("frame_count must be >= 1");
    std::vector<AnnotatedFrame> frames;
    frames.reserve(static_cast<std::size_t>(cfg.frame_count));
    for (std::int64_t i = 1; i <= cfg.frame_count; ++i) {
        const double t = sequence_t(cfg, i);
        Rng jitter = Rng::derive(cfg.rng_seed, static_cast<std::uint64_t>(i) * 4 + 2);

        AnnotatedFrame frame;
        frame.frame_id = i;
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%04lld.pgm", static_cast<long long>(i));
        frame.image_ref = name;

        const double scale = lerp(cfg.body_scale_start, cfg.body_scale_end, t);
        const double cx = 400.0 + 105.0 * std::sin(kTau * t * 1.4) +
                          jitter.uniform(-cfg.center_jitter, cfg.center_jitter);
        const double cy = 300.0 + 68.0 * std::sin(kTau * t * 0.9 + 1.1) +
                          jitter.uniform(-cfg.center_jitter, cfg.center_jitter);
        for (int l = 0; l < 4; ++l) {
            const double jx = jitter.uniform(-cfg.landmark_jitter, cfg.landmark_jitter);
            const double jy = jitter.uniform(-cfg.landmark_jitter, cfg.landmark_jitter);
            frame.landmarks[static_cast<std::size_t>(2 * l)] = cx + scale * kOffsets[l][0] + jx;
            frame.landmarks[static_cast<std::size_t>(2 * l + 1)] = cy + scale * kOffsets[l][1] + jy;
        }

        // Box around the marker mass: landmark extent plus 2.5 sigma of the
        // largest (grown) marker per axis, kept >= 1 px inside the frame.
        const double growth = lerp(1.0, cfg.marker_growth, t);
        double pad_x = 0.0, pad_y = 0.0;
        for (const MarkerShape& m : kMarkers) {
            pad_x = std::max(pad_x, 2.5 * m.sigma_x * growth);
            pad_y = std::max(pad_y, 2.5 * m.sigma_y * growth);
        }
        double min_x = frame.landmark_x(0), max_x = min_x;
        double min_y = frame.landmark_y(0), max_y = min_y;
        for (int l = 1; l < 4; ++l) {
            min_x = std::min(min_x, frame.landmark_x(l));
            max_x = std::max(max_x, frame.landmark_x(l));
            min_y = std::min(min_y, frame.landmark_y(l));
            max_y = std::max(max_y, frame.landmark_y(l));
        }
        frame.bbox_x = std::max(1.0, min_x - pad_x);
        frame.bbox_y = std::max(1.0, min_y - pad_y);
        frame.bbox_w = std::min(static_cast<double>(kNativeW - 2), max_x + pad_x) - frame.bbox_x;
        frame.bbox_h = std::min(static_cast<double>(kNativeH - 2), max_y + pad_y) - frame.bbox_y;

        if (cfg.occlude_every > 0 && i % cfg.occlude_every == 0)
            frame.occluded[static_cast<std::size_t>((i / cfg.occlude_every) % 4)] = true;
        frames.push_back(frame);
    }
    return frames;
}

Tensor4 render_background(const SynthConfig& cfg, const AnnotatedFrame& frame) {
    Tensor4 img = textured_background(cfg, frame.frame_id);
    clamp_to_byte_range(img);
    return img;
}

Tensor4 render_frame(const SynthConfig& cfg, const AnnotatedFrame& frame) {
    Tensor4 img = textured_background(cfg, frame.frame_id);
    add_markers(cfg, frame, img);
    clamp_to_byte_range(img);
    return img;
}

ImageLoader render_loader(const SynthConfig& cfg) {
    return [cfg](const AnnotatedFrame& frame) { return render_frame(cfg, frame); };
}

std::vector<AnnotatedFrame> write_synth_dataset(const SynthConfig& cfg,
                                                const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const std::vector<AnnotatedFrame> frames = synth_annotations(cfg);
    for (const AnnotatedFrame& frame : frames)
        write_image(render_frame(cfg, frame), dir / frame.image_ref);
    save_annotations(frames, dir / "annotations.csv");
    return frames;
}

TwoViewFixture synth_two_view_track(std::int64_t frame_count, std::uint64_t seed) {
    if (frame_count < 1) throw SizeError("frame_count must be >= 1");
    TwoViewFixture fixture;

    // Camera 1 at the origin looking down +z; camera 2 translated and
    // rotated about y so the views converge on the track volume.
    const double focal = 700.0;
    const auto make_camera = [&](const double r[3][3], const double c[3], const char* id) {
        CameraModel cam;
        cam.camera_id = id;
        // Left 3x3 = K R with K = [[f,0,400],[0,f,300],[0,0,1]].
        for (int col = 0; col < 3; ++col) {
            cam.at(0, col) = focal * r[0][col] + 400.0 * r[2][col];
            cam.at(1, col) = focal * r[1][col] + 300.0 * r[2][col];
            cam.at(2, col) = r[2][col];
        }
        // Fourth column = -(K R) c, placing the optical center at c.
        for (int row = 0; row < 3; ++row) {
            double s = 0.0;
            for (int k = 0; k < 3; ++k) s += cam.at(row, k) * c[k];
            cam.at(row, 3) = -s;
        }
        return cam;
    };
    const double identity[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    const double origin[3] = {0, 0, 0};
    fixture.cam1 = make_camera(identity, origin, "cam1");
    const double theta = -20.0 * std::numbers::pi / 180.0;
    const double rot_y[3][3] = {{std::cos(theta), 0, std::sin(theta)},
                                {0, 1, 0},
                                {-std::sin(theta), 0, std::cos(theta)}};
    const double center2[3] = {30.0, 2.0, 4.0};
    fixture.cam2 = make_camera(rot_y, center2, "cam2");

    Rng rng(seed);
    const double phase = rng.uniform(0.0, kTau);
    for (std::int64_t i = 1; i <= frame_count; ++i) {
        const double t = static_cast<double>(i - 1) /
                         static_cast<double>(std::max<std::int64_t>(frame_count - 1, 1));
        const double wx = 2.0 * std::sin(kTau * t * 0.7 + phase);
        const double wy = 1.5 * std::sin(kTau * t * 1.1 + 0.4);
        const double wz = 55.0 + 6.0 * std::sin(kTau * t * 0.5 + phase * 0.5);
        const double yaw = 0.6 * std::sin(kTau * t + phase);
        const double offsets[4][3] = {
            {2.2, 0.0, 0.2}, {-2.0, 0.0, -0.2}, {0.0, -1.8, 0.3}, {0.0, 1.8, 0.3}};

        Pose3D pose;
        pose.time_index = i;
        std::array<double, 8> v1{}, v2{};
        for (int l = 0; l < 4; ++l) {
            const double ox = offsets[l][0] * std::cos(yaw) - offsets[l][1] * std::sin(yaw);
            const double oy = offsets[l][0] * std::sin(yaw) + offsets[l][1] * std::cos(yaw);
            const std::array<double, 3> p = {wx + ox, wy + oy, wz + offsets[l][2]};
            pose.points[static_cast<std::size_t>(l)] = {p, 0.0, true};
            const std::array<double, 2> q1 = reproject(p, fixture.cam1);
            const std::array<double, 2> q2 = reproject(p, fixture.cam2);
            v1[static_cast<std::size_t>(2 * l)] = q1[0];
            v1[static_cast<std::size_t>(2 * l + 1)] = q1[1];
            v2[static_cast<std::size_t>(2 * l)] = q2[0];
            v2[static_cast<std::size_t>(2 * l + 1)] = q2[1];
        }
        fixture.gt_poses.push_back(pose);
        fixture.view1.push_back(v1);
        fixture.view2.push_back(v2);
    }
    return fixture;
}

} // namespace mothpose
