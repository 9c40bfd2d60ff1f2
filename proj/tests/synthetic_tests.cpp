#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "mothpose/image.hpp"
#include "mothpose/synthetic.hpp"

using namespace mothpose;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* name) {
    const fs::path dir = fs::temp_directory_path() / "mothpose_synth_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

double landmark_distance(const AnnotatedFrame& f, int a, int b) {
    return std::hypot(f.landmark_x(a) - f.landmark_x(b), f.landmark_y(a) - f.landmark_y(b));
}

} // namespace

TEST_CASE("synthetic annotations are deterministic and stay croppable") {
    SynthConfig cfg;
    const auto frames = synth_annotations(cfg);
    REQUIRE(frames.size() == 200);
    const auto again = synth_annotations(cfg);
    const CropSpec default_crop;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const AnnotatedFrame& f = frames[i];
        CHECK(f.frame_id == static_cast<std::int64_t>(i) + 1);
        CHECK(f.landmarks == again[i].landmarks);

        // Boxes stay at least 1 px inside the frame (an edge-touching box
        // leaves no room for the half-pixel crop margin).
        CHECK(f.bbox_x >= 1.0);
        CHECK(f.bbox_y >= 1.0);
        CHECK(f.bbox_x + f.bbox_w <= kNativeW - 1.0);
        CHECK(f.bbox_y + f.bbox_h <= kNativeH - 1.0);

        // Landmarks inside the box, and the default 600x400 crop feasible.
        for (int l = 0; l < 4; ++l) {
            CHECK(f.landmark_x(l) >= f.bbox_x);
            CHECK(f.landmark_x(l) <= f.bbox_x + f.bbox_w);
            CHECK(f.landmark_y(l) >= f.bbox_y);
            CHECK(f.landmark_y(l) <= f.bbox_y + f.bbox_h);
        }
        CHECK(feasible_crop_window(f, default_crop).ok());
    }

    SynthConfig other = cfg;
    other.rng_seed = 2;
    CHECK(synth_annotations(other)[0].landmarks != frames[0].landmarks);
}

TEST_CASE("rendering is deterministic with byte-range values") {
    SynthConfig cfg;
    cfg.frame_count = 5;
    const auto frames = synth_annotations(cfg);
    const Tensor4 img = render_frame(cfg, frames[2]);
    CHECK(img.n() == 1);
    CHECK(img.c() == 1);
    CHECK(img.h() == 600);
    CHECK(img.w() == 800);
    CHECK(img == render_frame(cfg, frames[2]));
    double lo = 1e9, hi = -1e9;
    for (double v : img.flat()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    CHECK(lo >= 0.0);
    CHECK(hi <= 255.0);
    CHECK(hi - lo > 100.0); // textured, not flat
}

TEST_CASE("markers rise above the rendered background exactly at the landmarks") {
    SynthConfig cfg;
    cfg.frame_count = 10;
    const auto frames = synth_annotations(cfg);
    const AnnotatedFrame& f = frames[0];
    const Tensor4 img = render_frame(cfg, f);
    const Tensor4 bg = render_background(cfg, f);

    // Head (bright): strong positive difference at the landmark.
    const auto head_y = static_cast<std::int64_t>(std::llround(f.landmark_y(0)));
    const auto head_x = static_cast<std::int64_t>(std::llround(f.landmark_x(0)));
    CHECK(img.at(0, 0, head_y, head_x) - bg.at(0, 0, head_y, head_x) > 80.0);

    // Left wing (dark): negative difference.
    const auto lw_y = static_cast<std::int64_t>(std::llround(f.landmark_y(2)));
    const auto lw_x = static_cast<std::int64_t>(std::llround(f.landmark_x(2)));
    CHECK(img.at(0, 0, lw_y, lw_x) - bg.at(0, 0, lw_y, lw_x) < -40.0);

    // Far corner: no marker reaches it.
    CHECK(img.at(0, 0, 3, 3) == bg.at(0, 0, 3, 3));
}

TEST_CASE("marker centroids in the difference image match the annotations") {
    SynthConfig cfg;
    cfg.frame_count = 40;
    const auto frames = synth_annotations(cfg);
    for (const std::size_t idx : {std::size_t{0}, std::size_t{19}, std::size_t{39}}) {
        const AnnotatedFrame& f = frames[idx];
        const Tensor4 img = render_frame(cfg, f);
        const Tensor4 bg = render_background(cfg, f);
        std::array<double, 4> wsum{}, xsum{}, ysum{};
        for (std::int64_t y = 0; y < kNativeH; ++y)
            for (std::int64_t x = 0; x < kNativeW; ++x) {
                const double d = std::abs(img.at(0, 0, y, x) - bg.at(0, 0, y, x));
                if (d < 15.0) continue;
                int nearest = 0;
                double best = 1e18;
                for (int l = 0; l < 4; ++l) {
                    const double dist = std::hypot(static_cast<double>(x) - f.landmark_x(l),
                                                   static_cast<double>(y) - f.landmark_y(l));
                    if (dist < best) {
                        best = dist;
                        nearest = l;
                    }
                }
                wsum[static_cast<std::size_t>(nearest)] += d;
                xsum[static_cast<std::size_t>(nearest)] += d * static_cast<double>(x);
                ysum[static_cast<std::size_t>(nearest)] += d * static_cast<double>(y);
            }
        for (int l = 0; l < 4; ++l) {
            REQUIRE(wsum[static_cast<std::size_t>(l)] > 0.0);
            const double cx = xsum[static_cast<std::size_t>(l)] / wsum[static_cast<std::size_t>(l)];
            const double cy = ysum[static_cast<std::size_t>(l)] / wsum[static_cast<std::size_t>(l)];
            CHECK(std::hypot(cx - f.landmark_x(l), cy - f.landmark_y(l)) < 1.5);
        }
    }
}

TEST_CASE("the sequence drifts in marker mass and body scale") {
    SynthConfig cfg;
    const auto frames = synth_annotations(cfg);

    const auto marker_mass = [&](const AnnotatedFrame& f) {
        const Tensor4 img = render_frame(cfg, f);
        const Tensor4 bg = render_background(cfg, f);
        double mass = 0.0;
        for (std::size_t i = 0; i < img.flat().size(); ++i)
            mass += std::abs(img.flat()[i] - bg.flat()[i]);
        return mass;
    };
    // Growth 1.25 (area x1.56) against fade 0.85 still raises the total mass.
    CHECK(marker_mass(frames.back()) > 1.15 * marker_mass(frames.front()));

    // Body scale drift: head-to-abdomen spacing grows front to back.
    CHECK(landmark_distance(frames.back(), 0, 1) > landmark_distance(frames.front(), 0, 1));
}

TEST_CASE("occlusion flags appear on the configured cadence") {
    SynthConfig cfg;
    cfg.frame_count = 40;
    cfg.occlude_every = 10;
    const auto frames = synth_annotations(cfg);
    int flagged = 0;
    for (const auto& f : frames) {
        const int count = static_cast<int>(f.occluded[0]) + static_cast<int>(f.occluded[1]) +
                          static_cast<int>(f.occluded[2]) + static_cast<int>(f.occluded[3]);
        if (f.frame_id % 10 == 0) {
            CHECK(count == 1);
            ++flagged;
        } else {
            CHECK(count == 0);
        }
    }
    CHECK(flagged == 4);

    SynthConfig off;
    off.frame_count = 40;
    for (const auto& f : synth_annotations(off)) CHECK_FALSE(f.any_occluded());
}

TEST_CASE("write_synth_dataset produces loadable frames and annotations") {
    const fs::path dir = temp_dir("dataset");
    SynthConfig cfg;
    cfg.frame_count = 3;
    const auto frames = write_synth_dataset(cfg, dir);
    REQUIRE(frames.size() == 3);
    CHECK(fs::exists(dir / "frame_0001.pgm"));
    CHECK(fs::exists(dir / "frame_0003.pgm"));

    const auto loaded = load_annotations(dir / "annotations.csv");
    REQUIRE(loaded.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(loaded[i].landmarks == frames[i].landmarks);
        CHECK(loaded[i].image_ref == frames[i].image_ref);
    }

    // The stored image is the render, 8-bit quantized.
    const Tensor4 disk = read_image(dir / frames[1].image_ref);
    const Tensor4 fresh = render_frame(cfg, frames[1]);
    REQUIRE(disk.h() == fresh.h());
    double worst = 0.0;
    for (std::size_t i = 0; i < disk.flat().size(); ++i)
        worst = std::max(worst, std::abs(disk.flat()[i] - fresh.flat()[i]));
    CHECK(worst <= 0.5);
}

TEST_CASE("the two-view fixture is self-consistent") {
    const TwoViewFixture fix = synth_two_view_track(30, 5);
    REQUIRE(fix.gt_poses.size() == 30);
    REQUIRE(fix.view1.size() == 30);

    const auto c1 = camera_center(fix.cam1);
    const auto c2 = camera_center(fix.cam2);
    CHECK(std::abs(c1[0]) < 1e-9);
    CHECK(std::abs(c1[2]) < 1e-9);
    CHECK(c2[0] == doctest::Approx(30.0).epsilon(1e-9));
    CHECK(c2[2] == doctest::Approx(4.0).epsilon(1e-9));

    for (const std::size_t i : {std::size_t{0}, std::size_t{14}, std::size_t{29}}) {
        for (int l = 0; l < 4; ++l) {
            const PosePoint& gt = fix.gt_poses[i].points[static_cast<std::size_t>(l)];
            REQUIRE(gt.valid);
            const std::array<double, 2> p1 = {fix.view1[i][static_cast<std::size_t>(2 * l)],
                                              fix.view1[i][static_cast<std::size_t>(2 * l + 1)]};
            const std::array<double, 2> p2 = {fix.view2[i][static_cast<std::size_t>(2 * l)],
                                              fix.view2[i][static_cast<std::size_t>(2 * l + 1)]};
            const auto x = triangulate(p1, p2, fix.cam1, fix.cam2);
            CHECK(std::hypot(x[0] - gt.position[0], x[1] - gt.position[1]) +
                      std::abs(x[2] - gt.position[2]) <
                  1e-6);

            // Projections land in a plausible image area for both views.
            CHECK(p1[0] > 0.0);
            CHECK(p1[0] < 800.0);
            CHECK(p1[1] > 0.0);
            CHECK(p1[1] < 600.0);
        }
    }
}
