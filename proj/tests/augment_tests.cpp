#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "mothpose/augment.hpp"
#include "mothpose/errors.hpp"

using namespace mothpose;

namespace {

// A frame whose landmarks sit at least 20 px inside the body bbox, so
// markers stamped on the landmarks survive every transform uncut.
AnnotatedFrame demo_frame(std::int64_t id = 1) {
    AnnotatedFrame f;
    f.frame_id = id;
    f.landmarks = {400, 250, 380, 340, 300, 280, 500, 285};
    f.bbox_x = 280;
    f.bbox_y = 230;
    f.bbox_w = 240;
    f.bbox_h = 130;
    return f;
}

Tensor4 ramp_image(std::int64_t salt = 0) {
    Tensor4 img(1, 1, kNativeH, kNativeW);
    for (std::int64_t y = 0; y < kNativeH; ++y)
        for (std::int64_t x = 0; x < kNativeW; ++x)
            img(0, 0, y, x) = static_cast<double>((x * 7 + y * 13 + salt * 31) % 256);
    return img;
}

// Background 20 with a gaussian bump (sigma 4, amplitude 220) on each
// landmark.
Tensor4 marker_image(const AnnotatedFrame& f) {
    Tensor4 img(1, 1, kNativeH, kNativeW);
    for (auto& v : img.flat()) v = 20.0;
    for (int k = 0; k < 4; ++k) {
        const double mx = f.landmark_x(k), my = f.landmark_y(k);
        for (std::int64_t y = std::llround(my) - 14; y <= std::llround(my) + 14; ++y)
            for (std::int64_t x = std::llround(mx) - 14; x <= std::llround(mx) + 14; ++x) {
                const double r2 = (x - mx) * (x - mx) + (y - my) * (y - my);
                img(0, 0, y, x) += 220.0 * std::exp(-r2 / (2.0 * 16.0));
            }
    }
    return img;
}

bool same_sample(const Sample& a, const Sample& b) {
    return a.frame_id == b.frame_id && a.crop == b.crop && a.label == b.label &&
           a.image == b.image;
}

// Intensity centroid of the pixels belonging (by nearest expected landmark)
// to landmark k, background subtracted.
std::array<double, 2> marker_centroid(const Sample& s, int k) {
    double wsum = 0.0, xsum = 0.0, ysum = 0.0;
    for (std::int64_t y = 0; y < s.image.h(); ++y)
        for (std::int64_t x = 0; x < s.image.w(); ++x) {
            const double v = s.image.at(0, 0, y, x) - 20.0;
            if (v < 25.0) continue;
            int nearest = 0;
            double best = 1e30;
            for (int j = 0; j < 4; ++j) {
                const double dx = static_cast<double>(x) - s.label[static_cast<std::size_t>(2 * j)];
                const double dy =
                    static_cast<double>(y) - s.label[static_cast<std::size_t>(2 * j + 1)];
                const double d = dx * dx + dy * dy;
                if (d < best) {
                    best = d;
                    nearest = j;
                }
            }
            if (nearest != k) continue;
            wsum += v;
            xsum += v * static_cast<double>(x);
            ysum += v * static_cast<double>(y);
        }
    REQUIRE(wsum > 0.0);
    return {xsum / wsum, ysum / wsum};
}

void check_labels_match_markers(const Sample& s) {
    for (int k = 0; k < 4; ++k) {
        const auto c = marker_centroid(s, k);
        const double dx = c[0] - s.label[static_cast<std::size_t>(2 * k)];
        const double dy = c[1] - s.label[static_cast<std::size_t>(2 * k + 1)];
        CHECK(std::sqrt(dx * dx + dy * dy) <= 1.0);
    }
}

void check_contained(const Sample& s) {
    for (int k = 0; k < 4; ++k) {
        CHECK(s.label[static_cast<std::size_t>(2 * k)] >= 0.0);
        CHECK(s.label[static_cast<std::size_t>(2 * k)] < 224.0);
        CHECK(s.label[static_cast<std::size_t>(2 * k + 1)] >= 0.0);
        CHECK(s.label[static_cast<std::size_t>(2 * k + 1)] < 224.0);
    }
}

} // namespace

TEST_CASE("landmark (400,300) in a crop at (100,100) maps to (112,112)") {
    CropSpec crop;
    crop.origin_x = 100;
    crop.origin_y = 100;
    std::array<double, 8> pts{};
    pts[0] = 400;
    pts[1] = 300;
    const auto mapped = transform_landmarks(pts, crop);
    CHECK(mapped[0] == 112.0);
    CHECK(mapped[1] == 112.0);
}

TEST_CASE("pre-crop rotation turns landmarks about the recorded center") {
    CropSpec crop;
    crop.center_x = 400;
    crop.center_y = 300;
    crop.pre_crop_rotation_deg = 90.0;
    crop.origin_x = 100;
    crop.origin_y = 100;
    std::array<double, 8> pts{};
    pts[0] = 450; // 50 right of the center rotates to 50 below it
    pts[1] = 300;
    const auto mapped = transform_landmarks(pts, crop);
    CHECK(mapped[0] == doctest::Approx(112.0).epsilon(1e-9));
    CHECK(mapped[1] == doctest::Approx(140.0).epsilon(1e-9));
}

TEST_CASE("pre-crop scaling stretches landmarks about the recorded center") {
    CropSpec crop;
    crop.center_x = 400;
    crop.center_y = 300;
    crop.pre_crop_scale = 2.0;
    crop.origin_x = 100;
    crop.origin_y = 100;
    std::array<double, 8> pts{};
    pts[0] = 450; // -> (500, 340)
    pts[1] = 320;
    const auto mapped = transform_landmarks(pts, crop);
    CHECK(mapped[0] == doctest::Approx(400.0 * 224.0 / 600.0).epsilon(1e-12));
    CHECK(mapped[1] == doctest::Approx(240.0 * 224.0 / 400.0).epsilon(1e-12));
}

TEST_CASE("invert_landmarks undoes transform_landmarks") {
    Rng rng(3);
    for (int t = 0; t < 200; ++t) {
        CropSpec crop;
        crop.origin_x = static_cast<double>(rng.uniform_int(0, 200));
        crop.origin_y = static_cast<double>(rng.uniform_int(0, 200));
        crop.pre_crop_rotation_deg = rng.uniform(-45.0, 45.0);
        crop.pre_crop_scale = rng.uniform(0.5, 1.5);
        crop.center_x = rng.uniform(200.0, 600.0);
        crop.center_y = rng.uniform(150.0, 450.0);
        std::array<double, 8> pts{};
        for (int k = 0; k < 4; ++k) {
            pts[static_cast<std::size_t>(2 * k)] = rng.uniform(0.0, 800.0);
            pts[static_cast<std::size_t>(2 * k + 1)] = rng.uniform(0.0, 600.0);
        }
        const auto back = invert_landmarks(transform_landmarks(pts, crop), crop);
        for (int i = 0; i < 8; ++i)
            CHECK(std::abs(back[static_cast<std::size_t>(i)] -
                           pts[static_cast<std::size_t>(i)]) < 1e-9);
    }
}

TEST_CASE("a bbox exactly filling the crop admits exactly one origin") {
    AnnotatedFrame f;
    f.frame_id = 1;
    f.bbox_x = 100;
    f.bbox_y = 100;
    f.bbox_w = 600;
    f.bbox_h = 400;
    f.landmarks = {200, 200, 400, 300, 300, 250, 600, 450};
    const auto w = feasible_crop_window(f, CropSpec{});
    REQUIRE(w.ok());
    CHECK(w.lo_x == 100);
    CHECK(w.hi_x == 100);
    CHECK(w.lo_y == 100);
    CHECK(w.hi_y == 100);
    Rng rng(5);
    const CropSpec crop = draw_translated_crop(f, rng);
    CHECK(crop.origin_x == 100.0);
    CHECK(crop.origin_y == 100.0);
}

TEST_CASE("an oversized bbox leaves no feasible crop") {
    AnnotatedFrame f;
    f.frame_id = 1;
    f.bbox_x = 50;
    f.bbox_y = 100;
    f.bbox_w = 601;
    f.bbox_h = 300;
    f.landmarks = {100, 150, 400, 250, 300, 200, 600, 350};
    CHECK_FALSE(feasible_crop_window(f, CropSpec{}).ok());
    const Tensor4 img = ramp_image();
    Rng rng(1);
    CHECK_THROWS_AS(make_translated_sample(f, img, rng), InfeasibleAugmentation);
    CHECK_THROWS_AS(centered_feasible_crop(f), InfeasibleAugmentation);
}

TEST_CASE("landmarks outside the bbox expand the feasibility hull") {
    AnnotatedFrame f = demo_frame();
    const auto before = feasible_crop_window(f, CropSpec{});
    f.landmarks[6] = 700.0; // right wing far beyond the bbox
    const auto after = feasible_crop_window(f, CropSpec{});
    REQUIRE(before.ok());
    REQUIRE(after.ok());
    CHECK(after.lo_x > before.lo_x); // crop must now reach x=700
    const Tensor4 img = ramp_image();
    for (int t = 0; t < 20; ++t) {
        Rng rng(static_cast<std::uint64_t>(t));
        check_contained(make_translated_sample(f, img, rng));
    }
}

TEST_CASE("crop origins are uniform over the feasible window") {
    AnnotatedFrame f;
    f.frame_id = 1;
    f.bbox_x = 199.6;
    f.bbox_y = 99.6;
    f.bbox_w = 399;
    f.bbox_h = 299;
    f.landmarks = {250, 150, 450, 350, 300, 200, 550, 380};
    const auto w = feasible_crop_window(f, CropSpec{});
    REQUIRE(w.ok());
    // Half-pixel margins and the frame bounds pin the window to
    // [0,199] x [0,99]: 200 * 100 equally likely origins.
    CHECK(w.lo_x == 0);
    CHECK(w.hi_x == 199);
    CHECK(w.lo_y == 0);
    CHECK(w.hi_y == 99);

    const int kDraws = 20000;
    std::array<double, 100> by_x{}, by_y{}, joint{};
    Rng rng(2024);
    for (int t = 0; t < kDraws; ++t) {
        const CropSpec crop = draw_translated_crop(f, rng);
        const auto ox = static_cast<std::int64_t>(crop.origin_x);
        const auto oy = static_cast<std::int64_t>(crop.origin_y);
        REQUIRE(ox >= 0);
        REQUIRE(ox <= 199);
        REQUIRE(oy >= 0);
        REQUIRE(oy <= 99);
        by_x[static_cast<std::size_t>(ox % 100)] += 1.0;
        by_y[static_cast<std::size_t>(oy)] += 1.0;
        joint[static_cast<std::size_t>((ox % 10) * 10 + oy % 10)] += 1.0;
    }
    const double expected = kDraws / 100.0;
    const auto chi2 = [&](const std::array<double, 100>& bins) {
        double s = 0.0;
        for (double o : bins) s += (o - expected) * (o - expected) / expected;
        return s;
    };
    // 99 degrees of freedom, alpha = 0.01.
    const double kCritical = 134.642;
    CHECK(chi2(by_x) < kCritical);
    CHECK(chi2(by_y) < kCritical);
    CHECK(chi2(joint) < kCritical);
}

TEST_CASE("samplers are deterministic in the rng state") {
    const AnnotatedFrame f = demo_frame();
    const Tensor4 img = ramp_image();
    Rng a = Rng::derive(9, 5);
    Rng b = Rng::derive(9, 5);
    CHECK(same_sample(make_rotated_sample(f, img, a), make_rotated_sample(f, img, b)));
    Rng c(77), d(77);
    CHECK(same_sample(make_scaled_sample(f, img, c), make_scaled_sample(f, img, d)));
}

TEST_CASE("zero-angle rotation and unit rescale reproduce the translated sample") {
    const AnnotatedFrame f = demo_frame();
    const Tensor4 img = ramp_image();
    Rng r1(7), r2(7), r3(7);
    const Sample translated = make_translated_sample(f, img, r1);
    const Sample rotated0 = make_rotated_sample_at(f, img, 0.0, r2);
    const Sample scaled1 = make_scaled_sample_at(f, img, 1.0, r3);
    CHECK(same_sample(translated, rotated0));
    CHECK(same_sample(translated, scaled1));
    CHECK(translated.crop.pre_crop_rotation_deg == 0.0);
    CHECK(translated.image.h() == 224);
    CHECK(translated.image.w() == 224);
}

TEST_CASE("drawn rotation angles and scale factors cover their ranges") {
    const AnnotatedFrame f = demo_frame();
    const Tensor4 img = ramp_image();
    double deg_lo = 1e9, deg_hi = -1e9, fac_lo = 1e9, fac_hi = -1e9;
    for (int t = 0; t < 50; ++t) {
        Rng rng = Rng::derive(31, static_cast<std::uint64_t>(t));
        const Sample r = make_rotated_sample(f, img, rng);
        deg_lo = std::min(deg_lo, r.crop.pre_crop_rotation_deg);
        deg_hi = std::max(deg_hi, r.crop.pre_crop_rotation_deg);
        Rng rng2 = Rng::derive(32, static_cast<std::uint64_t>(t));
        const Sample s = make_scaled_sample(f, img, rng2);
        fac_lo = std::min(fac_lo, s.crop.pre_crop_scale);
        fac_hi = std::max(fac_hi, s.crop.pre_crop_scale);
    }
    CHECK(deg_lo >= -45.0);
    CHECK(deg_hi <= 45.0);
    CHECK(deg_hi - deg_lo > 30.0);
    CHECK(fac_lo >= 0.5);
    CHECK(fac_hi <= 1.5);
    CHECK(fac_hi - fac_lo > 0.3);
}

TEST_CASE("labels land on the markers for every augmentation kind") {
    const AnnotatedFrame f = demo_frame();
    const Tensor4 img = marker_image(f);
    for (int t = 0; t < 40; ++t) {
        Rng r1 = Rng::derive(101, static_cast<std::uint64_t>(t));
        Rng r2 = Rng::derive(102, static_cast<std::uint64_t>(t));
        Rng r3 = Rng::derive(103, static_cast<std::uint64_t>(t));
        for (const Sample& s : {make_translated_sample(f, img, r1),
                                make_rotated_sample(f, img, r2),
                                make_scaled_sample(f, img, r3)}) {
            check_contained(s);
            check_labels_match_markers(s);
        }
    }
}

TEST_CASE("the deterministic test crop centers on the bbox and clamps") {
    AnnotatedFrame f = demo_frame(); // bbox center (400, 295)
    CropSpec crop = centered_test_crop(f);
    CHECK(crop.origin_x == 100.0);
    CHECK(crop.origin_y == 95.0);
    f.bbox_x = 10;
    f.bbox_y = 5; // center (130, 70): unclamped origin would be negative
    crop = centered_test_crop(f);
    CHECK(crop.origin_x == 0.0);
    CHECK(crop.origin_y == 0.0);
}

TEST_CASE("augment_dataset emits originals then round-robin generated samples") {
    const std::vector<AnnotatedFrame> frames = {demo_frame(1), demo_frame(2), demo_frame(3)};
    int loads = 0;
    const ImageLoader loader = [&](const AnnotatedFrame& f) {
        ++loads;
        return ramp_image(f.frame_id);
    };
    std::vector<Sample> got;
    const SampleSink sink = [&](std::int64_t i, const Sample& s) {
        CHECK(i == static_cast<std::int64_t>(got.size())); // strict index order
        got.push_back(s);
    };
    AugmentScheme scheme;
    scheme.kind = AugmentKind::Translate;
    scheme.target_total = 10;
    scheme.rng_seed = 99;
    const std::int64_t total = augment_dataset(frames, scheme, loader, sink);
    CHECK(total == 10);
    REQUIRE(got.size() == 10);
    CHECK(loads == 3); // one decode per frame when one group covers everything

    const std::int64_t want_ids[10] = {1, 2, 3, 1, 2, 3, 1, 2, 3, 1};
    for (int i = 0; i < 10; ++i) CHECK(got[static_cast<std::size_t>(i)].frame_id == want_ids[i]);
    for (int i = 0; i < 3; ++i) {
        CHECK(got[static_cast<std::size_t>(i)].crop ==
              centered_feasible_crop(frames[static_cast<std::size_t>(i)]));
    }
    for (const Sample& s : got) check_contained(s);

    // Regenerating with a tiny group size gives byte-identical samples.
    std::vector<Sample> regrouped;
    const SampleSink sink2 = [&](std::int64_t, const Sample& s) { regrouped.push_back(s); };
    augment_dataset(frames, scheme, loader, sink2, 2);
    REQUIRE(regrouped.size() == 10);
    for (std::size_t i = 0; i < 10; ++i) CHECK(same_sample(got[i], regrouped[i]));
}

TEST_CASE("augment_dataset with scheme None emits exactly the originals") {
    const std::vector<AnnotatedFrame> frames = {demo_frame(1), demo_frame(2)};
    const ImageLoader loader = [](const AnnotatedFrame& f) { return ramp_image(f.frame_id); };
    std::vector<Sample> got;
    AugmentScheme scheme;
    scheme.kind = AugmentKind::None;
    scheme.target_total = 50; // ignored for None
    const std::int64_t total = augment_dataset(
        frames, scheme, loader, [&](std::int64_t, const Sample& s) { got.push_back(s); });
    CHECK(total == 2);
    REQUIRE(got.size() == 2);
    CHECK(got[0].frame_id == 1);
    CHECK(got[1].frame_id == 2);
    CHECK(got[0].crop == centered_feasible_crop(frames[0]));
}

TEST_CASE("augment_dataset skips infeasible frames and validates the target") {
    AnnotatedFrame wide;
    wide.frame_id = 2;
    wide.bbox_x = 50;
    wide.bbox_y = 100;
    wide.bbox_w = 601;
    wide.bbox_h = 300;
    wide.landmarks = {100, 150, 400, 250, 300, 200, 600, 350};
    const std::vector<AnnotatedFrame> frames = {demo_frame(1), wide, demo_frame(3)};
    const ImageLoader loader = [](const AnnotatedFrame& f) { return ramp_image(f.frame_id); };

    std::vector<Sample> got;
    AugmentScheme scheme;
    scheme.kind = AugmentKind::Translate;
    scheme.target_total = 5;
    augment_dataset(frames, scheme, loader,
                    [&](std::int64_t, const Sample& s) { got.push_back(s); });
    REQUIRE(got.size() == 5);
    const std::int64_t want_ids[5] = {1, 3, 1, 3, 1};
    for (int i = 0; i < 5; ++i) CHECK(got[static_cast<std::size_t>(i)].frame_id == want_ids[i]);

    scheme.target_total = 2; // below the source frame count
    CHECK_THROWS_AS(
        augment_dataset(frames, scheme, loader, [](std::int64_t, const Sample&) {}),
        ValidationError);

    const std::vector<AnnotatedFrame> hopeless = {wide};
    AugmentScheme none;
    none.kind = AugmentKind::None;
    CHECK_THROWS_AS(
        augment_dataset(hopeless, none, loader, [](std::int64_t, const Sample&) {}),
        InfeasibleAugmentation);
}

TEST_CASE("infeasible transform draws fall back to plain translation") {
    // The bbox fits untransformed, but rotating 45 degrees makes its hull
    // wider than the crop, so every rotated draw is infeasible.
    AnnotatedFrame f;
    f.frame_id = 1;
    f.bbox_x = 125;
    f.bbox_y = 125;
    f.bbox_w = 550;
    f.bbox_h = 350;
    f.landmarks = {300, 200, 400, 300, 350, 250, 500, 400};
    const Tensor4 img = ramp_image();
    Rng rng(4);
    CHECK_THROWS_AS(make_rotated_sample_at(f, img, 45.0, rng), InfeasibleAugmentation);

    AugmentScheme scheme;
    scheme.kind = AugmentKind::TranslateRotate;
    scheme.target_total = 6;
    scheme.rotation_min_deg = 45.0;
    scheme.rotation_max_deg = 45.0;
    std::vector<Sample> got;
    augment_dataset({f}, scheme, [&](const AnnotatedFrame&) { return img; },
                    [&](std::int64_t, const Sample& s) { got.push_back(s); });
    REQUIRE(got.size() == 6);
    for (const Sample& s : got) {
        CHECK(s.crop.pre_crop_rotation_deg == 0.0);
        check_contained(s);
    }
}

TEST_CASE("a base CropSpec overrides crop window and output dimensions") {
    const AnnotatedFrame f = demo_frame();
    const Tensor4 img = ramp_image();
    CropSpec base;
    base.crop_w = 400;
    base.crop_h = 200;
    base.out_w = 100;
    base.out_h = 50;

    // Deterministic crops carry the base geometry and stay centered.
    const CropSpec test_crop = centered_test_crop(f, base);
    CHECK(test_crop.crop_w == 400);
    CHECK(test_crop.crop_h == 200);
    CHECK(test_crop.out_w == 100);
    CHECK(test_crop.out_h == 50);
    CHECK(test_crop.origin_x == 200.0); // bbox center (400, 295), clamped grid
    CHECK(test_crop.origin_y == 195.0);

    // The label map scales each axis by out/crop: exact on integral cases.
    CropSpec placed = base;
    placed.origin_x = 300.0;
    placed.origin_y = 250.0;
    const auto mapped = transform_landmarks({304, 252, 340, 300, 300, 250, 700, 450}, placed);
    CHECK(mapped[0] == 1.0);
    CHECK(mapped[1] == 0.5);
    CHECK(mapped[2] == 10.0);
    CHECK(mapped[3] == 12.5);
    CHECK(mapped[4] == 0.0);
    CHECK(mapped[5] == 0.0);
    CHECK(mapped[6] == 100.0);
    CHECK(mapped[7] == 50.0);

    // Samplers render to the base output size with labels inside it.
    Rng rng(99);
    const Sample s = make_translated_sample(f, img, rng, base);
    CHECK(s.image.h() == 50);
    CHECK(s.image.w() == 100);
    CHECK(s.crop.crop_w == 400);
    for (int k = 0; k < 4; ++k) {
        CHECK(s.label[static_cast<std::size_t>(2 * k)] >= 0.0);
        CHECK(s.label[static_cast<std::size_t>(2 * k)] < 100.0);
        CHECK(s.label[static_cast<std::size_t>(2 * k + 1)] >= 0.0);
        CHECK(s.label[static_cast<std::size_t>(2 * k + 1)] < 50.0);
    }

    CropSpec degenerate = base;
    degenerate.out_w = 0;
    CHECK_THROWS_AS(centered_test_crop(f, degenerate), ValidationError);
}

TEST_CASE("augment_dataset renders samples at the scheme's output size") {
    const std::vector<AnnotatedFrame> frames = {demo_frame(1), demo_frame(2)};
    const ImageLoader loader = [](const AnnotatedFrame& f) { return ramp_image(f.frame_id); };
    AugmentScheme scheme;
    scheme.kind = AugmentKind::Translate;
    scheme.target_total = 6;
    scheme.rng_seed = 11;
    scheme.out_w = scheme.out_h = 56;
    std::vector<Sample> got;
    augment_dataset(frames, scheme, loader, [&](std::int64_t, const Sample& s) {
        got.push_back(s);
    });
    REQUIRE(got.size() == 6);
    for (const Sample& s : got) {
        CHECK(s.image.h() == 56);
        CHECK(s.image.w() == 56);
        CHECK(s.crop.out_w == 56);
        CHECK(s.crop.crop_w == 600);
        for (int k = 0; k < 4; ++k) {
            CHECK(s.label[static_cast<std::size_t>(2 * k)] >= 0.0);
            CHECK(s.label[static_cast<std::size_t>(2 * k)] < 56.0);
        }
    }
}
