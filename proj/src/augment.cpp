#include "mothpose/augment.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numbers>
#include <string>
#include <vector>

#include "mothpose/errors.hpp"

namespace mothpose {
namespace {

constexpr int kRetryLimit = 8;

// Forward pre-crop transform of a native-space point: scale about the
// center, then rotate about it (at most one of the two differs from the
// identity in practice).
void pre_crop_point(const CropSpec& crop, double& x, double& y) {
    double dx = x - crop.center_x;
    double dy = y - crop.center_y;
    dx *= crop.pre_crop_scale;
    dy *= crop.pre_crop_scale;
    if (crop.pre_crop_rotation_deg != 0.0) {
        const double rad = crop.pre_crop_rotation_deg * std::numbers::pi / 180.0;
        const double cs = std::cos(rad);
        const double sn = std::sin(rad);
        const double rx = cs * dx - sn * dy;
        const double ry = sn * dx + cs * dy;
        dx = rx;
        dy = ry;
    }
    x = crop.center_x + dx;
    y = crop.center_y + dy;
}

struct Hull {
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

// Bounding hull of the body bbox corners and all landmarks after the
// pre-crop transform. Landmarks join the hull because wingtips can extend
// beyond the body bbox and the mapped label must stay inside the crop.
Hull transformed_hull(const AnnotatedFrame& frame, const CropSpec& crop) {
    std::vector<std::array<double, 2>> pts;
    pts.reserve(8);
    const double bx0 = frame.bbox_x, by0 = frame.bbox_y;
    const double bx1 = frame.bbox_x + frame.bbox_w, by1 = frame.bbox_y + frame.bbox_h;
    pts.push_back({bx0, by0});
    pts.push_back({bx1, by0});
    pts.push_back({bx0, by1});
    pts.push_back({bx1, by1});
    for (int k = 0; k < 4; ++k) pts.push_back({frame.landmark_x(k), frame.landmark_y(k)});

    Hull h;
    bool first = true;
    for (auto [x, y] : pts) {
        pre_crop_point(crop, x, y);
        if (first) {
            h = Hull{x, y, x, y};
            first = false;
        } else {
            h.x0 = std::min(h.x0, x);
            h.y0 = std::min(h.y0, y);
            h.x1 = std::max(h.x1, x);
            h.y1 = std::max(h.y1, y);
        }
    }
    return h;
}

std::pair<std::int64_t, std::int64_t> axis_interval(double h0, double h1, int crop_len,
                                                    int frame_len) {
    // Keep the hull at least half a pixel from the crop edge, shrinking the
    // margin when the hull nearly (or exactly) fills the crop so the
    // tight-fit case still admits its one origin.
    const double margin = std::min(0.5, (crop_len - (h1 - h0)) / 2.0);
    if (margin < 0.0) return {0, -1};
    const auto lo = std::max<std::int64_t>(
        0, static_cast<std::int64_t>(std::ceil(h1 + margin)) - crop_len);
    const auto hi = std::min<std::int64_t>(frame_len - crop_len,
                                           static_cast<std::int64_t>(std::floor(h0 - margin)));
    return {lo, hi};
}

FeasibleWindow feasible_origins(const Hull& h, const CropSpec& crop) {
    FeasibleWindow w;
    if (crop.crop_w > kNativeW || crop.crop_h > kNativeH) return w;
    std::tie(w.lo_x, w.hi_x) = axis_interval(h.x0, h.x1, crop.crop_w, kNativeW);
    std::tie(w.lo_y, w.hi_y) = axis_interval(h.y0, h.y1, crop.crop_h, kNativeH);
    return w;
}

CropSpec body_centered_spec(const AnnotatedFrame& frame, const CropSpec& base) {
    if (base.crop_w < 1 || base.crop_h < 1 || base.out_w < 1 || base.out_h < 1)
        throw ValidationError("crop and output dimensions must be positive");
    CropSpec crop;
    crop.crop_w = base.crop_w;
    crop.crop_h = base.crop_h;
    crop.out_w = base.out_w;
    crop.out_h = base.out_h;
    crop.center_x = frame.bbox_x + frame.bbox_w / 2.0;
    crop.center_y = frame.bbox_y + frame.bbox_h / 2.0;
    return crop;
}

CropSpec draw_origin(const AnnotatedFrame& frame, CropSpec crop, Rng& crop_rng,
                     const char* what) {
    const FeasibleWindow w = feasible_origins(transformed_hull(frame, crop), crop);
    if (!w.ok()) {
        throw InfeasibleAugmentation("frame " + std::to_string(frame.frame_id) + ": " + what +
                                     " leaves no feasible crop origin");
    }
    crop.origin_x = static_cast<double>(crop_rng.uniform_int(w.lo_x, w.hi_x));
    crop.origin_y = static_cast<double>(crop_rng.uniform_int(w.lo_y, w.hi_y));
    return crop;
}

Sample render_sample(const AnnotatedFrame& frame, const Tensor4& image, const CropSpec& crop) {
    Sample s;
    s.frame_id = frame.frame_id;
    s.crop = crop;
    s.image = transform_image(image, crop);
    s.label = transform_landmarks(frame.landmarks, crop);
    return s;
}

// One shared base draw feeds two independent sub-streams: stream 1 for the
// transform parameter, stream 2 for the crop origin. The crop draw is thus
// unaffected by whether a transform parameter was drawn at all, which makes
// a zero-angle rotation reproduce the plain translated sample exactly.
Rng transform_stream(std::uint64_t base) { return Rng::derive(base, 1); }
Rng crop_stream(std::uint64_t base) { return Rng::derive(base, 2); }

} // namespace

Tensor4 transform_image(const Tensor4& native_image, const CropSpec& crop) {
    const Tensor4* src = &native_image;
    Tensor4 transformed;
    if (crop.pre_crop_scale != 1.0) {
        transformed = scale_about(*src, crop.pre_crop_scale, crop.center_x, crop.center_y);
        src = &transformed;
    }
    if (crop.pre_crop_rotation_deg != 0.0) {
        transformed =
            rotate_about(*src, crop.pre_crop_rotation_deg, crop.center_x, crop.center_y);
        src = &transformed;
    }
    const auto ox = static_cast<std::int64_t>(std::llround(crop.origin_x));
    const auto oy = static_cast<std::int64_t>(std::llround(crop.origin_y));
    Tensor4 window = crop_window(*src, ox, oy, crop.crop_w, crop.crop_h);
    return bilinear_resize(window, crop.out_h, crop.out_w);
}

std::array<double, 8> transform_landmarks(const std::array<double, 8>& native,
                                          const CropSpec& crop) {
    std::array<double, 8> out{};
    for (int k = 0; k < 4; ++k) {
        double x = native[2 * k];
        double y = native[2 * k + 1];
        pre_crop_point(crop, x, y);
        // Multiply before dividing so integral cases stay exact.
        out[2 * k] = (x - crop.origin_x) * crop.out_w / crop.crop_w;
        out[2 * k + 1] = (y - crop.origin_y) * crop.out_h / crop.crop_h;
    }
    return out;
}

std::array<double, 8> invert_landmarks(const std::array<double, 8>& mapped,
                                       const CropSpec& crop) {
    std::array<double, 8> out{};
    const double rad = crop.pre_crop_rotation_deg * std::numbers::pi / 180.0;
    const double cs = std::cos(rad);
    const double sn = std::sin(rad);
    for (int k = 0; k < 4; ++k) {
        // Undo the output scaling and crop offset...
        double x = mapped[2 * k] * crop.crop_w / crop.out_w + crop.origin_x;
        double y = mapped[2 * k + 1] * crop.crop_h / crop.out_h + crop.origin_y;
        // ...then the rotation and scaling about the recorded center.
        double dx = x - crop.center_x;
        double dy = y - crop.center_y;
        const double rx = cs * dx + sn * dy;
        const double ry = -sn * dx + cs * dy;
        dx = rx / crop.pre_crop_scale;
        dy = ry / crop.pre_crop_scale;
        out[2 * k] = crop.center_x + dx;
        out[2 * k + 1] = crop.center_y + dy;
    }
    return out;
}

FeasibleWindow feasible_crop_window(const AnnotatedFrame& frame, const CropSpec& crop) {
    return feasible_origins(transformed_hull(frame, crop), crop);
}

CropSpec draw_translated_crop(const AnnotatedFrame& frame, Rng& rng, const CropSpec& base) {
    const std::uint64_t draw = rng.next_u64();
    Rng crop_rng = crop_stream(draw);
    return draw_origin(frame, body_centered_spec(frame, base), crop_rng, "translation");
}

CropSpec centered_feasible_crop(const AnnotatedFrame& frame, const CropSpec& base) {
    CropSpec crop = body_centered_spec(frame, base);
    const Hull h = transformed_hull(frame, crop);
    const FeasibleWindow w = feasible_origins(h, crop);
    if (!w.ok()) {
        throw InfeasibleAugmentation("frame " + std::to_string(frame.frame_id) +
                                     ": no feasible crop origin");
    }
    const double cx = (h.x0 + h.x1) / 2.0 - crop.crop_w / 2.0;
    const double cy = (h.y0 + h.y1) / 2.0 - crop.crop_h / 2.0;
    crop.origin_x = static_cast<double>(
        std::clamp(static_cast<std::int64_t>(std::llround(cx)), w.lo_x, w.hi_x));
    crop.origin_y = static_cast<double>(
        std::clamp(static_cast<std::int64_t>(std::llround(cy)), w.lo_y, w.hi_y));
    return crop;
}

CropSpec centered_test_crop(const AnnotatedFrame& frame, const CropSpec& base) {
    CropSpec crop = body_centered_spec(frame, base);
    crop.origin_x = static_cast<double>(std::clamp<std::int64_t>(
        std::llround(crop.center_x - crop.crop_w / 2.0), 0,
        std::max(0, kNativeW - crop.crop_w)));
    crop.origin_y = static_cast<double>(std::clamp<std::int64_t>(
        std::llround(crop.center_y - crop.crop_h / 2.0), 0,
        std::max(0, kNativeH - crop.crop_h)));
    return crop;
}

Sample make_translated_sample(const AnnotatedFrame& frame, const Tensor4& image, Rng& rng,
                              const CropSpec& base) {
    return render_sample(frame, image, draw_translated_crop(frame, rng, base));
}

Sample make_rotated_sample(const AnnotatedFrame& frame, const Tensor4& image, Rng& rng,
                           double min_deg, double max_deg, const CropSpec& base) {
    if (min_deg > max_deg) throw ValidationError("rotation range is empty");
    const std::uint64_t draw = rng.next_u64();
    Rng angle_rng = transform_stream(draw);
    Rng crop_rng = crop_stream(draw);
    CropSpec crop = body_centered_spec(frame, base);
    crop.pre_crop_rotation_deg = angle_rng.uniform(min_deg, max_deg);
    return render_sample(frame, image, draw_origin(frame, crop, crop_rng, "rotation"));
}

Sample make_scaled_sample(const AnnotatedFrame& frame, const Tensor4& image, Rng& rng,
                          double min_factor, double max_factor, const CropSpec& base) {
    if (!(min_factor > 0.0) || min_factor > max_factor)
        throw ValidationError("scale range is empty or non-positive");
    const std::uint64_t draw = rng.next_u64();
    Rng factor_rng = transform_stream(draw);
    Rng crop_rng = crop_stream(draw);
    CropSpec crop = body_centered_spec(frame, base);
    crop.pre_crop_scale = factor_rng.uniform(min_factor, max_factor);
    return render_sample(frame, image, draw_origin(frame, crop, crop_rng, "rescaling"));
}

Sample make_rotated_sample_at(const AnnotatedFrame& frame, const Tensor4& image, double deg,
                              Rng& rng, const CropSpec& base) {
    const std::uint64_t draw = rng.next_u64();
    Rng crop_rng = crop_stream(draw);
    CropSpec crop = body_centered_spec(frame, base);
    crop.pre_crop_rotation_deg = deg;
    return render_sample(frame, image, draw_origin(frame, crop, crop_rng, "rotation"));
}

Sample make_scaled_sample_at(const AnnotatedFrame& frame, const Tensor4& image, double factor,
                             Rng& rng, const CropSpec& base) {
    if (!(factor > 0.0)) throw GeometryError("scale factor must be positive");
    const std::uint64_t draw = rng.next_u64();
    Rng crop_rng = crop_stream(draw);
    CropSpec crop = body_centered_spec(frame, base);
    crop.pre_crop_scale = factor;
    return render_sample(frame, image, draw_origin(frame, crop, crop_rng, "rescaling"));
}

std::int64_t augment_dataset(const std::vector<AnnotatedFrame>& frames,
                             const AugmentScheme& scheme, const ImageLoader& load_image,
                             const SampleSink& sink, std::int64_t group_size) {
    if (group_size <= 0) throw ValidationError("group_size must be positive");
    if (scheme.rotation_min_deg > scheme.rotation_max_deg)
        throw ValidationError("rotation range is empty");
    if (!(scheme.scale_min > 0.0) || scheme.scale_min > scheme.scale_max)
        throw ValidationError("scale range is empty or non-positive");
    CropSpec base;
    base.crop_w = scheme.crop_w;
    base.crop_h = scheme.crop_h;
    base.out_w = scheme.out_w;
    base.out_h = scheme.out_h;

    std::vector<const AnnotatedFrame*> feasible;
    feasible.reserve(frames.size());
    for (const AnnotatedFrame& f : frames) {
        const CropSpec probe = body_centered_spec(f, base);
        if (feasible_origins(transformed_hull(f, probe), probe).ok()) {
            feasible.push_back(&f);
        } else {
            std::cerr << "augment: skipping frame " << f.frame_id
                      << " (no feasible crop origin)\n";
        }
    }
    if (feasible.empty()) throw InfeasibleAugmentation("no source frame admits a crop");

    const auto originals = static_cast<std::int64_t>(feasible.size());
    std::int64_t total = originals;
    if (scheme.kind != AugmentKind::None) {
        if (scheme.target_total < static_cast<std::int64_t>(frames.size()))
            throw ValidationError("target_total is below the source frame count");
        total = scheme.target_total;
    }

    std::int64_t fallbacks = 0;
    auto render_index = [&](std::int64_t i, const AnnotatedFrame& f,
                            const Tensor4& img) -> Sample {
        if (i < originals) return render_sample(f, img, centered_feasible_crop(f, base));
        Rng rng = Rng::derive(scheme.rng_seed, static_cast<std::uint64_t>(i));
        switch (scheme.kind) {
        case AugmentKind::Translate:
            return make_translated_sample(f, img, rng, base);
        case AugmentKind::TranslateRotate:
            for (int k = 0; k < kRetryLimit; ++k) {
                try {
                    return make_rotated_sample(f, img, rng, scheme.rotation_min_deg,
                                               scheme.rotation_max_deg, base);
                } catch (const InfeasibleAugmentation&) {
                }
            }
            ++fallbacks;
            return make_translated_sample(f, img, rng, base);
        case AugmentKind::TranslateScale:
            for (int k = 0; k < kRetryLimit; ++k) {
                try {
                    return make_scaled_sample(f, img, rng, scheme.scale_min, scheme.scale_max,
                                              base);
                } catch (const InfeasibleAugmentation&) {
                }
            }
            ++fallbacks;
            return make_translated_sample(f, img, rng, base);
        case AugmentKind::None:
            break;
        }
        throw ConsistencyError("unreachable augmentation kind");
    };

    // Generate frame-major within each group so every source image is
    // decoded once per group, but hand samples to the sink in index order.
    std::vector<Sample> group;
    std::vector<std::vector<std::int64_t>> owned(feasible.size());
    for (std::int64_t g0 = 0; g0 < total; g0 += group_size) {
        const std::int64_t g1 = std::min(total, g0 + group_size);
        group.assign(static_cast<std::size_t>(g1 - g0), Sample{});
        for (auto& v : owned) v.clear();
        for (std::int64_t i = g0; i < g1; ++i) {
            const std::int64_t fi = i < originals ? i : (i - originals) % originals;
            owned[static_cast<std::size_t>(fi)].push_back(i);
        }
        for (std::int64_t fi = 0; fi < originals; ++fi) {
            const auto& indices = owned[static_cast<std::size_t>(fi)];
            if (indices.empty()) continue;
            const Tensor4 img = load_image(*feasible[static_cast<std::size_t>(fi)]);
            for (std::int64_t i : indices) {
                group[static_cast<std::size_t>(i - g0)] =
                    render_index(i, *feasible[static_cast<std::size_t>(fi)], img);
            }
        }
        for (std::int64_t i = g0; i < g1; ++i) {
            sink(i, group[static_cast<std::size_t>(i - g0)]);
        }
    }
    if (fallbacks > 0) {
        std::cerr << "augment: " << fallbacks
                  << " transform draws were infeasible and fell back to translation\n";
    }
    return total;
}

} // namespace mothpose
