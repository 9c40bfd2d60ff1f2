#pragma once

#include <array>
#include <cstdint>
#include <functional>

#include "mothpose/annotations.hpp"
#include "mothpose/image.hpp"
#include "mothpose/rng.hpp"

namespace mothpose {

enum class AugmentKind { None, Translate, TranslateRotate, TranslateScale };

struct AugmentScheme {
    AugmentKind kind = AugmentKind::Translate;
    std::int64_t target_total = 200000;
    std::uint64_t rng_seed = 0;
    double rotation_min_deg = -45.0;
    double rotation_max_deg = 45.0;
    double scale_min = 0.5;
    double scale_max = 1.5;
    // Crop window and sample output dimensions (the transform fields of the
    // per-sample CropSpec are always drawn fresh).
    int crop_w = 600, crop_h = 400;
    int out_w = 224, out_h = 224;
};

/// The recorded geometry linking a 224x224 sample back to its native frame:
/// an optional pre-crop rotation/scale about (center_x, center_y), then the
/// crop_w x crop_h window at (origin_x, origin_y), resized to out_w x out_h.
/// Landmarks map through origin subtraction and pure axis scaling, which
/// makes the chain exactly invertible.
struct CropSpec {
    double origin_x = 0.0, origin_y = 0.0;
    int crop_w = 600, crop_h = 400;
    int out_w = 224, out_h = 224;
    double pre_crop_rotation_deg = 0.0;
    double pre_crop_scale = 1.0;
    double center_x = 0.0, center_y = 0.0;

    bool operator==(const CropSpec&) const = default;
};

struct Sample {
    Tensor4 image;                 // (1, c, out_h, out_w)
    std::array<double, 8> label{}; // landmark coords in out_w x out_h space
    CropSpec crop;
    std::int64_t frame_id = 0;
};

/// Applies the CropSpec chain to a native frame image / to native-space
/// landmarks. These two functions are the single source of geometric truth:
/// samplers, the evaluator's inverse map, and the label-consistency tests
/// all go through them.
Tensor4 transform_image(const Tensor4& native_image, const CropSpec& crop);
std::array<double, 8> transform_landmarks(const std::array<double, 8>& native,
                                          const CropSpec& crop);
/// Exact inverse of transform_landmarks.
std::array<double, 8> invert_landmarks(const std::array<double, 8>& mapped,
                                       const CropSpec& crop);

/// Integer crop origins keeping the crop inside the native frame and the
/// transformed body hull (bbox corners plus landmarks) inside the crop with
/// a half-pixel margin (shrunk when the hull nearly fills the crop).
struct FeasibleWindow {
    std::int64_t lo_x = 0, hi_x = -1, lo_y = 0, hi_y = -1;
    bool ok() const { return lo_x <= hi_x && lo_y <= hi_y; }
};

/// Window of feasible origins for `crop`'s pre-crop transform; the origin
/// fields of `crop` are ignored.
FeasibleWindow feasible_crop_window(const AnnotatedFrame& frame, const CropSpec& crop);

/// The crop-drawing step of make_translated_sample without the rendering:
/// same rng stream, same result spec. Exposed so distribution tests can
/// sample origins cheaply. `base` supplies the crop window and output
/// dimensions; its origin/transform fields are ignored.
CropSpec draw_translated_crop(const AnnotatedFrame& frame, Rng& rng, const CropSpec& base = {});

/// Deterministic crop for original (non-augmented) samples: centered on the
/// body as far as the feasibility constraints allow. Throws
/// InfeasibleAugmentation when the (landmark-expanded) bbox cannot fit.
CropSpec centered_feasible_crop(const AnnotatedFrame& frame, const CropSpec& base = {});

/// Deterministic test-time crop: the crop_w x crop_h window centered on the
/// bbox, clamped to the frame. Never throws; containment is not guaranteed
/// (the recorded CropSpec keeps the native mapping exact regardless).
CropSpec centered_test_crop(const AnnotatedFrame& frame, const CropSpec& base = {});

/// Translation augmentation: crop origin uniform over every offset that
/// keeps the crop inside the frame and the (landmark-expanded) body bbox
/// inside the crop; the image is resized to out_w x out_h and the label
/// mapped through the same spec. Throws InfeasibleAugmentation when no
/// valid origin exists.
Sample make_translated_sample(const AnnotatedFrame& frame, const Tensor4& image, Rng& rng,
                              const CropSpec& base = {});

/// Rotation about the bbox center by an angle uniform in the scheme range
/// (default -45..45 deg), then the translation step on the rotated frame.
Sample make_rotated_sample(const AnnotatedFrame& frame, const Tensor4& image, Rng& rng,
                           double min_deg = -45.0, double max_deg = 45.0,
                           const CropSpec& base = {});

/// Rescaling about the bbox center by a factor uniform in 0.5..1.5, then
/// the translation step.
Sample make_scaled_sample(const AnnotatedFrame& frame, const Tensor4& image, Rng& rng,
                          double min_factor = 0.5, double max_factor = 1.5,
                          const CropSpec& base = {});

/// Fixed-parameter variants (angle/factor supplied instead of drawn). The
/// random draw and the crop draw come from independent sub-streams of the
/// same rng, so make_rotated_sample_at(.., 0.0, rng) is bit-identical to
/// make_translated_sample with an equal-state rng.
Sample make_rotated_sample_at(const AnnotatedFrame& frame, const Tensor4& image, double deg,
                              Rng& rng, const CropSpec& base = {});
Sample make_scaled_sample_at(const AnnotatedFrame& frame, const Tensor4& image, double factor,
                             Rng& rng, const CropSpec& base = {});

using ImageLoader = std::function<Tensor4(const AnnotatedFrame&)>;
using SampleSink = std::function<void(std::int64_t index, const Sample&)>;

/// Emits each feasible frame once (deterministic centered crop), then
/// generated samples round-robin over the frames until target_total is
/// reached. Per-sample seeds derive from (rng_seed, sample index), so the
/// stream is independent of generation order; samples are handed to the
/// sink strictly in index order, grouped internally (group_size at a time)
/// so each frame image is decoded once per group. A sample whose random
/// transform is infeasible retries a few times on its own stream and then
/// falls back to translation only. Frames infeasible for the plain
/// translation crop are skipped with a warning; returns the emitted count.
std::int64_t augment_dataset(const std::vector<AnnotatedFrame>& frames,
                             const AugmentScheme& scheme, const ImageLoader& load_image,
                             const SampleSink& sink, std::int64_t group_size = 1000);

} // namespace mothpose
