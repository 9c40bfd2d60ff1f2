#pragma once

#include <filesystem>

#include "mothpose/tensor.hpp"

namespace mothpose {

// Images are Tensor4 values with n = 1, c in {1 (gray), 3 (RGB)}, values on
// the 0..255 scale. Pixel centers sit at integer coordinates, origin at the
// top-left, x rightward, y downward.

/// Binary PGM (P5) / PPM (P6) codec, maxval 255. Values are clamped and
/// rounded on write.
Tensor4 read_image(const std::filesystem::path& path);
void write_image(const Tensor4& image, const std::filesystem::path& path);

/// Center-aligned bilinear resample: source position of output pixel d is
/// (d + 0.5) * in/out - 0.5 per axis, edges clamped. Identity sizes copy
/// bit-exactly.
Tensor4 bilinear_resize(const Tensor4& image, std::int64_t out_h, std::int64_t out_w);

/// Copies the axis-aligned window rows [y0, y0+h), cols [x0, x0+w).
Tensor4 crop_window(const Tensor4& image, std::int64_t x0, std::int64_t y0, std::int64_t w,
                    std::int64_t h);

/// Mean of the one-pixel border, per channel — the fill value used for
/// samples falling outside the frame during rotation/scaling.
std::vector<double> border_mean(const Tensor4& image);

/// Rotates the frame by `deg` (positive = x-axis toward y-axis, i.e.
/// clockwise on screen with y down) about (cx, cy); bilinear sampling,
/// out-of-frame reads fill with the border mean. Output has the input's
/// dimensions.
Tensor4 rotate_about(const Tensor4& image, double deg, double cx, double cy);

/// Rescales the frame about (cx, cy) by `factor` (>1 enlarges the subject);
/// same sampling/fill rules as rotate_about.
Tensor4 scale_about(const Tensor4& image, double factor, double cx, double cy);

} // namespace mothpose
