#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "mothpose/annotations.hpp"
#include "mothpose/augment.hpp"
#include "mothpose/camera.hpp"

namespace mothpose {

/// Procedurally rendered test dataset: textured 800x600 grayscale frames
/// carrying four distinguishable blob markers at known coordinates. The
/// sequence drifts smoothly in marker size, marker contrast, and body
/// scale, so a first-half/second-half split faces a distribution shift
/// that an interleaved split does not.
struct SynthConfig {
    std::int64_t frame_count = 200;
    std::uint64_t rng_seed = 1;

    double marker_growth = 1.25; // marker radius multiplier reached at the end
    double marker_fade = 0.85;   // marker amplitude multiplier reached at the end
    double body_scale_start = 0.92;
    double body_scale_end = 1.08;
    double center_jitter = 10.0;    // body-center jitter, px
    double landmark_jitter = 6.0;   // per-landmark jitter, px
    std::int64_t occlude_every = 0; // flag one landmark occluded every k frames (0 = never)
};

/// Landmark layout, bboxes, and occlusion flags for the whole sequence
/// (frame ids 1..frame_count). Deterministic in the config.
std::vector<AnnotatedFrame> synth_annotations(const SynthConfig& cfg);

/// Renders one frame as grayscale (1,1,600,800) with values in [0,255].
/// Pure function of (cfg, frame): markers at frame.landmarks over a
/// textured background keyed by frame_id.
Tensor4 render_frame(const SynthConfig& cfg, const AnnotatedFrame& frame);

/// The same frame without its markers. frame - background isolates the
/// marker mass exactly (both clamp to [0,255] only at saturation).
Tensor4 render_background(const SynthConfig& cfg, const AnnotatedFrame& frame);

/// ImageLoader that re-renders frames on demand instead of reading disk.
ImageLoader render_loader(const SynthConfig& cfg);

/// Writes frame_NNNN.pgm plus annotations.csv into dir; returns the
/// annotations (image_ref holds the file name).
std::vector<AnnotatedFrame> write_synth_dataset(const SynthConfig& cfg,
                                                const std::filesystem::path& dir);

/// Two calibrated convergent cameras plus a smooth 3D four-point track
/// projected into both views. Ground-truth poses carry zero residuals.
struct TwoViewFixture {
    CameraModel cam1, cam2;
    std::vector<Pose3D> gt_poses;
    std::vector<std::array<double, 8>> view1, view2;
};
TwoViewFixture synth_two_view_track(std::int64_t frame_count, std::uint64_t seed);

} // namespace mothpose
