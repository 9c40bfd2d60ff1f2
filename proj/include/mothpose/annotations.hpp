#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mothpose/errors.hpp"

namespace mothpose {

// Native video frames are 800 px wide by 600 px tall.
inline constexpr int kNativeW = 800;
inline constexpr int kNativeH = 600;

// Landmark order used by every 8-vector in the toolkit.
inline constexpr int kLandmarkCount = 4;
inline constexpr const char* kLandmarkNames[kLandmarkCount] = {"head", "abdomen", "left_wing",
                                                               "right_wing"};

/// One annotated video frame: 4 landmark coordinates in native pixels
/// (ordered head, abdomen tip, left wing tip, right wing tip), per-landmark
/// occlusion flags, and the body bounding box.
struct AnnotatedFrame {
    std::int64_t frame_id = 0;
    std::string image_ref;
    std::array<double, 8> landmarks{}; // x0,y0,x1,y1,...
    std::array<bool, 4> occluded{};
    double bbox_x = 0, bbox_y = 0, bbox_w = 0, bbox_h = 0;

    double landmark_x(int i) const { return landmarks[static_cast<std::size_t>(2 * i)]; }
    double landmark_y(int i) const { return landmarks[static_cast<std::size_t>(2 * i + 1)]; }
    bool any_occluded() const {
        return occluded[0] || occluded[1] || occluded[2] || occluded[3];
    }
};

/// CSV schema (exact header):
/// frame_id,image,head_x,head_y,abd_x,abd_y,lw_x,lw_y,rw_x,rw_y,
/// occ_head,occ_abd,occ_lw,occ_rw,bbox_x,bbox_y,bbox_w,bbox_h
/// Returns frames sorted by frame_id. Malformed rows raise ParseError with
/// the line number; out-of-frame coordinates raise ValidationError.
std::vector<AnnotatedFrame> load_annotations(const std::filesystem::path& path);
void save_annotations(const std::vector<AnnotatedFrame>& frames,
                      const std::filesystem::path& path);

enum class SplitKind { FirstHalf, Interleaved, RandomK };

struct SplitStrategy {
    SplitKind kind = SplitKind::FirstHalf;
    std::int64_t train_k = 0;  // RandomK only
    std::int64_t test_k = 200; // RandomK only
    std::uint64_t seed = 0;    // RandomK only
};

struct Split {
    std::vector<AnnotatedFrame> train;
    std::vector<AnnotatedFrame> test;
};

/// FirstHalf: first ceil(n/2) frames (by sorted id) train, rest test.
/// Interleaved: odd frame ids train, even test. RandomK: a uniform test
/// sample of test_k frames, then train_k drawn uniformly from the rest;
/// train_k + test_k > n raises SizeError.
Split split(const std::vector<AnnotatedFrame>& frames, const SplitStrategy& strategy);

} // namespace mothpose
