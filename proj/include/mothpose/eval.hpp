#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <vector>

#include "mothpose/annotations.hpp"
#include "mothpose/augment.hpp"
#include "mothpose/nn/engine.hpp"
#include "mothpose/nn/trainer.hpp"

namespace mothpose {

enum class OcclusionMode { IncludeAll, ExcludeOccludedFrames };

/// Evaluation summary. test_loss lives in 224x224 crop space and is NaN
/// until a caller fills it; the MAEs are native-resolution pixels.
struct EvalResult {
    double test_loss = std::numeric_limits<double>::quiet_NaN();
    std::array<double, 4> mae{};
    double total_mae = 0.0;
    std::int64_t frames_evaluated = 0;
    std::int64_t occlusion_excluded = 0;
};

/// Mean over the test set of the squared Euclidean distance between
/// prediction and label vectors, evaluated in chunks of at most
/// chunk_size samples. Deterministic: per-sample distances accumulate in
/// sample order regardless of chunking.
double test_loss(const nn::NetworkSpec& net, const nn::Parameters& params, const Tensor4& data,
                 const Tensor4& labels, std::int64_t chunk_size = 32);

/// Maps a 224-space prediction back to native frame coordinates through
/// the recorded crop spec (exact inverse of the forward label map).
std::array<double, 8> map_to_native(const std::array<double, 8>& pred_224, const CropSpec& crop);

/// Per-landmark mean Euclidean error at native resolution. Ground truth
/// (coordinates and occlusion flags) comes from the annotated frames,
/// index-matched with the predictions. ExcludeOccludedFrames drops a frame
/// entirely when any landmark is flagged. Throws SizeError on mismatched
/// lists or when no frame survives the filter.
EvalResult mae_per_landmark(const std::vector<std::array<double, 8>>& preds_native,
                            const std::vector<AnnotatedFrame>& gts, OcclusionMode mode);

/// Writes mae.csv (landmark,mae_px,n_frames), loss_curve.csv
/// (iteration,train_loss,test_loss), and report.svg (MAE bars + loss
/// curves) into dir, creating it if needed.
void emit_report(const EvalResult& result, const nn::LossHistory& history,
                 const std::filesystem::path& dir);

/// One frame's predicted landmarks in native coordinates.
struct FramePrediction {
    std::int64_t frame_id = 0;
    std::array<double, 8> landmarks{};

    bool operator==(const FramePrediction&) const = default;
};

/// Predictions CSV (header frame_id,head_x,head_y,abdomen_x,abdomen_y,
/// left_wing_x,left_wing_y,right_wing_x,right_wing_y; %.17g fields, so the
/// round trip is bit-exact).
void save_predictions(const std::vector<FramePrediction>& preds,
                      const std::filesystem::path& path);
std::vector<FramePrediction> load_predictions(const std::filesystem::path& path);

} // namespace mothpose
