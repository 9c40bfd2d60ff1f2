#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace mothpose {

/// Finite projective camera: homogeneous world point -> homogeneous image
/// point through a 3x4 matrix (row-major storage).
struct CameraModel {
    std::array<double, 12> projection{};
    std::string camera_id;

    double at(int row, int col) const {
        return projection[static_cast<std::size_t>(4 * row + col)];
    }
    double& at(int row, int col) { return projection[static_cast<std::size_t>(4 * row + col)]; }
};

/// Throws DegenerateGeometry unless the top-left 3x3 submatrix is
/// invertible (the finite-camera invariant).
void validate_camera(const CameraModel& cam);

/// Calibration file: 12 whitespace-separated numbers, row-major. Lines
/// starting with '#' are comments and are ignored; save_camera writes a
/// "# camera projection v1" comment first. The loaded camera is validated.
CameraModel load_camera(const std::filesystem::path& path, std::string camera_id = {});
void save_camera(const CameraModel& cam, const std::filesystem::path& path);

/// World-space position of the camera's optical center.
std::array<double, 3> camera_center(const CameraModel& cam);

/// Linear two-view triangulation: stacks the cross-product constraints of
/// both views into a 4x4 system and takes the smallest-singular-vector
/// direction. Throws DegenerateGeometry on zero baseline, rays meeting at
/// less than 0.1 degrees, a singular-value ratio above 1e8, or a solution
/// at infinity.
std::array<double, 3> triangulate(const std::array<double, 2>& p1, const std::array<double, 2>& p2,
                                  const CameraModel& cam1, const CameraModel& cam2);

/// Homogeneous projection and dehomogenization. Throws ProjectionError when
/// the homogeneous scale is (numerically) zero, e.g. at the camera center.
std::array<double, 2> reproject(const std::array<double, 3>& point, const CameraModel& cam);

/// One triangulated landmark: world position plus the mean reprojection
/// residual over the two views. Degenerate landmarks stay invalid with
/// zeroed fields.
struct PosePoint {
    std::array<double, 3> position{};
    double residual_px = 0.0;
    bool valid = false;

    bool operator==(const PosePoint&) const = default;
};

/// 3D pose at one time index; points ordered head, abdomen tip, left wing
/// tip, right wing tip (kLandmarkNames order).
struct Pose3D {
    std::int64_t time_index = 0;
    std::array<PosePoint, 4> points{};

    bool complete() const {
        return points[0].valid && points[1].valid && points[2].valid && points[3].valid;
    }
    bool operator==(const Pose3D&) const = default;
};

/// Triangulates all four landmarks of one frame from its two native-space
/// views. A landmark whose geometry is degenerate is flagged invalid; the
/// rest of the pose is still returned (partial pose).
Pose3D reconstruct_pose(const std::array<double, 8>& landmarks1,
                        const std::array<double, 8>& landmarks2, const CameraModel& cam1,
                        const CameraModel& cam2, std::int64_t time_index);

/// Sequence-mean 3D distance ratios, predicted over ground truth:
/// head-to-abdomen-tip and left-to-right wing tip.
struct RatioMetrics {
    double head_abdomen = 0.0;
    double wing_wing = 0.0;
    std::int64_t frames_used = 0;
    std::int64_t frames_excluded = 0;
};

/// Matched pose sequences -> mean HA and LR distance ratios. A frame is
/// used only when all four points are valid in both poses and both
/// ground-truth distances are nonzero; excluded frames are counted and
/// warned about on stderr. Throws SizeError on mismatched lengths or when
/// no frame is usable.
RatioMetrics ratio_metrics(const std::vector<Pose3D>& pred, const std::vector<Pose3D>& gt);

/// Pose CSV (header frame_id,landmark,X,Y,Z,residual_px; %.17g fields so
/// the round trip is bit-exact). Invalid points are omitted on save and
/// stay invalid after a load.
void save_poses(const std::vector<Pose3D>& poses, const std::filesystem::path& path);
std::vector<Pose3D> load_poses(const std::filesystem::path& path);

} // namespace mothpose
