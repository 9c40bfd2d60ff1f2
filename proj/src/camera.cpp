#include "mothpose/camera.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <unordered_map>

#include "mothpose/annotations.hpp"
#include "mothpose/errors.hpp"

namespace mothpose {

namespace {

constexpr double kMinRayAngleDeg = 0.1;
constexpr double kMaxConditionRatio = 1e8;

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

Eigen::Matrix<double, 3, 4> as_eigen(const CameraModel& cam) {
    Eigen::Matrix<double, 3, 4> p;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 4; ++c) p(r, c) = cam.at(r, c);
    return p;
}

Eigen::Vector3d center_of(const Eigen::Matrix<double, 3, 4>& p) {
    return -p.template leftCols<3>().inverse() * p.col(3);
}

double distance(const PosePoint& a, const PosePoint& b) {
    const double dx = a.position[0] - b.position[0];
    const double dy = a.position[1] - b.position[1];
    const double dz = a.position[2] - b.position[2];
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

} // namespace

void validate_camera(const CameraModel& cam) {
    for (double v : cam.projection)
        if (!std::isfinite(v)) throw DegenerateGeometry("camera matrix has non-finite entries");
    const Eigen::Matrix3d m = as_eigen(cam).leftCols<3>();
    Eigen::FullPivLU<Eigen::Matrix3d> lu(m);
    if (!lu.isInvertible())
        throw DegenerateGeometry("camera " + cam.camera_id +
                                 ": top-left 3x3 submatrix is singular");
}

CameraModel load_camera(const std::filesystem::path& path, std::string camera_id) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open calibration file " + path.string());
    std::vector<double> values;
    std::string line;
    while (std::getline(in, line)) {
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream row(line);
        double v = 0;
        while (row >> v) values.push_back(v);
        if (!row.eof())
            throw FormatError("calibration file " + path.string() + ": non-numeric token");
    }
    if (values.size() != 12)
        throw FormatError("calibration file " + path.string() + ": expected 12 numbers, found " +
                          std::to_string(values.size()));
    CameraModel cam;
    std::copy(values.begin(), values.end(), cam.projection.begin());
    cam.camera_id = camera_id.empty() ? path.stem().string() : std::move(camera_id);
    validate_camera(cam);
    return cam;
}

void save_camera(const CameraModel& cam, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write calibration file " + path.string());
    out << "# camera projection v1\n";
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 4; ++c) out << (c ? " " : "") << num(cam.at(r, c));
        out << '\n';
    }
    if (!out) throw IoError("failed writing " + path.string());
}

std::array<double, 3> camera_center(const CameraModel& cam) {
    validate_camera(cam);
    const Eigen::Vector3d c = center_of(as_eigen(cam));
    return {c(0), c(1), c(2)};
}

std::array<double, 3> triangulate(const std::array<double, 2>& p1, const std::array<double, 2>& p2,
                                  const CameraModel& cam1, const CameraModel& cam2) {
    validate_camera(cam1);
    validate_camera(cam2);
    const Eigen::Matrix<double, 3, 4> pr1 = as_eigen(cam1);
    const Eigen::Matrix<double, 3, 4> pr2 = as_eigen(cam2);

    const Eigen::Vector3d c1 = center_of(pr1);
    const Eigen::Vector3d c2 = center_of(pr2);
    const double span = std::max({1.0, c1.norm(), c2.norm()});
    if ((c1 - c2).norm() <= 1e-12 * span)
        throw DegenerateGeometry("zero baseline: the two camera centers coincide");

    // Undirected viewing-ray angle; rays within 0.1 degrees of parallel
    // leave the depth unconstrained.
    const Eigen::Vector3d d1 =
        (pr1.leftCols<3>().inverse() * Eigen::Vector3d(p1[0], p1[1], 1.0)).normalized();
    const Eigen::Vector3d d2 =
        (pr2.leftCols<3>().inverse() * Eigen::Vector3d(p2[0], p2[1], 1.0)).normalized();
    const double cos_angle = std::abs(d1.dot(d2));
    if (cos_angle > std::cos(kMinRayAngleDeg * std::numbers::pi / 180.0))
        throw DegenerateGeometry("viewing rays are nearly parallel");

    Eigen::Matrix4d a;
    a.row(0) = p1[0] * pr1.row(2) - pr1.row(0);
    a.row(1) = p1[1] * pr1.row(2) - pr1.row(1);
    a.row(2) = p2[0] * pr2.row(2) - pr2.row(0);
    a.row(3) = p2[1] * pr2.row(2) - pr2.row(1);
    for (int r = 0; r < 4; ++r) {
        const double norm = a.row(r).norm();
        if (norm == 0.0) throw DegenerateGeometry("degenerate projection constraint row");
        a.row(r) /= norm;
    }

    Eigen::JacobiSVD<Eigen::Matrix4d> svd(a, Eigen::ComputeFullV);
    const Eigen::Vector4d s = svd.singularValues();
    if (s(0) > kMaxConditionRatio * s(2))
        throw DegenerateGeometry("triangulation system is ill-conditioned");
    const Eigen::Vector4d v = svd.matrixV().col(3);
    if (std::abs(v(3)) <= 1e-12 * v.norm())
        throw DegenerateGeometry("triangulated point lies at infinity");
    return {v(0) / v(3), v(1) / v(3), v(2) / v(3)};
}

std::array<double, 2> reproject(const std::array<double, 3>& point, const CameraModel& cam) {
    const Eigen::Matrix<double, 3, 4> pr = as_eigen(cam);
    const Eigen::Vector4d x(point[0], point[1], point[2], 1.0);
    const Eigen::Vector3d h = pr * x;
    if (std::abs(h(2)) <= 1e-12 * std::max(1.0, pr.norm() * x.norm()))
        throw ProjectionError("point projects with zero homogeneous scale");
    return {h(0) / h(2), h(1) / h(2)};
}

Pose3D reconstruct_pose(const std::array<double, 8>& landmarks1,
                        const std::array<double, 8>& landmarks2, const CameraModel& cam1,
                        const CameraModel& cam2, std::int64_t time_index) {
    Pose3D pose;
    pose.time_index = time_index;
    for (int l = 0; l < 4; ++l) {
        const std::array<double, 2> p1 = {landmarks1[static_cast<std::size_t>(2 * l)],
                                          landmarks1[static_cast<std::size_t>(2 * l + 1)]};
        const std::array<double, 2> p2 = {landmarks2[static_cast<std::size_t>(2 * l)],
                                          landmarks2[static_cast<std::size_t>(2 * l + 1)]};
        try {
            const std::array<double, 3> x = triangulate(p1, p2, cam1, cam2);
            const std::array<double, 2> r1 = reproject(x, cam1);
            const std::array<double, 2> r2 = reproject(x, cam2);
            const double res1 = std::hypot(r1[0] - p1[0], r1[1] - p1[1]);
            const double res2 = std::hypot(r2[0] - p2[0], r2[1] - p2[1]);
            pose.points[static_cast<std::size_t>(l)] = {x, (res1 + res2) / 2.0, true};
        } catch (const DegenerateGeometry&) {
            pose.points[static_cast<std::size_t>(l)] = {};
        } catch (const ProjectionError&) {
            pose.points[static_cast<std::size_t>(l)] = {};
        }
    }
    return pose;
}

RatioMetrics ratio_metrics(const std::vector<Pose3D>& pred, const std::vector<Pose3D>& gt) {
    if (pred.size() != gt.size()) throw SizeError("pose sequences have different lengths");
    RatioMetrics metrics;
    double ha_sum = 0.0;
    double lr_sum = 0.0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        const bool valid = pred[i].complete() && gt[i].complete();
        const double ha_gt = valid ? distance(gt[i].points[0], gt[i].points[1]) : 0.0;
        const double lr_gt = valid ? distance(gt[i].points[2], gt[i].points[3]) : 0.0;
        if (!valid || ha_gt == 0.0 || lr_gt == 0.0) {
            std::cerr << "ratio_metrics: excluding frame " << gt[i].time_index
                      << (valid ? " (zero ground-truth distance)" : " (incomplete pose)") << '\n';
            ++metrics.frames_excluded;
            continue;
        }
        ha_sum += distance(pred[i].points[0], pred[i].points[1]) / ha_gt;
        lr_sum += distance(pred[i].points[2], pred[i].points[3]) / lr_gt;
        ++metrics.frames_used;
    }
    if (metrics.frames_used == 0) throw SizeError("no usable frames for ratio metrics");
    metrics.head_abdomen = ha_sum / static_cast<double>(metrics.frames_used);
    metrics.wing_wing = lr_sum / static_cast<double>(metrics.frames_used);
    return metrics;
}

void save_poses(const std::vector<Pose3D>& poses, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "frame_id,landmark,X,Y,Z,residual_px\n";
    for (const Pose3D& pose : poses)
        for (int l = 0; l < 4; ++l) {
            const PosePoint& pt = pose.points[static_cast<std::size_t>(l)];
            if (!pt.valid) continue;
            out << pose.time_index << ',' << kLandmarkNames[l] << ',' << num(pt.position[0])
                << ',' << num(pt.position[1]) << ',' << num(pt.position[2]) << ','
                << num(pt.residual_px) << '\n';
        }
    if (!out) throw IoError("failed writing " + path.string());
}

std::vector<Pose3D> load_poses(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw FormatError("empty pose file " + path.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "frame_id,landmark,X,Y,Z,residual_px")
        throw FormatError("unrecognized pose file header in " + path.string());

    std::unordered_map<std::string, int> landmark_index;
    for (int l = 0; l < 4; ++l) landmark_index[kLandmarkNames[l]] = l;

    std::vector<Pose3D> poses;
    std::unordered_map<std::int64_t, std::size_t> by_id;
    std::int64_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream row(line);
        std::string field;
        while (std::getline(row, field, ',')) fields.push_back(field);
        if (fields.size() != 6)
            throw ParseError("pose file line " + std::to_string(line_no) + ": expected 6 fields");
        try {
            const std::int64_t frame_id = std::stoll(fields[0]);
            const auto it = landmark_index.find(fields[1]);
            if (it == landmark_index.end())
                throw ParseError("pose file line " + std::to_string(line_no) +
                                 ": unknown landmark '" + fields[1] + "'");
            auto slot = by_id.find(frame_id);
            if (slot == by_id.end()) {
                poses.emplace_back();
                poses.back().time_index = frame_id;
                slot = by_id.emplace(frame_id, poses.size() - 1).first;
            }
            PosePoint& pt = poses[slot->second].points[static_cast<std::size_t>(it->second)];
            if (pt.valid)
                throw FormatError("pose file line " + std::to_string(line_no) +
                                  ": duplicate landmark for frame " + fields[0]);
            pt.position = {std::stod(fields[2]), std::stod(fields[3]), std::stod(fields[4])};
            pt.residual_px = std::stod(fields[5]);
            pt.valid = true;
        } catch (const std::logic_error&) {
            throw ParseError("pose file line " + std::to_string(line_no) + ": malformed number");
        }
    }
    return poses;
}

} // namespace mothpose
