#include "mothpose/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "mothpose/errors.hpp"

namespace mothpose {

namespace {

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Short fixed-point form for SVG coordinates and labels.
std::string svg_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

} // namespace

double test_loss(const nn::NetworkSpec& net, const nn::Parameters& params, const Tensor4& data,
                 const Tensor4& labels, std::int64_t chunk_size) {
    if (data.n() < 1) throw SizeError("test loss needs at least one sample");
    if (data.n() != labels.n()) throw ShapeError("test data/label counts differ");
    if (chunk_size < 1) throw SizeError("evaluation chunk size must be >= 1");

    double sum = 0.0;
    for (std::int64_t first = 0; first < data.n(); first += chunk_size) {
        const std::int64_t m = std::min(chunk_size, data.n() - first);
        Tensor4 chunk(m, data.c(), data.h(), data.w());
        std::copy_n(data.sample(first), m * data.sample_size(), chunk.data());
        const Tensor4 pred = nn::predict(net, params, chunk);
        if (pred.sample_size() != labels.sample_size())
            throw ShapeError("network output size does not match the labels");
        for (std::int64_t j = 0; j < m; ++j) {
            const double* p = pred.sample(j);
            const double* t = labels.sample(first + j);
            for (std::int64_t k = 0; k < pred.sample_size(); ++k) {
                const double d = p[k] - t[k];
                sum += d * d;
            }
        }
    }
    return sum / static_cast<double>(data.n());
}

std::array<double, 8> map_to_native(const std::array<double, 8>& pred_224, const CropSpec& crop) {
    return invert_landmarks(pred_224, crop);
}

EvalResult mae_per_landmark(const std::vector<std::array<double, 8>>& preds_native,
                            const std::vector<AnnotatedFrame>& gts, OcclusionMode mode) {
    if (preds_native.size() != gts.size())
        throw SizeError("prediction and ground-truth lists have different lengths");
    EvalResult result;
    std::array<double, 4> sums{};
    for (std::size_t i = 0; i < gts.size(); ++i) {
        if (mode == OcclusionMode::ExcludeOccludedFrames && gts[i].any_occluded()) {
            ++result.occlusion_excluded;
            continue;
        }
        for (int l = 0; l < 4; ++l) {
            const double dx = preds_native[i][static_cast<std::size_t>(2 * l)] - gts[i].landmark_x(l);
            const double dy =
                preds_native[i][static_cast<std::size_t>(2 * l + 1)] - gts[i].landmark_y(l);
            sums[static_cast<std::size_t>(l)] += std::hypot(dx, dy);
        }
        ++result.frames_evaluated;
    }
    if (result.frames_evaluated == 0) throw SizeError("no frames retained for evaluation");
    for (int l = 0; l < 4; ++l) {
        result.mae[static_cast<std::size_t>(l)] =
            sums[static_cast<std::size_t>(l)] / static_cast<double>(result.frames_evaluated);
        result.total_mae += result.mae[static_cast<std::size_t>(l)];
    }
    return result;
}

namespace {

void write_mae_csv(const EvalResult& result, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "landmark,mae_px,n_frames\n";
    for (int l = 0; l < 4; ++l)
        out << kLandmarkNames[static_cast<std::size_t>(l)] << ','
            << num(result.mae[static_cast<std::size_t>(l)]) << ',' << result.frames_evaluated
            << '\n';
    out << "total," << num(result.total_mae) << ',' << result.frames_evaluated << '\n';
    if (!out) throw IoError("failed writing " + path.string());
}

// One self-contained SVG: MAE bars on the left, loss curves on the right.
void write_report_svg(const EvalResult& result, const nn::LossHistory& history,
                      const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"960\" height=\"420\" "
           "viewBox=\"0 0 960 420\">\n"
           "<style>text{font-family:sans-serif;font-size:12px;fill:#333}</style>\n"
           "<rect width=\"960\" height=\"420\" fill=\"#ffffff\"/>\n";

    // MAE panel: bars over [40, 440], baseline y=360.
    out << "<text x=\"40\" y=\"28\" font-size=\"14\">Per-landmark MAE (native px)</text>\n";
    const double mae_max = std::max(result.total_mae > 0.0
                                        ? *std::max_element(result.mae.begin(), result.mae.end())
                                        : 0.0,
                                    1e-12);
    for (int l = 0; l < 4; ++l) {
        const double v = result.mae[static_cast<std::size_t>(l)];
        const double h = 300.0 * v / mae_max;
        const double x = 60.0 + 100.0 * l;
        out << "<rect x=\"" << svg_num(x) << "\" y=\"" << svg_num(360.0 - h)
            << "\" width=\"60\" height=\"" << svg_num(h) << "\" fill=\"#4878a8\"/>\n"
            << "<text x=\"" << svg_num(x) << "\" y=\"378\">"
            << kLandmarkNames[static_cast<std::size_t>(l)] << "</text>\n"
            << "<text x=\"" << svg_num(x) << "\" y=\"" << svg_num(352.0 - h) << "\">" << svg_num(v)
            << "</text>\n";
    }
    out << "<line x1=\"40\" y1=\"360\" x2=\"460\" y2=\"360\" stroke=\"#333\"/>\n"
        << "<text x=\"40\" y=\"404\">total " << svg_num(result.total_mae) << " px over "
        << result.frames_evaluated << " frames (" << result.occlusion_excluded
        << " excluded)</text>\n";

    // Loss panel: curves over x in [520, 920], y in [60, 360].
    out << "<text x=\"520\" y=\"28\" font-size=\"14\">Loss history (224-space)</text>\n";
    if (!history.empty()) {
        double loss_max = 0.0;
        for (const auto& rec : history) {
            if (std::isfinite(rec.train_loss)) loss_max = std::max(loss_max, rec.train_loss);
            if (std::isfinite(rec.test_loss)) loss_max = std::max(loss_max, rec.test_loss);
        }
        loss_max = std::max(loss_max, 1e-12);
        const double it_lo = static_cast<double>(history.front().iteration);
        const double it_hi = static_cast<double>(history.back().iteration);
        const double it_span = std::max(it_hi - it_lo, 1.0);
        const auto px = [&](double it) { return 520.0 + 400.0 * (it - it_lo) / it_span; };
        const auto py = [&](double loss) { return 360.0 - 300.0 * loss / loss_max; };

        for (const bool is_test : {false, true}) {
            std::string points;
            for (const auto& rec : history) {
                const double v = is_test ? rec.test_loss : rec.train_loss;
                if (!std::isfinite(v)) continue;
                points += svg_num(px(static_cast<double>(rec.iteration))) + "," +
                          svg_num(py(v)) + " ";
            }
            if (points.empty()) continue;
            out << "<polyline fill=\"none\" stroke=\"" << (is_test ? "#d07830" : "#4878a8")
                << "\" stroke-width=\"1.5\" points=\"" << points << "\"/>\n";
        }
        out << "<line x1=\"520\" y1=\"360\" x2=\"920\" y2=\"360\" stroke=\"#333\"/>\n"
            << "<line x1=\"520\" y1=\"60\" x2=\"520\" y2=\"360\" stroke=\"#333\"/>\n"
            << "<text x=\"520\" y=\"378\">iteration " << history.front().iteration << " .. "
            << history.back().iteration << "</text>\n"
            << "<text x=\"524\" y=\"56\">" << svg_num(loss_max) << "</text>\n"
            << "<text x=\"700\" y=\"404\" fill=\"#4878a8\">train</text>\n"
            << "<text x=\"760\" y=\"404\" fill=\"#d07830\">test</text>\n";
    } else {
        out << "<text x=\"520\" y=\"60\">(no loss history)</text>\n";
    }
    if (std::isfinite(result.test_loss))
        out << "<text x=\"520\" y=\"420\">final test loss " << svg_num(result.test_loss)
            << "</text>\n";
    out << "</svg>\n";
    if (!out) throw IoError("failed writing " + path.string());
}

} // namespace

void emit_report(const EvalResult& result, const nn::LossHistory& history,
                 const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create report directory " + dir.string());
    write_mae_csv(result, dir / "mae.csv");
    nn::write_loss_history(history, dir / "loss_curve.csv");
    write_report_svg(result, history, dir / "report.svg");
}

namespace {
constexpr const char* kPredictionHeader =
    "frame_id,head_x,head_y,abdomen_x,abdomen_y,left_wing_x,left_wing_y,right_wing_x,"
    "right_wing_y";
}

void save_predictions(const std::vector<FramePrediction>& preds,
                      const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << kPredictionHeader << '\n';
    for (const FramePrediction& p : preds) {
        out << p.frame_id;
        for (double v : p.landmarks) out << ',' << num(v);
        out << '\n';
    }
    if (!out) throw IoError("failed writing " + path.string());
}

std::vector<FramePrediction> load_predictions(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw FormatError("empty predictions file " + path.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kPredictionHeader)
        throw FormatError("unrecognized predictions header in " + path.string());
    std::vector<FramePrediction> preds;
    std::int64_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        for (char& ch : line)
            if (ch == ',') ch = ' ';
        std::istringstream row(line);
        FramePrediction p;
        row >> p.frame_id;
        for (double& v : p.landmarks) row >> v;
        if (!row)
            throw ParseError("predictions line " + std::to_string(line_no) +
                             ": expected frame id plus 8 coordinates");
        double extra = 0.0;
        if (row >> extra)
            throw ParseError("predictions line " + std::to_string(line_no) + ": trailing fields");
        preds.push_back(p);
    }
    return preds;
}

} // namespace mothpose
