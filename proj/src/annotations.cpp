#include "mothpose/annotations.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mothpose/rng.hpp"

namespace mothpose {

namespace {

constexpr const char* kHeader =
    "frame_id,image,head_x,head_y,abd_x,abd_y,lw_x,lw_y,rw_x,rw_y,"
    "occ_head,occ_abd,occ_lw,occ_rw,bbox_x,bbox_y,bbox_w,bbox_h";

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_num(const std::string& s, int line_no, const char* what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError("line " + std::to_string(line_no) + ": bad " + what + " value '" + s +
                         "'");
    }
}

bool parse_flag(const std::string& s, int line_no) {
    if (s == "0") return false;
    if (s == "1") return true;
    throw ParseError("line " + std::to_string(line_no) + ": occlusion flag must be 0 or 1, got '" +
                     s + "'");
}

void validate_frame(const AnnotatedFrame& f, int line_no) {
    const auto fail = [&](const std::string& why) {
        throw ValidationError("line " + std::to_string(line_no) + " (frame " +
                              std::to_string(f.frame_id) + "): " + why);
    };
    if (f.frame_id < 1) fail("frame ids are 1-based");
    for (int i = 0; i < kLandmarkCount; ++i) {
        const double x = f.landmark_x(i), y = f.landmark_y(i);
        if (!(x >= 0.0 && x < kNativeW) || !(y >= 0.0 && y < kNativeH))
            fail(std::string(kLandmarkNames[i]) + " coordinate outside the native frame");
    }
    if (!(f.bbox_w > 0.0 && f.bbox_h > 0.0)) fail("bounding box must have positive size");
    if (f.bbox_x < 0.0 || f.bbox_y < 0.0 || f.bbox_x + f.bbox_w > kNativeW ||
        f.bbox_y + f.bbox_h > kNativeH)
        fail("bounding box outside the native frame");
}

} // namespace

std::vector<AnnotatedFrame> load_annotations(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open annotations " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty annotations file " + path.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kHeader)
        throw ParseError("bad annotations header (want '" + std::string(kHeader) + "')");

    std::vector<AnnotatedFrame> frames;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_fields(line);
        if (fields.size() != 18)
            throw ParseError("line " + std::to_string(line_no) + ": expected 18 fields, got " +
                             std::to_string(fields.size()));
        AnnotatedFrame f;
        f.frame_id = static_cast<std::int64_t>(parse_num(fields[0], line_no, "frame_id"));
        f.image_ref = fields[1];
        for (int i = 0; i < 8; ++i)
            f.landmarks[static_cast<std::size_t>(i)] =
                parse_num(fields[static_cast<std::size_t>(2 + i)], line_no, "landmark");
        for (int i = 0; i < 4; ++i)
            f.occluded[static_cast<std::size_t>(i)] =
                parse_flag(fields[static_cast<std::size_t>(10 + i)], line_no);
        f.bbox_x = parse_num(fields[14], line_no, "bbox_x");
        f.bbox_y = parse_num(fields[15], line_no, "bbox_y");
        f.bbox_w = parse_num(fields[16], line_no, "bbox_w");
        f.bbox_h = parse_num(fields[17], line_no, "bbox_h");
        validate_frame(f, line_no);
        frames.push_back(std::move(f));
    }

    std::sort(frames.begin(), frames.end(),
              [](const AnnotatedFrame& a, const AnnotatedFrame& b) { return a.frame_id < b.frame_id; });
    for (std::size_t i = 1; i < frames.size(); ++i)
        if (frames[i].frame_id == frames[i - 1].frame_id)
            throw ValidationError("duplicate frame id " + std::to_string(frames[i].frame_id));
    return frames;
}

void save_annotations(const std::vector<AnnotatedFrame>& frames,
                      const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write annotations " + path.string());
    out << kHeader << '\n';
    char buf[64];
    const auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    for (const AnnotatedFrame& f : frames) {
        out << f.frame_id << ',' << f.image_ref;
        for (double v : f.landmarks) out << ',' << num(v);
        for (bool o : f.occluded) out << ',' << (o ? 1 : 0);
        out << ',' << num(f.bbox_x) << ',' << num(f.bbox_y) << ',' << num(f.bbox_w) << ','
            << num(f.bbox_h) << '\n';
    }
    if (!out) throw IoError("annotation write failed: " + path.string());
}

Split split(const std::vector<AnnotatedFrame>& frames, const SplitStrategy& strategy) {
    const std::int64_t n = static_cast<std::int64_t>(frames.size());
    Split out;
    switch (strategy.kind) {
    case SplitKind::FirstHalf: {
        const std::int64_t train_n = (n + 1) / 2;
        out.train.assign(frames.begin(), frames.begin() + train_n);
        out.test.assign(frames.begin() + train_n, frames.end());
        break;
    }
    case SplitKind::Interleaved: {
        for (const AnnotatedFrame& f : frames)
            (f.frame_id % 2 == 1 ? out.train : out.test).push_back(f);
        break;
    }
    case SplitKind::RandomK: {
        if (strategy.train_k < 1) throw SizeError("random split needs train_k >= 1");
        if (strategy.train_k + strategy.test_k > n)
            throw SizeError("train_k + test_k exceeds the frame count");
        std::vector<std::int64_t> order(static_cast<std::size_t>(n));
        for (std::int64_t i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
        Rng rng(strategy.seed);
        for (std::int64_t i = n - 1; i > 0; --i)
            std::swap(order[static_cast<std::size_t>(i)],
                      order[static_cast<std::size_t>(rng.uniform_int(0, i))]);
        for (std::int64_t i = 0; i < strategy.test_k; ++i)
            out.test.push_back(frames[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
        for (std::int64_t i = 0; i < strategy.train_k; ++i)
            out.train.push_back(frames[static_cast<std::size_t>(
                order[static_cast<std::size_t>(strategy.test_k + i)])]);
        const auto by_id = [](const AnnotatedFrame& a, const AnnotatedFrame& b) {
            return a.frame_id < b.frame_id;
        };
        std::sort(out.train.begin(), out.train.end(), by_id);
        std::sort(out.test.begin(), out.test.end(), by_id);
        break;
    }
    }
    return out;
}

} // namespace mothpose
