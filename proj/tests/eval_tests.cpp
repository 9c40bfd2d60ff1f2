#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "mothpose/eval.hpp"
#include "mothpose/nn/init.hpp"

using namespace mothpose;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* name) {
    const fs::path dir = fs::temp_directory_path() / "mothpose_eval_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// Identity network: (n,8,1,1) in, the same 8 numbers out. Makes expected
// losses exact hand arithmetic.
struct IdentityNet {
    nn::NetworkSpec net;
    nn::Parameters params;

    IdentityNet() {
        net.input = {8, 1, 1};
        net.layers = {{nn::FullyConnectedSpec{8}, "out", 1.0, 1.0, nn::ConstantInit{0.0}}};
        params = nn::init_params(net, 1);
        for (int i = 0; i < 8; ++i) params.layers[0]->weights(i, i, 0, 0) = 1.0;
    }
};

AnnotatedFrame frame_at(const std::array<double, 8>& landmarks) {
    AnnotatedFrame f;
    f.landmarks = landmarks;
    return f;
}

} // namespace

TEST_CASE("test loss is the mean squared distance to the labels") {
    const IdentityNet id;
    Tensor4 data(2, 8, 1, 1);
    for (std::int64_t i = 0; i < 16; ++i) data.flat()[static_cast<std::size_t>(i)] = 3.0 + i;
    Tensor4 labels = data;
    CHECK(test_loss(id.net, id.params, data, labels) == 0.0);

    // One sample off by (3,4) on one landmark: squared distance 25.
    labels(1, 2, 0, 0) -= 3.0;
    labels(1, 3, 0, 0) -= 4.0;
    CHECK(test_loss(id.net, id.params, data, labels) == 12.5); // mean over 2 samples
    Tensor4 single(1, 8, 1, 1);
    std::copy_n(data.sample(1), 8, single.data());
    Tensor4 single_label(1, 8, 1, 1);
    std::copy_n(labels.sample(1), 8, single_label.data());
    CHECK(test_loss(id.net, id.params, single, single_label) == 25.0);
}

TEST_CASE("test loss is chunking-invariant and validates its inputs") {
    const IdentityNet id;
    Tensor4 data(5, 8, 1, 1);
    for (std::size_t i = 0; i < data.flat().size(); ++i)
        data.flat()[i] = 0.37 * static_cast<double>(i);
    Tensor4 labels(5, 8, 1, 1, 1.5);
    const double whole = test_loss(id.net, id.params, data, labels, 100);
    CHECK(test_loss(id.net, id.params, data, labels, 2) == whole);
    CHECK(test_loss(id.net, id.params, data, labels, 1) == whole);

    CHECK_THROWS_AS(test_loss(id.net, id.params, Tensor4(), Tensor4()), SizeError);
    CHECK_THROWS_AS(test_loss(id.net, id.params, data, Tensor4(4, 8, 1, 1)), ShapeError);
    CHECK_THROWS_AS(test_loss(id.net, id.params, data, labels, 0), SizeError);
}

TEST_CASE("map_to_native inverts the crop/resize affine") {
    CropSpec crop;
    crop.origin_x = 100.0;
    crop.origin_y = 100.0;

    std::array<double, 8> pred{};
    auto native = map_to_native(pred, crop);
    CHECK(native[0] == 100.0);
    CHECK(native[1] == 100.0);

    pred.fill(112.0);
    native = map_to_native(pred, crop);
    CHECK(native[0] == 400.0); // 100 + 112*600/224
    CHECK(native[1] == 300.0); // 100 + 112*400/224

    // Inverse pair with the forward label map, including rotation/scale.
    CropSpec spun = crop;
    spun.pre_crop_rotation_deg = 17.5;
    spun.pre_crop_scale = 1.2;
    spun.center_x = 390.0;
    spun.center_y = 310.0;
    const std::array<double, 8> landmarks = {400.0, 250.0, 380.0, 340.0,
                                             300.0, 280.0, 500.0, 285.0};
    const auto round = map_to_native(transform_landmarks(landmarks, spun), spun);
    for (int i = 0; i < 8; ++i) CHECK(round[i] == doctest::Approx(landmarks[i]).epsilon(1e-12));
}

TEST_CASE("per-landmark MAE averages Euclidean errors over retained frames") {
    std::array<double, 8> base = {100, 100, 200, 200, 300, 300, 400, 400};
    std::vector<AnnotatedFrame> gts = {frame_at(base), frame_at(base)};
    std::vector<std::array<double, 8>> preds = {base, base};

    auto zero = mae_per_landmark(preds, gts, OcclusionMode::IncludeAll);
    CHECK(zero.total_mae == 0.0);
    CHECK(zero.frames_evaluated == 2);
    CHECK(zero.occlusion_excluded == 0);

    // Head errors 3 and 5 -> head MAE 4; everything else untouched.
    preds[0][0] += 3.0;
    preds[1][0] += 3.0;
    preds[1][1] += 4.0;
    auto r = mae_per_landmark(preds, gts, OcclusionMode::IncludeAll);
    CHECK(r.mae[0] == 4.0);
    CHECK(r.mae[1] == 0.0);
    CHECK(r.mae[2] == 0.0);
    CHECK(r.mae[3] == 0.0);
    CHECK(r.total_mae == 4.0);
}

TEST_CASE("total MAE is the sum of the per-landmark MAEs") {
    Rng rng(12);
    std::vector<AnnotatedFrame> gts;
    std::vector<std::array<double, 8>> preds;
    for (int i = 0; i < 7; ++i) {
        std::array<double, 8> gt{}, pred{};
        for (int k = 0; k < 8; ++k) {
            gt[static_cast<std::size_t>(k)] = rng.uniform(50.0, 700.0);
            pred[static_cast<std::size_t>(k)] =
                gt[static_cast<std::size_t>(k)] + rng.uniform(-20.0, 20.0);
        }
        gts.push_back(frame_at(gt));
        preds.push_back(pred);
    }
    const auto r = mae_per_landmark(preds, gts, OcclusionMode::IncludeAll);
    CHECK(r.total_mae ==
          doctest::Approx(r.mae[0] + r.mae[1] + r.mae[2] + r.mae[3]).epsilon(1e-15));
    for (double m : r.mae) CHECK(m >= 0.0);
}

TEST_CASE("occlusion filtering drops whole frames and keeps the counts consistent") {
    std::array<double, 8> base = {100, 100, 200, 200, 300, 300, 400, 400};
    std::vector<AnnotatedFrame> gts(5, frame_at(base));
    gts[1].occluded[3] = true;
    gts[4].occluded[0] = true;
    std::vector<std::array<double, 8>> preds(5, base);
    preds[1][0] += 100.0; // large error hidden behind the occlusion flag
    preds[4][0] += 100.0;
    preds[2][0] += 6.0;

    const auto excl = mae_per_landmark(preds, gts, OcclusionMode::ExcludeOccludedFrames);
    CHECK(excl.frames_evaluated == 3);
    CHECK(excl.occlusion_excluded == 2);
    CHECK(excl.frames_evaluated + excl.occlusion_excluded == 5);
    CHECK(excl.mae[0] == 2.0); // only the 6 px error, averaged over 3 frames

    const auto incl = mae_per_landmark(preds, gts, OcclusionMode::IncludeAll);
    CHECK(incl.frames_evaluated == 5);
    CHECK(incl.occlusion_excluded == 0);
    CHECK(incl.mae[0] == doctest::Approx((100.0 + 100.0 + 6.0) / 5.0));

    std::vector<AnnotatedFrame> all_occ(2, frame_at(base));
    all_occ[0].occluded[0] = all_occ[1].occluded[2] = true;
    std::vector<std::array<double, 8>> two(2, base);
    CHECK_THROWS_AS(mae_per_landmark(two, all_occ, OcclusionMode::ExcludeOccludedFrames),
                    SizeError);
    CHECK_THROWS_AS(mae_per_landmark({}, {}, OcclusionMode::IncludeAll), SizeError);
    CHECK_THROWS_AS(mae_per_landmark(preds, {gts[0]}, OcclusionMode::IncludeAll), SizeError);
}

TEST_CASE("anisotropic crops make native MAE differ from scaled 224-space MAE") {
    // One frame, one landmark error of (5,5) px in 224 space.
    CropSpec aniso; // 600x400 -> 224x224: x and y scale differently
    aniso.origin_x = 50.0;
    aniso.origin_y = 60.0;
    const std::array<double, 8> gt224 = {50, 50, 100, 100, 150, 150, 200, 200};
    std::array<double, 8> pred224 = gt224;
    pred224[0] += 5.0;
    pred224[1] += 5.0;

    const std::vector<AnnotatedFrame> gts = {frame_at(map_to_native(gt224, aniso))};
    const auto native =
        mae_per_landmark({map_to_native(pred224, aniso)}, gts, OcclusionMode::IncludeAll);
    const double mae224 = std::hypot(5.0, 5.0);

    // Anisotropic: no single scalar relates the two (x scales by 600/224,
    // y by 400/224).
    const double sx = 600.0 / 224.0, sy = 400.0 / 224.0;
    CHECK(native.mae[0] == doctest::Approx(std::hypot(5.0 * sx, 5.0 * sy)));
    CHECK(native.mae[0] != doctest::Approx(mae224 * sx).epsilon(1e-6));
    CHECK(native.mae[0] != doctest::Approx(mae224 * sy).epsilon(1e-6));

    // Isotropic 400x400 crop: native MAE is exactly the scaled 224 MAE.
    CropSpec iso = aniso;
    iso.crop_w = 400.0;
    iso.crop_h = 400.0;
    const std::vector<AnnotatedFrame> iso_gts = {frame_at(map_to_native(gt224, iso))};
    const auto iso_native =
        mae_per_landmark({map_to_native(pred224, iso)}, iso_gts, OcclusionMode::IncludeAll);
    CHECK(iso_native.mae[0] == doctest::Approx(mae224 * 400.0 / 224.0).epsilon(1e-12));
}

TEST_CASE("emit_report writes the CSVs and a plausible SVG") {
    const fs::path dir = temp_dir("report");
    EvalResult result;
    result.test_loss = 142.7;
    result.mae = {3.5, 2.25, 4.0, 1.25};
    result.total_mae = 11.0;
    result.frames_evaluated = 210;
    result.occlusion_excluded = 11;
    nn::LossHistory history;
    for (int i = 1; i <= 5; ++i)
        history.push_back({200 * i, 1000.0 / i, i % 2 ? 1200.0 / i : std::nan("")});

    emit_report(result, history, dir / "out");

    std::ifstream mae(dir / "out" / "mae.csv");
    REQUIRE(mae.good());
    std::string line;
    std::getline(mae, line);
    CHECK(line == "landmark,mae_px,n_frames");
    std::vector<std::string> rows;
    while (std::getline(mae, line))
        if (!line.empty()) rows.push_back(line);
    REQUIRE(rows.size() == 5);
    CHECK(rows[0] == "head,3.5,210");
    CHECK(rows[4] == "total,11,210");

    const auto curve = nn::read_loss_history(dir / "out" / "loss_curve.csv");
    REQUIRE(curve.size() == 5);
    CHECK(curve[2].iteration == 600);
    CHECK(curve[2].train_loss == 1000.0 / 3);

    std::ifstream svg_in(dir / "out" / "report.svg");
    REQUIRE(svg_in.good());
    std::string svg((std::istreambuf_iterator<char>(svg_in)), std::istreambuf_iterator<char>());
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(svg.find("Per-landmark MAE") != std::string::npos);
    CHECK(svg.find("polyline") != std::string::npos);

    // Unwritable target: a path under a regular file.
    std::ofstream(dir / "blocker") << "x";
    CHECK_THROWS_AS(emit_report(result, history, dir / "blocker" / "sub"), IoError);
}

TEST_CASE("prediction files round-trip bit-exactly") {
    const fs::path dir = temp_dir("predictions");
    const std::vector<FramePrediction> preds = {
        {7, {0.1, -2.5, 1.0 / 3.0, 601.25, 1e-300, 799.5, 3.14159265358979312, 0.0}},
        {12, {123.0, 456.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0}},
    };
    save_predictions(preds, dir / "p.csv");

    std::ifstream in(dir / "p.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header ==
          "frame_id,head_x,head_y,abdomen_x,abdomen_y,left_wing_x,left_wing_y,"
          "right_wing_x,right_wing_y");
    CHECK(load_predictions(dir / "p.csv") == preds);

    // Header-only file: no frames annotated, no predictions.
    save_predictions({}, dir / "empty.csv");
    CHECK(load_predictions(dir / "empty.csv").empty());
}

TEST_CASE("prediction loading rejects foreign or damaged files") {
    const fs::path dir = temp_dir("bad_predictions");
    CHECK_THROWS_AS(load_predictions(dir / "absent.csv"), IoError);

    std::ofstream(dir / "junk.csv") << "x,y\n1,2\n";
    CHECK_THROWS_AS(load_predictions(dir / "junk.csv"), FormatError);

    save_predictions({{1, {}}}, dir / "short.csv");
    std::ofstream(dir / "short.csv", std::ios::app) << "2,1,2,3\n";
    CHECK_THROWS_AS(load_predictions(dir / "short.csv"), ParseError);

    save_predictions({{1, {}}}, dir / "long.csv");
    std::ofstream(dir / "long.csv", std::ios::app) << "2,1,2,3,4,5,6,7,8,9\n";
    CHECK_THROWS_AS(load_predictions(dir / "long.csv"), ParseError);
}
