// Command-line front end: synth -> augment -> train -> annotate ->
// evaluate / triangulate / report. Every subcommand records its resolved
// configuration as out-dir/manifest.txt. Exit codes: 0 success, 1 training
// divergence (or a triangulation run yielding no valid point), 2 bad input.
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mothpose/annotations.hpp"
#include "mothpose/augment.hpp"
#include "mothpose/camera.hpp"
#include "mothpose/dataset.hpp"
#include "mothpose/errors.hpp"
#include "mothpose/eval.hpp"
#include "mothpose/image.hpp"
#include "mothpose/nn/init.hpp"
#include "mothpose/nn/spec.hpp"
#include "mothpose/nn/trainer.hpp"
#include "mothpose/synthetic.hpp"

namespace fs = std::filesystem;
using namespace mothpose;

namespace {

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

// Resolved configuration of the invoked subcommand, defaults included.
void write_manifest(CLI::App& sub, const fs::path& out_dir) {
    ensure_dir(out_dir);
    const fs::path path = out_dir / "manifest.txt";
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "command=" << sub.get_name() << "\n" << sub.config_to_str(true, false);
    if (!out) throw IoError("error while writing " + path.string());
}

nn::NetworkSpec make_arch(const std::string& arch) {
    const std::string pre = "vgg-", post = "-fc8";
    if (arch.size() > pre.size() + post.size() && arch.compare(0, pre.size(), pre) == 0 &&
        arch.compare(arch.size() - post.size(), post.size(), post) == 0) {
        const std::string mid = arch.substr(pre.size(), arch.size() - pre.size() - post.size());
        if (!mid.empty() && mid.find_first_not_of("0123456789") == std::string::npos &&
            mid.size() <= 2) {
            return nn::build_vgg_x_fc(std::stoi(mid), 8);
        }
    }
    throw ValidationError("unknown architecture '" + arch + "' (expected vgg-{2,4,7,10,13}-fc8)");
}

AugmentKind parse_da(const std::string& da) {
    if (da == "none") return AugmentKind::None;
    if (da == "t") return AugmentKind::Translate;
    if (da == "tr") return AugmentKind::TranslateRotate;
    if (da == "ts") return AugmentKind::TranslateScale;
    throw ValidationError("unknown augmentation scheme '" + da + "'");
}

// ---------------------------------------------------------------- synth --

struct SynthArgs {
    std::string out_dir;
    SynthConfig cfg;
    bool rig = false;
};

int run_synth(CLI::App& sub, const SynthArgs& a) {
    write_manifest(sub, a.out_dir);
    const auto frames = write_synth_dataset(a.cfg, a.out_dir);
    std::cout << "synth: wrote " << frames.size() << " frames and annotations.csv to "
              << a.out_dir << "\n";
    if (a.rig) {
        const TwoViewFixture fx = synth_two_view_track(a.cfg.frame_count, a.cfg.rng_seed);
        save_camera(fx.cam1, fs::path(a.out_dir) / "cam1.txt");
        save_camera(fx.cam2, fs::path(a.out_dir) / "cam2.txt");
        std::vector<FramePrediction> v1, v2;
        for (std::size_t i = 0; i < fx.gt_poses.size(); ++i) {
            v1.push_back({fx.gt_poses[i].time_index, fx.view1[i]});
            v2.push_back({fx.gt_poses[i].time_index, fx.view2[i]});
        }
        save_predictions(v1, fs::path(a.out_dir) / "view1.csv");
        save_predictions(v2, fs::path(a.out_dir) / "view2.csv");
        save_poses(fx.gt_poses, fs::path(a.out_dir) / "gt_poses.csv");
        std::cout << "synth: wrote two-camera rig (cam1.txt, cam2.txt, view1.csv, view2.csv, "
                     "gt_poses.csv)\n";
    }
    return 0;
}

// -------------------------------------------------------------- augment --

struct AugmentArgs {
    std::string data_dir, out_dir;
    std::string annotations; // default <data-dir>/annotations.csv
    std::string da = "t";
    std::int64_t nts = 200000;
    std::uint64_t seed = 0;
    std::string split = "first-half";
    std::int64_t train_k = 0, test_k = 200;
    std::uint64_t split_seed = 0;
    int out_size = 224, crop_w = 600, crop_h = 400;
    double rot_min = -45.0, rot_max = 45.0, scale_min = 0.5, scale_max = 1.5;
    std::int64_t per_file = 1000, group_size = 1000;
};

int run_augment(CLI::App& sub, const AugmentArgs& a) {
    write_manifest(sub, a.out_dir);
    const fs::path data_dir = a.data_dir;
    const fs::path out_dir = a.out_dir;
    const fs::path ann = a.annotations.empty() ? data_dir / "annotations.csv"
                                               : fs::path(a.annotations);
    const auto frames = load_annotations(ann);

    Split sp;
    if (a.split == "none") {
        sp.train = frames;
    } else {
        SplitStrategy strat;
        if (a.split == "first-half") strat.kind = SplitKind::FirstHalf;
        else if (a.split == "interleaved") strat.kind = SplitKind::Interleaved;
        else if (a.split == "random-k") strat.kind = SplitKind::RandomK;
        else throw ValidationError("unknown split '" + a.split + "'");
        strat.train_k = a.train_k;
        strat.test_k = a.test_k;
        strat.seed = a.split_seed;
        sp = split(frames, strat);
    }
    save_annotations(sp.train, out_dir / "train_annotations.csv");
    save_annotations(sp.test, out_dir / "test_annotations.csv");

    const ImageLoader loader = file_image_loader(data_dir);
    const auto means = compute_channel_means(sp.train, loader);
    save_channel_means(means, out_dir / "means.txt");

    AugmentScheme scheme;
    scheme.kind = parse_da(a.da);
    scheme.target_total = a.nts;
    scheme.rng_seed = a.seed;
    scheme.rotation_min_deg = a.rot_min;
    scheme.rotation_max_deg = a.rot_max;
    scheme.scale_min = a.scale_min;
    scheme.scale_max = a.scale_max;
    scheme.crop_w = a.crop_w;
    scheme.crop_h = a.crop_h;
    scheme.out_w = scheme.out_h = a.out_size;

    BatchWriter writer(out_dir / "train", a.per_file);
    std::vector<SampleCrop> crops;
    const auto total = augment_dataset(
        sp.train, scheme, loader,
        [&](std::int64_t i, const Sample& s) {
            writer.add(preprocess(s.image, means), s.label);
            crops.push_back({i, s.frame_id, s.crop});
        },
        a.group_size);
    writer.finish();
    save_crop_specs(crops, out_dir / "train" / "crops.csv");
    std::cout << "augment: wrote " << total << " training samples to " << (out_dir / "train")
              << "\n";

    if (!sp.test.empty()) {
        CropSpec base;
        base.crop_w = a.crop_w;
        base.crop_h = a.crop_h;
        base.out_w = base.out_h = a.out_size;
        BatchWriter test_writer(out_dir / "test", a.per_file);
        std::vector<SampleCrop> test_crops;
        for (std::size_t i = 0; i < sp.test.size(); ++i) {
            const AnnotatedFrame& f = sp.test[i];
            const CropSpec crop = centered_test_crop(f, base);
            const Tensor4 img = loader(f);
            test_writer.add(preprocess(transform_image(img, crop), means),
                            transform_landmarks(f.landmarks, crop));
            test_crops.push_back({static_cast<std::int64_t>(i), f.frame_id, crop});
        }
        test_writer.finish();
        save_crop_specs(test_crops, out_dir / "test" / "crops.csv");
        std::cout << "augment: wrote " << sp.test.size() << " test samples to "
                  << (out_dir / "test") << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------- train --

struct TrainArgs {
    std::string data_dir, out_dir;
    std::string arch = "vgg-7-fc8";
    double blr = 1e-12;
    double vgg_lrm = 0.0, fc_lrm = 100.0;
    bool finetune = false;
    std::string pretrained;
    std::string conv_init = "pretrained";
    std::int64_t iters = 10000, batch = 32;
    std::uint64_t seed = 0;
    double momentum = 0.0, lr_decay = 1.0;
    std::int64_t lr_decay_every = 0, snapshot_every = 0;
    std::int64_t log_every = 200, test_eval_every = 500;
};

int run_train(CLI::App& sub, const TrainArgs& a) {
    write_manifest(sub, a.out_dir);
    const fs::path data_dir = a.data_dir;
    const fs::path out_dir = a.out_dir;
    const fs::path train_dir = fs::exists(data_dir / "train") ? data_dir / "train" : data_dir;

    DiskBatchSource batches(train_dir, a.batch);
    nn::NetworkSpec net = make_arch(a.arch);
    net.input = {static_cast<int>(batches.sample_channels()),
                 static_cast<int>(batches.sample_height()),
                 static_cast<int>(batches.sample_width())};

    double vgg_lrm = a.vgg_lrm;
    if (a.finetune && vgg_lrm == 0.0) vgg_lrm = 1.0;
    for (auto& layer : net.layers) {
        if (layer.name.rfind("conv", 0) == 0) {
            layer.weight_lr_multiplier = vgg_lrm;
            layer.bias_lr_multiplier = vgg_lrm;
            if (a.conv_init == "xavier") layer.init = nn::XavierInit{};
        } else if (layer.name == "fc8") {
            layer.weight_lr_multiplier = a.fc_lrm;
            layer.bias_lr_multiplier = a.fc_lrm;
        }
    }
    std::optional<nn::NamedParams> archive;
    if (!a.pretrained.empty()) archive = load_weight_archive(a.pretrained);
    if (a.conv_init == "pretrained" && !archive)
        throw ValidationError("--conv-init pretrained requires --pretrained <archive>");
    nn::Parameters params = nn::init_params(net, a.seed, archive ? &*archive : nullptr);

    nn::TrainConfig cfg;
    cfg.base_learning_rate = a.blr;
    cfg.batch_size = a.batch;
    cfg.iterations = a.iters;
    cfg.train_log_window = a.log_every;
    cfg.test_eval_every = a.test_eval_every;
    cfg.rng_seed = a.seed;
    cfg.momentum = a.momentum;
    cfg.lr_decay = a.lr_decay;
    cfg.lr_decay_every = a.lr_decay_every;
    cfg.snapshot_every = a.snapshot_every;

    Tensor4 test_data, test_labels;
    bool have_test = false;
    if (cfg.test_eval_every > 0 && fs::exists(data_dir / "test")) {
        BatchFile t = read_batches(data_dir / "test");
        test_data = std::move(t.data);
        test_labels = reshaped(t.labels, t.labels.n(), 8, 1, 1); // match the head's output
        have_test = true;
    }

    nn::SnapshotHook hook;
    if (a.snapshot_every > 0) {
        hook = [&](std::int64_t iter, const nn::Parameters& p) {
            char name[32];
            std::snprintf(name, sizeof name, "snapshot_%06lld.bin",
                          static_cast<long long>(iter));
            save_weight_archive(nn::named_params(net, p), out_dir / name);
        };
    }

    const nn::LossHistory history =
        nn::train(net, params, batches, cfg, have_test ? &test_data : nullptr,
                  have_test ? &test_labels : nullptr, hook);
    write_loss_history(history, out_dir / "loss_history.csv");
    save_weight_archive(nn::named_params(net, params), out_dir / "weights.bin");
    if (fs::exists(data_dir / "means.txt"))
        fs::copy_file(data_dir / "means.txt", out_dir / "means.txt",
                      fs::copy_options::overwrite_existing);

    double final_train = std::numeric_limits<double>::quiet_NaN();
    double final_test = std::numeric_limits<double>::quiet_NaN();
    for (auto it = history.rbegin(); it != history.rend(); ++it) {
        if (std::isnan(final_train) && !std::isnan(it->train_loss)) final_train = it->train_loss;
        if (std::isnan(final_test) && !std::isnan(it->test_loss)) final_test = it->test_loss;
    }
    std::cout << "train: " << a.iters << " iterations done; last train loss " << final_train;
    if (have_test) std::cout << ", last test loss " << final_test;
    std::cout << "\ntrain: wrote weights.bin and loss_history.csv to " << out_dir << "\n";
    return 0;
}

// ------------------------------------------------------------- annotate --

struct AnnotateArgs {
    std::string data_dir, out_dir;
    std::string annotations; // default <data-dir>/annotations.csv
    std::string weights;
    std::string means; // default <weights dir>/means.txt
    std::string arch = "vgg-7-fc8";
    int out_size = 224, crop_w = 600, crop_h = 400;
    std::int64_t chunk = 32;
};

int run_annotate(CLI::App& sub, const AnnotateArgs& a) {
    write_manifest(sub, a.out_dir);
    const fs::path data_dir = a.data_dir;
    const fs::path ann = a.annotations.empty() ? data_dir / "annotations.csv"
                                               : fs::path(a.annotations);
    const auto frames = load_annotations(ann);
    const ImageLoader loader = file_image_loader(data_dir);
    const fs::path means_path =
        a.means.empty() ? fs::path(a.weights).parent_path() / "means.txt" : fs::path(a.means);
    const auto means = load_channel_means(means_path);
    const nn::NamedParams archive = load_weight_archive(a.weights);

    nn::NetworkSpec net = make_arch(a.arch);
    net.input = {3, a.out_size, a.out_size};
    const nn::Parameters params = nn::init_params(net, 0, &archive);

    CropSpec base;
    base.crop_w = a.crop_w;
    base.crop_h = a.crop_h;
    base.out_w = base.out_h = a.out_size;

    if (a.chunk < 1) throw ValidationError("--chunk must be >= 1");
    std::vector<FramePrediction> preds;
    preds.reserve(frames.size());
    for (std::size_t i0 = 0; i0 < frames.size(); i0 += static_cast<std::size_t>(a.chunk)) {
        const std::size_t i1 =
            std::min(frames.size(), i0 + static_cast<std::size_t>(a.chunk));
        Tensor4 batch(static_cast<std::int64_t>(i1 - i0), 3, a.out_size, a.out_size);
        std::vector<CropSpec> crops(i1 - i0);
        for (std::size_t i = i0; i < i1; ++i) {
            const AnnotatedFrame& f = frames[i];
            crops[i - i0] = centered_test_crop(f, base);
            const Tensor4 pre = preprocess(transform_image(loader(f), crops[i - i0]), means);
            std::copy(pre.data(), pre.data() + pre.sample_size(),
                      batch.sample(static_cast<std::int64_t>(i - i0)));
        }
        const Tensor4 out = nn::predict(net, params, batch);
        for (std::size_t i = i0; i < i1; ++i) {
            std::array<double, 8> p{};
            for (int j = 0; j < 8; ++j)
                p[static_cast<std::size_t>(j)] =
                    out(static_cast<std::int64_t>(i - i0), j, 0, 0);
            preds.push_back({frames[i].frame_id, map_to_native(p, crops[i - i0])});
        }
    }
    save_predictions(preds, fs::path(a.out_dir) / "predictions.csv");
    std::cout << "annotate: wrote " << preds.size() << " predictions to "
              << (fs::path(a.out_dir) / "predictions.csv") << "\n";
    return 0;
}

// ------------------------------------------------------------- evaluate --

struct EvaluateArgs {
    std::string gt, pred, out_dir;
    std::string occlusion = "exclude";
    std::string history;
};

int run_evaluate(CLI::App& sub, const EvaluateArgs& a) {
    write_manifest(sub, a.out_dir);
    const auto gts = load_annotations(a.gt);
    const auto predictions = load_predictions(a.pred);

    std::map<std::int64_t, const AnnotatedFrame*> by_id;
    for (const AnnotatedFrame& f : gts) by_id[f.frame_id] = &f;
    std::vector<std::array<double, 8>> preds_native;
    std::vector<AnnotatedFrame> matched;
    preds_native.reserve(predictions.size());
    matched.reserve(predictions.size());
    for (const FramePrediction& p : predictions) {
        const auto it = by_id.find(p.frame_id);
        if (it == by_id.end())
            throw ValidationError("prediction for frame " + std::to_string(p.frame_id) +
                                  " has no ground-truth annotation");
        preds_native.push_back(p.landmarks);
        matched.push_back(*it->second);
    }

    const OcclusionMode mode = a.occlusion == "exclude" ? OcclusionMode::ExcludeOccludedFrames
                                                        : OcclusionMode::IncludeAll;
    EvalResult result = mae_per_landmark(preds_native, matched, mode);
    nn::LossHistory history;
    if (!a.history.empty()) history = nn::read_loss_history(a.history);
    emit_report(result, history, a.out_dir);

    for (int k = 0; k < kLandmarkCount; ++k)
        std::cout << "evaluate: " << kLandmarkNames[k] << " MAE "
                  << result.mae[static_cast<std::size_t>(k)] << " px\n";
    std::cout << "evaluate: total MAE " << result.total_mae << " px over "
              << result.frames_evaluated << " frames (" << result.occlusion_excluded
              << " excluded)\n";
    return 0;
}

// ---------------------------------------------------------- triangulate --

struct TriangulateArgs {
    std::string cam1, cam2, view1, view2, out_dir;
    std::string gt_poses;
};

int run_triangulate(CLI::App& sub, const TriangulateArgs& a) {
    write_manifest(sub, a.out_dir);
    const CameraModel cam1 = load_camera(a.cam1);
    const CameraModel cam2 = load_camera(a.cam2);
    const auto v1 = load_predictions(a.view1);
    const auto v2 = load_predictions(a.view2);

    std::map<std::int64_t, const FramePrediction*> v2_by_id;
    for (const FramePrediction& p : v2) v2_by_id[p.frame_id] = &p;

    std::vector<Pose3D> poses;
    std::int64_t valid_points = 0;
    for (const FramePrediction& p1 : v1) {
        const auto it = v2_by_id.find(p1.frame_id);
        if (it == v2_by_id.end()) continue;
        Pose3D pose =
            reconstruct_pose(p1.landmarks, it->second->landmarks, cam1, cam2, p1.frame_id);
        for (const PosePoint& pt : pose.points) valid_points += pt.valid ? 1 : 0;
        poses.push_back(pose);
    }
    save_poses(poses, fs::path(a.out_dir) / "poses.csv");
    std::cout << "triangulate: " << poses.size() << " frames, " << valid_points
              << " valid landmark points -> " << (fs::path(a.out_dir) / "poses.csv") << "\n";

    if (!a.gt_poses.empty()) {
        const auto gt = load_poses(a.gt_poses);
        std::map<std::int64_t, const Pose3D*> gt_by_id;
        for (const Pose3D& g : gt) gt_by_id[g.time_index] = &g;
        std::vector<Pose3D> pred_matched, gt_matched;
        for (const Pose3D& p : poses) {
            const auto it = gt_by_id.find(p.time_index);
            if (it == gt_by_id.end()) continue;
            pred_matched.push_back(p);
            gt_matched.push_back(*it->second);
        }
        const RatioMetrics rm = ratio_metrics(pred_matched, gt_matched);
        const fs::path ratios_path = fs::path(a.out_dir) / "ratios.txt";
        std::ofstream out(ratios_path);
        if (!out) throw IoError("cannot write " + ratios_path.string());
        char line[128];
        std::snprintf(line, sizeof line, "head_abdomen_ratio=%.17g\n", rm.head_abdomen);
        out << line;
        std::snprintf(line, sizeof line, "wing_wing_ratio=%.17g\n", rm.wing_wing);
        out << line;
        out << "frames_used=" << rm.frames_used << "\nframes_excluded=" << rm.frames_excluded
            << "\n";
        std::cout << "triangulate: head-abdomen ratio " << rm.head_abdomen
                  << ", wing-wing ratio " << rm.wing_wing << " (" << rm.frames_used
                  << " frames)\n";
    }
    if (valid_points == 0) {
        std::cerr << "triangulate: no landmark could be triangulated\n";
        return 1;
    }
    return 0;
}

// --------------------------------------------------------------- report --

struct ReportArgs {
    std::string mae, history, out_dir;
};

EvalResult parse_mae_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw FormatError("empty MAE table " + path.string());
    EvalResult result;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream row(line);
        std::string name;
        double mae = 0.0;
        std::int64_t n = 0;
        if (!(row >> name >> mae >> n))
            throw ParseError("malformed MAE row '" + line + "' in " + path.string());
        if (name == "total") {
            result.total_mae = mae;
            result.frames_evaluated = n;
            continue;
        }
        bool known = false;
        for (int k = 0; k < kLandmarkCount; ++k) {
            if (name == kLandmarkNames[k]) {
                result.mae[static_cast<std::size_t>(k)] = mae;
                result.frames_evaluated = n;
                known = true;
                break;
            }
        }
        if (!known) throw FormatError("unknown landmark '" + name + "' in " + path.string());
    }
    return result;
}

int run_report(CLI::App& sub, const ReportArgs& a) {
    write_manifest(sub, a.out_dir);
    const EvalResult result = parse_mae_csv(a.mae);
    nn::LossHistory history;
    if (!a.history.empty()) history = nn::read_loss_history(a.history);
    emit_report(result, history, a.out_dir);
    std::cout << "report: wrote mae.csv, loss_curve.csv and report.svg to " << a.out_dir
              << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"CNN landmark-regression toolkit for two-camera animal pose tracking"};
    app.require_subcommand(1);
    app.set_config("--config", "",
                   "Read options from a key=value file; keys live in a [subcommand] section");
    int rc = 0;

    auto* synth = app.add_subcommand("synth", "Render a procedural annotated test dataset");
    auto sa = std::make_shared<SynthArgs>();
    synth->add_option("--out-dir", sa->out_dir, "Output directory")->required();
    synth->add_option("--frames", sa->cfg.frame_count, "Frame count")->capture_default_str();
    synth->add_option("--seed", sa->cfg.rng_seed, "Generator seed")->capture_default_str();
    synth->add_option("--occlude-every", sa->cfg.occlude_every,
                      "Flag one landmark occluded every k frames (0 = never)")
        ->capture_default_str();
    synth->add_option("--marker-growth", sa->cfg.marker_growth,
                      "Marker radius multiplier reached at the end of the sequence")
        ->capture_default_str();
    synth->add_option("--marker-fade", sa->cfg.marker_fade,
                      "Marker amplitude multiplier reached at the end")
        ->capture_default_str();
    synth->add_option("--body-scale-start", sa->cfg.body_scale_start, "Body scale at frame 1")
        ->capture_default_str();
    synth->add_option("--body-scale-end", sa->cfg.body_scale_end, "Body scale at the last frame")
        ->capture_default_str();
    synth->add_flag("--rig", sa->rig,
                    "Also write a calibrated two-camera rig with projected views and "
                    "ground-truth poses");
    synth->callback([&rc, sa, synth] { rc = run_synth(*synth, *sa); });

    auto* augment =
        app.add_subcommand("augment", "Split, augment and pack a dataset into batch files");
    auto aa = std::make_shared<AugmentArgs>();
    augment->add_option("--data-dir", aa->data_dir, "Directory with images + annotations.csv")
        ->required();
    augment->add_option("--out-dir", aa->out_dir, "Output directory")->required();
    augment->add_option("--annotations", aa->annotations,
                        "Annotation CSV (default <data-dir>/annotations.csv)");
    augment->add_option("--nts", aa->nts, "Training-set size after augmentation")
        ->capture_default_str();
    augment->add_option("--da", aa->da, "Augmentation scheme: none, t, tr, ts")
        ->check(CLI::IsMember({"none", "t", "tr", "ts"}))
        ->capture_default_str();
    augment->add_option("--seed", aa->seed, "Augmentation seed")->capture_default_str();
    augment->add_option("--split", aa->split,
                        "Train/test split: first-half, interleaved, random-k, none")
        ->check(CLI::IsMember({"first-half", "interleaved", "random-k", "none"}))
        ->capture_default_str();
    augment->add_option("--train-k", aa->train_k, "Training frames drawn by random-k")
        ->capture_default_str();
    augment->add_option("--test-k", aa->test_k, "Test frames drawn by random-k")
        ->capture_default_str();
    augment->add_option("--split-seed", aa->split_seed, "random-k draw seed")
        ->capture_default_str();
    augment->add_option("--out-size", aa->out_size, "Sample output width/height")
        ->capture_default_str();
    augment->add_option("--crop-w", aa->crop_w, "Crop window width")->capture_default_str();
    augment->add_option("--crop-h", aa->crop_h, "Crop window height")->capture_default_str();
    augment->add_option("--rot-min", aa->rot_min, "Rotation range low, degrees")
        ->capture_default_str();
    augment->add_option("--rot-max", aa->rot_max, "Rotation range high, degrees")
        ->capture_default_str();
    augment->add_option("--scale-min", aa->scale_min, "Rescaling range low")
        ->capture_default_str();
    augment->add_option("--scale-max", aa->scale_max, "Rescaling range high")
        ->capture_default_str();
    augment->add_option("--per-file", aa->per_file, "Samples per batch file")
        ->capture_default_str();
    augment->add_option("--group-size", aa->group_size,
                        "Samples generated per image-decoding group")
        ->capture_default_str();
    augment->callback([&rc, aa, augment] { rc = run_augment(*augment, *aa); });

    auto* train = app.add_subcommand("train", "Train the regression network on batch files");
    auto ta = std::make_shared<TrainArgs>();
    train->add_option("--data-dir", ta->data_dir,
                      "Augmented dataset directory (train/ + optional test/ + means.txt)")
        ->required();
    train->add_option("--out-dir", ta->out_dir, "Output directory")->required();
    train->add_option("--arch", ta->arch, "Architecture (vgg-{2,4,7,10,13}-fc8)")
        ->capture_default_str();
    train->add_option("--blr", ta->blr, "Base learning rate")->capture_default_str();
    train->add_option("--vgg-lrm", ta->vgg_lrm, "Conv-stack learning-rate multiplier")
        ->capture_default_str();
    train->add_option("--fc-lrm", ta->fc_lrm, "Regression-head learning-rate multiplier")
        ->capture_default_str();
    train->add_flag("--finetune", ta->finetune,
                    "Unfreeze the conv stack (multiplier 1 unless --vgg-lrm is nonzero)");
    train->add_option("--pretrained", ta->pretrained, "Weight archive for pretrained layers");
    train->add_option("--conv-init", ta->conv_init,
                      "Conv weight source when not finetuning a snapshot: pretrained, xavier")
        ->check(CLI::IsMember({"pretrained", "xavier"}))
        ->capture_default_str();
    train->add_option("--iters", ta->iters, "SGD iterations")->capture_default_str();
    train->add_option("--batch", ta->batch, "Batch size")->capture_default_str();
    train->add_option("--seed", ta->seed, "Initialization seed")->capture_default_str();
    train->add_option("--momentum", ta->momentum, "SGD momentum")->capture_default_str();
    train->add_option("--lr-decay", ta->lr_decay, "Step-decay factor")->capture_default_str();
    train->add_option("--lr-decay-every", ta->lr_decay_every,
                      "Apply the decay every this many iterations (0 = never)")
        ->capture_default_str();
    train->add_option("--snapshot-every", ta->snapshot_every,
                      "Parameter snapshot cadence (0 = never)")
        ->capture_default_str();
    train->add_option("--log-every", ta->log_every, "Training-loss window length")
        ->capture_default_str();
    train->add_option("--test-eval-every", ta->test_eval_every,
                      "Test-loss cadence (0 = never)")
        ->capture_default_str();
    train->callback([&rc, ta, train] { rc = run_train(*train, *ta); });

    auto* annotate =
        app.add_subcommand("annotate", "Predict landmarks for every frame of a dataset");
    auto na = std::make_shared<AnnotateArgs>();
    annotate->add_option("--data-dir", na->data_dir, "Directory with images + annotations.csv")
        ->required();
    annotate->add_option("--out-dir", na->out_dir, "Output directory")->required();
    annotate->add_option("--annotations", na->annotations,
                         "Annotation CSV (default <data-dir>/annotations.csv; only frame ids, "
                         "image refs and bboxes are used)");
    annotate->add_option("--weights", na->weights, "Trained weight archive")->required();
    annotate->add_option("--means", na->means,
                         "Channel-mean sidecar (default means.txt next to the weights)");
    annotate->add_option("--arch", na->arch, "Architecture (vgg-{2,4,7,10,13}-fc8)")
        ->capture_default_str();
    annotate->add_option("--out-size", na->out_size, "Network input width/height")
        ->capture_default_str();
    annotate->add_option("--crop-w", na->crop_w, "Crop window width")->capture_default_str();
    annotate->add_option("--crop-h", na->crop_h, "Crop window height")->capture_default_str();
    annotate->add_option("--chunk", na->chunk, "Frames per forward pass")
        ->capture_default_str();
    annotate->callback([&rc, na, annotate] { rc = run_annotate(*annotate, *na); });

    auto* evaluate =
        app.add_subcommand("evaluate", "Score predictions against ground-truth annotations");
    auto ea = std::make_shared<EvaluateArgs>();
    evaluate->add_option("--gt", ea->gt, "Ground-truth annotation CSV")->required();
    evaluate->add_option("--pred", ea->pred, "Predictions CSV")->required();
    evaluate->add_option("--out-dir", ea->out_dir, "Output directory")->required();
    evaluate->add_option("--occlusion", ea->occlusion,
                         "Occluded-frame handling: include, exclude")
        ->check(CLI::IsMember({"include", "exclude"}))
        ->capture_default_str();
    evaluate->add_option("--history", ea->history, "Loss-history CSV to plot");
    evaluate->callback([&rc, ea, evaluate] { rc = run_evaluate(*evaluate, *ea); });

    auto* triangulate = app.add_subcommand(
        "triangulate", "Reconstruct 3D poses from two annotated camera views");
    auto ga = std::make_shared<TriangulateArgs>();
    triangulate->add_option("--cam1", ga->cam1, "First camera matrix file")->required();
    triangulate->add_option("--cam2", ga->cam2, "Second camera matrix file")->required();
    triangulate->add_option("--view1", ga->view1, "Predictions CSV from camera 1")->required();
    triangulate->add_option("--view2", ga->view2, "Predictions CSV from camera 2")->required();
    triangulate->add_option("--out-dir", ga->out_dir, "Output directory")->required();
    triangulate->add_option("--gt-poses", ga->gt_poses,
                            "Ground-truth pose CSV for distance-ratio metrics");
    triangulate->callback([&rc, ga, triangulate] { rc = run_triangulate(*triangulate, *ga); });

    auto* report =
        app.add_subcommand("report", "Regenerate evaluation plots from saved artifacts");
    auto ra = std::make_shared<ReportArgs>();
    report->add_option("--mae", ra->mae, "MAE table (mae.csv)")->required();
    report->add_option("--history", ra->history, "Loss-history CSV");
    report->add_option("--out-dir", ra->out_dir, "Output directory")->required();
    report->callback([&rc, ra, report] { rc = run_report(*report, *ra); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return rc;
}
