#include "mothpose/dataset.hpp"

#include <hdf5.h>

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "mothpose/errors.hpp"
#include "mothpose/image.hpp"

static_assert(std::endian::native == std::endian::little,
              "binary containers assume a little-endian host");

namespace mothpose {
namespace {

namespace fs = std::filesystem;

void quiet_hdf5() {
    // Expected-failure paths (missing datasets etc.) raise our own errors;
    // keep the library from also dumping its error stack to stderr.
    static const bool done = [] {
        H5Eset_auto2(H5E_DEFAULT, nullptr, nullptr);
        return true;
    }();
    (void)done;
}

// In-memory (n,c,h,w) <-> on-disk (w,h,c,n): a full index reversal, done as
// per-(c,y) blocked 2D transposes so both sides stream through cache.
constexpr std::int64_t kTile = 64;

void transpose_to_disk(const double* mem, std::int64_t n, std::int64_t c, std::int64_t h,
                       std::int64_t w, double* disk) {
    const std::int64_t sample = c * h * w;
    for (std::int64_t cc = 0; cc < c; ++cc)
        for (std::int64_t y = 0; y < h; ++y) {
            const double* mrow = mem + (cc * h + y) * w;
            double* dbase = disk + (y * c + cc) * n;
            for (std::int64_t x0 = 0; x0 < w; x0 += kTile)
                for (std::int64_t i0 = 0; i0 < n; i0 += kTile) {
                    const std::int64_t x1 = std::min(w, x0 + kTile);
                    const std::int64_t i1 = std::min(n, i0 + kTile);
                    for (std::int64_t x = x0; x < x1; ++x) {
                        double* drow = dbase + x * h * c * n;
                        const double* mcol = mrow + x;
                        for (std::int64_t i = i0; i < i1; ++i) drow[i] = mcol[i * sample];
                    }
                }
        }
}

void transpose_from_disk(const double* disk, std::int64_t n, std::int64_t c, std::int64_t h,
                         std::int64_t w, double* mem) {
    const std::int64_t sample = c * h * w;
    for (std::int64_t cc = 0; cc < c; ++cc)
        for (std::int64_t y = 0; y < h; ++y) {
            double* mrow = mem + (cc * h + y) * w;
            const double* dbase = disk + (y * c + cc) * n;
            for (std::int64_t x0 = 0; x0 < w; x0 += kTile)
                for (std::int64_t i0 = 0; i0 < n; i0 += kTile) {
                    const std::int64_t x1 = std::min(w, x0 + kTile);
                    const std::int64_t i1 = std::min(n, i0 + kTile);
                    for (std::int64_t x = x0; x < x1; ++x) {
                        const double* drow = dbase + x * h * c * n;
                        double* mcol = mrow + x;
                        for (std::int64_t i = i0; i < i1; ++i) mcol[i * sample] = drow[i];
                    }
                }
        }
}

struct HidCloser {
    herr_t (*close)(hid_t);
    hid_t id;
    ~HidCloser() {
        if (id >= 0) close(id);
    }
};

void write_version_attr(hid_t file) {
    HidCloser space{H5Sclose, H5Screate(H5S_SCALAR)};
    HidCloser attr{H5Aclose, H5Acreate2(file, "format_version", H5T_STD_I32LE, space.id,
                                        H5P_DEFAULT, H5P_DEFAULT)};
    const std::int32_t v = 1;
    if (attr.id < 0 || H5Awrite(attr.id, H5T_NATIVE_INT32, &v) < 0)
        throw IoError("cannot write the batch format_version attribute");
}

void check_version_attr(hid_t file, const fs::path& path) {
    if (H5Aexists(file, "format_version") <= 0)
        throw FormatError("missing format_version attribute in " + path.string());
    HidCloser attr{H5Aclose, H5Aopen(file, "format_version", H5P_DEFAULT)};
    std::int32_t v = 0;
    if (attr.id < 0 || H5Aread(attr.id, H5T_NATIVE_INT32, &v) < 0 || v != 1)
        throw FormatError("unsupported batch format version in " + path.string());
}

void write_dataset(hid_t file, const char* name, const double* mem, std::int64_t n,
                   std::int64_t c, std::int64_t h, std::int64_t w) {
    std::vector<double> disk(static_cast<std::size_t>(n * c * h * w));
    transpose_to_disk(mem, n, c, h, w, disk.data());
    const hsize_t dims[4] = {static_cast<hsize_t>(w), static_cast<hsize_t>(h),
                             static_cast<hsize_t>(c), static_cast<hsize_t>(n)};
    HidCloser space{H5Sclose, H5Screate_simple(4, dims, nullptr)};
    // No object-header timestamps: files depend on their contents alone, so
    // identical runs produce byte-identical batch files.
    HidCloser dcpl{H5Pclose, H5Pcreate(H5P_DATASET_CREATE)};
    H5Pset_obj_track_times(dcpl.id, false);
    HidCloser dset{H5Dclose, H5Dcreate2(file, name, H5T_IEEE_F64LE, space.id, H5P_DEFAULT,
                                        dcpl.id, H5P_DEFAULT)};
    if (dset.id < 0 ||
        H5Dwrite(dset.id, H5T_NATIVE_DOUBLE, H5S_ALL, H5S_ALL, H5P_DEFAULT, disk.data()) < 0)
        throw IoError(std::string("cannot write dataset ") + name);
}

struct DiskDims {
    std::int64_t n = 0, c = 0, h = 0, w = 0; // already back in memory order
};

DiskDims dataset_dims(hid_t file, const char* name, const fs::path& path) {
    if (H5Lexists(file, name, H5P_DEFAULT) <= 0)
        throw FormatError(std::string("missing dataset ") + name + " in " + path.string());
    HidCloser dset{H5Dclose, H5Dopen2(file, name, H5P_DEFAULT)};
    if (dset.id < 0) throw FormatError(std::string("cannot open dataset ") + name);
    HidCloser space{H5Sclose, H5Dget_space(dset.id)};
    if (H5Sget_simple_extent_ndims(space.id) != 4)
        throw FormatError(std::string(name) + " is not 4-dimensional in " + path.string());
    hsize_t dims[4] = {};
    H5Sget_simple_extent_dims(space.id, dims, nullptr);
    return {static_cast<std::int64_t>(dims[3]), static_cast<std::int64_t>(dims[2]),
            static_cast<std::int64_t>(dims[1]), static_cast<std::int64_t>(dims[0])};
}

Tensor4 read_dataset(hid_t file, const char* name, const fs::path& path) {
    const DiskDims d = dataset_dims(file, name, path);
    HidCloser dset{H5Dclose, H5Dopen2(file, name, H5P_DEFAULT)};
    Tensor4 t(d.n, d.c, d.h, d.w);
    std::vector<double> disk(static_cast<std::size_t>(t.size()));
    if (H5Dread(dset.id, H5T_NATIVE_DOUBLE, H5S_ALL, H5S_ALL, H5P_DEFAULT, disk.data()) < 0)
        throw FormatError(std::string("cannot read dataset ") + name + " from " + path.string());
    transpose_from_disk(disk.data(), d.n, d.c, d.h, d.w, t.data());
    return t;
}

void write_one_file(const fs::path& path, const double* data, const double* labels,
                    std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) {
    quiet_hdf5();
    HidCloser file{H5Fclose,
                   H5Fcreate(path.string().c_str(), H5F_ACC_TRUNC, H5P_DEFAULT, H5P_DEFAULT)};
    if (file.id < 0) throw IoError("cannot create batch file " + path.string());
    write_version_attr(file.id);
    write_dataset(file.id, "/data", data, n, c, h, w);
    write_dataset(file.id, "/label", labels, n, 1, 1, 8);
}

fs::path batch_file_name(const fs::path& dir, std::int64_t index) {
    char name[32];
    std::snprintf(name, sizeof name, "batch_%04lld.h5", static_cast<long long>(index));
    return dir / name;
}

void check_label_shape(const Tensor4& labels) {
    if (labels.c() != 1 || labels.h() != 1 || labels.w() != 8)
        throw ShapeError("labels must be (n,1,1,8)");
}

// ---- binary writer/reader helpers (weight archive) ----

template <typename T>
void put(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::ifstream& in, const char* what) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw FormatError(std::string("truncated weight archive (") + what + ")");
    return v;
}

} // namespace

Tensor4 preprocess(const Tensor4& image, const std::array<double, 3>& means) {
    if (image.n() != 1 || (image.c() != 1 && image.c() != 3))
        throw ShapeError("preprocess expects a single gray or RGB image");
    for (double v : image.flat())
        if (!(v >= 0.0 && v <= 255.0))
            throw FormatError("preprocess: pixel values outside the 8-bit range");
    Tensor4 out(1, 3, image.h(), image.w());
    const std::int64_t plane = image.h() * image.w();
    for (int c = 0; c < 3; ++c) {
        const double* src = image.data() + (image.c() == 1 ? 0 : c) * plane;
        double* dst = out.data() + c * plane;
        for (std::int64_t k = 0; k < plane; ++k) dst[k] = src[k] - means[static_cast<std::size_t>(c)];
    }
    return out;
}

std::array<double, 3> compute_channel_means(const std::vector<AnnotatedFrame>& frames,
                                            const ImageLoader& load_image) {
    if (frames.empty()) throw SizeError("cannot compute channel means of zero frames");
    std::array<double, 3> sum{};
    std::array<double, 3> count{};
    for (const AnnotatedFrame& f : frames) {
        const Tensor4 img = load_image(f);
        if (img.n() != 1 || (img.c() != 1 && img.c() != 3))
            throw ShapeError("channel means expect single gray or RGB images");
        const std::int64_t plane = img.h() * img.w();
        for (int c = 0; c < 3; ++c) {
            const double* src = img.data() + (img.c() == 1 ? 0 : c) * plane;
            double s = 0.0;
            for (std::int64_t k = 0; k < plane; ++k) s += src[k];
            sum[static_cast<std::size_t>(c)] += s;
            count[static_cast<std::size_t>(c)] += static_cast<double>(plane);
        }
    }
    std::array<double, 3> means{};
    for (int c = 0; c < 3; ++c)
        means[static_cast<std::size_t>(c)] =
            sum[static_cast<std::size_t>(c)] / count[static_cast<std::size_t>(c)];
    return means;
}

ImageLoader file_image_loader(const std::filesystem::path& dir) {
    return [dir](const AnnotatedFrame& frame) { return read_image(dir / frame.image_ref); };
}

void save_channel_means(const std::array<double, 3>& means, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write channel means " + path.string());
    char buf[160];
    std::snprintf(buf, sizeof buf, "# channel-means v1\n%.17g %.17g %.17g\n", means[0], means[1],
                  means[2]);
    out << buf;
    if (!out) throw IoError("channel means write failed: " + path.string());
}

std::array<double, 3> load_channel_means(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open channel means " + path.string());
    std::string header;
    std::getline(in, header);
    if (header.rfind("# channel-means", 0) != 0)
        throw FormatError("bad channel-means header in " + path.string());
    std::array<double, 3> means{};
    if (!(in >> means[0] >> means[1] >> means[2]))
        throw FormatError("channel means need three numbers: " + path.string());
    return means;
}

void write_batches(const Tensor4& samples, const Tensor4& labels, const std::filesystem::path& dir,
                   std::int64_t samples_per_file) {
    if (samples_per_file < 1) throw ValidationError("samples_per_file must be >= 1");
    if (samples.n() != labels.n()) throw ShapeError("sample and label counts differ");
    check_label_shape(labels);
    fs::create_directories(dir);
    const std::int64_t n = samples.n();
    std::int64_t file_index = 0;
    for (std::int64_t start = 0; start < n; start += samples_per_file, ++file_index) {
        const std::int64_t m = std::min(samples_per_file, n - start);
        write_one_file(batch_file_name(dir, file_index), samples.sample(start),
                       labels.sample(start), m, samples.c(), samples.h(), samples.w());
    }
}

BatchWriter::BatchWriter(std::filesystem::path dir, std::int64_t samples_per_file)
    : dir_(std::move(dir)), per_file_(samples_per_file) {
    if (per_file_ < 1) throw ValidationError("samples_per_file must be >= 1");
    fs::create_directories(dir_);
}

BatchWriter::~BatchWriter() = default;

void BatchWriter::add(const Tensor4& image, const std::array<double, 8>& label) {
    if (finished_) throw ConsistencyError("BatchWriter::add after finish");
    if (image.n() != 1) throw ShapeError("BatchWriter expects single-sample images");
    if (!images_.empty() && !(image.c() == images_.front().c() && image.h() == images_.front().h() &&
                              image.w() == images_.front().w()))
        throw ShapeError("sample shape changed mid-stream");
    images_.push_back(image);
    labels_.push_back(label);
    ++total_;
    if (static_cast<std::int64_t>(images_.size()) == per_file_) flush();
}

void BatchWriter::flush() {
    if (images_.empty()) return;
    const auto m = static_cast<std::int64_t>(images_.size());
    const Tensor4& first = images_.front();
    Tensor4 data(m, first.c(), first.h(), first.w());
    Tensor4 labels(m, 1, 1, 8);
    for (std::int64_t i = 0; i < m; ++i) {
        std::copy_n(images_[static_cast<std::size_t>(i)].data(), data.sample_size(),
                    data.sample(i));
        std::copy_n(labels_[static_cast<std::size_t>(i)].data(), 8, labels.sample(i));
    }
    write_one_file(batch_file_name(dir_, files_written_), data.data(), labels.data(), m, data.c(),
                   data.h(), data.w());
    ++files_written_;
    images_.clear();
    labels_.clear();
}

std::int64_t BatchWriter::finish() {
    if (finished_) return total_;
    flush();
    finished_ = true;
    return total_;
}

std::vector<std::filesystem::path> list_batch_files(const std::filesystem::path& dir) {
    std::vector<fs::path> files;
    if (fs::is_directory(dir)) {
        for (const auto& entry : fs::directory_iterator(dir)) {
            const std::string name = entry.path().filename().string();
            if (name.rfind("batch_", 0) == 0 && name.size() > 3 &&
                name.compare(name.size() - 3, 3, ".h5") == 0)
                files.push_back(entry.path());
        }
    }
    if (files.empty()) throw IoError("no batch files under " + dir.string());
    std::sort(files.begin(), files.end());
    return files;
}

BatchFile read_batch_file(const std::filesystem::path& file) {
    quiet_hdf5();
    HidCloser f{H5Fclose, H5Fopen(file.string().c_str(), H5F_ACC_RDONLY, H5P_DEFAULT)};
    if (f.id < 0) throw IoError("cannot open batch file " + file.string());
    check_version_attr(f.id, file);
    BatchFile out;
    out.data = read_dataset(f.id, "/data", file);
    out.labels = read_dataset(f.id, "/label", file);
    if (out.labels.n() != out.data.n())
        throw FormatError("data/label sample counts differ in " + file.string());
    check_label_shape(out.labels);
    return out;
}

BatchFile read_batches(const std::filesystem::path& dir) {
    const auto files = list_batch_files(dir);
    std::vector<BatchFile> parts;
    parts.reserve(files.size());
    std::int64_t total = 0;
    for (const auto& p : files) {
        parts.push_back(read_batch_file(p));
        total += parts.back().data.n();
        const Tensor4& a = parts.front().data;
        const Tensor4& b = parts.back().data;
        if (b.c() != a.c() || b.h() != a.h() || b.w() != a.w())
            throw FormatError("batch files disagree on sample shape under " + dir.string());
    }
    BatchFile out;
    out.data = Tensor4(total, parts.front().data.c(), parts.front().data.h(),
                       parts.front().data.w());
    out.labels = Tensor4(total, 1, 1, 8);
    std::int64_t at = 0;
    for (const BatchFile& part : parts) {
        std::copy_n(part.data.data(), part.data.size(), out.data.sample(at));
        std::copy_n(part.labels.data(), part.labels.size(), out.labels.sample(at));
        at += part.data.n();
    }
    return out;
}

DiskBatchSource::DiskBatchSource(const std::filesystem::path& dir, std::int64_t batch_size)
    : batch_size_(batch_size) {
    if (batch_size_ < 1) throw ValidationError("batch_size must be >= 1");
    quiet_hdf5();
    for (const auto& p : list_batch_files(dir)) {
        HidCloser f{H5Fclose, H5Fopen(p.string().c_str(), H5F_ACC_RDONLY, H5P_DEFAULT)};
        if (f.id < 0) throw IoError("cannot open batch file " + p.string());
        check_version_attr(f.id, p);
        const DiskDims d = dataset_dims(f.id, "/data", p);
        const DiskDims l = dataset_dims(f.id, "/label", p);
        if (l.n != d.n || l.c != 1 || l.h != 1 || l.w != 8)
            throw FormatError("bad label dimensions in " + p.string());
        if (files_.empty()) {
            c_ = d.c;
            h_ = d.h;
            w_ = d.w;
        } else if (d.c != c_ || d.h != h_ || d.w != w_) {
            throw FormatError("batch files disagree on sample shape: " + p.string());
        }
        files_.push_back({p, total_, d.n});
        total_ += d.n;
    }
    batch_count_ = total_ / batch_size_;
    if (batch_count_ < 1) throw SizeError("fewer samples than one batch");
}

const BatchFile& DiskBatchSource::file_at(std::size_t fi) {
    if (cached_index_ != static_cast<std::ptrdiff_t>(fi)) {
        cached_ = read_batch_file(files_[fi].path);
        if (cached_.data.n() != files_[fi].count)
            throw FormatError("batch file changed size: " + files_[fi].path.string());
        cached_index_ = static_cast<std::ptrdiff_t>(fi);
    }
    return cached_;
}

void DiskBatchSource::load(std::int64_t index, Tensor4& data, Tensor4& labels) {
    if (index < 0 || index >= batch_count_) throw BoundsError("batch index out of range");
    data = Tensor4(batch_size_, c_, h_, w_);
    // Labels go out as (b,8,1,1) to line up with the network's predictions.
    labels = Tensor4(batch_size_, 8, 1, 1);
    std::int64_t want = index * batch_size_; // global sample index
    std::size_t fi = 0;
    while (want >= files_[fi].first + files_[fi].count) ++fi;
    for (std::int64_t out = 0; out < batch_size_;) {
        const BatchFile& bf = file_at(fi);
        const std::int64_t local = want - files_[fi].first;
        const std::int64_t run = std::min(batch_size_ - out, files_[fi].count - local);
        std::copy_n(bf.data.sample(local), run * data.sample_size(), data.sample(out));
        std::copy_n(bf.labels.sample(local), run * 8, labels.sample(out));
        out += run;
        want += run;
        if (out < batch_size_) ++fi;
    }
}

void save_weight_archive(const nn::NamedParams& params, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write weight archive " + path.string());
    out.write("MPWA", 4);
    put<std::uint32_t>(out, 1); // version
    put<std::uint64_t>(out, params.size());
    for (const auto& [name, layer] : params) {
        put<std::uint64_t>(out, name.size());
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        const Tensor4& wt = layer.weights;
        for (std::int64_t d : {wt.n(), wt.c(), wt.h(), wt.w()}) put<std::int64_t>(out, d);
        put<std::int64_t>(out, static_cast<std::int64_t>(layer.bias.size()));
        out.write(reinterpret_cast<const char*>(wt.data()),
                  static_cast<std::streamsize>(wt.size() * 8));
        out.write(reinterpret_cast<const char*>(layer.bias.data()),
                  static_cast<std::streamsize>(layer.bias.size() * 8));
    }
    if (!out) throw IoError("weight archive write failed: " + path.string());
}

nn::NamedParams load_weight_archive(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open weight archive " + path.string());
    char magic[4] = {};
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "MPWA", 4) != 0)
        throw FormatError("not a weight archive: " + path.string());
    if (get<std::uint32_t>(in, "version") != 1)
        throw FormatError("unsupported weight archive version in " + path.string());
    const auto count = get<std::uint64_t>(in, "entry count");
    nn::NamedParams params;
    for (std::uint64_t e = 0; e < count; ++e) {
        const auto name_len = get<std::uint64_t>(in, "name length");
        if (name_len > 4096) throw FormatError("implausible layer name length");
        std::string name(name_len, '\0');
        in.read(name.data(), static_cast<std::streamsize>(name_len));
        if (!in) throw FormatError("truncated weight archive (name)");
        std::int64_t dims[4];
        for (auto& d : dims) d = get<std::int64_t>(in, "weight dims");
        const auto bias_len = get<std::int64_t>(in, "bias length");
        if (bias_len < 0) throw FormatError("negative bias length");
        nn::LayerParams layer;
        layer.weights = Tensor4(dims[0], dims[1], dims[2], dims[3]);
        in.read(reinterpret_cast<char*>(layer.weights.data()),
                static_cast<std::streamsize>(layer.weights.size() * 8));
        layer.bias.resize(static_cast<std::size_t>(bias_len));
        in.read(reinterpret_cast<char*>(layer.bias.data()),
                static_cast<std::streamsize>(bias_len * 8));
        if (!in) throw FormatError("truncated weight archive (payload)");
        if (!params.emplace(std::move(name), std::move(layer)).second)
            throw FormatError("duplicate layer name in " + path.string());
    }
    return params;
}

void save_crop_specs(const std::vector<SampleCrop>& specs, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write crop specs " + path.string());
    out << "index,frame_id,origin_x,origin_y,crop_w,crop_h,out_w,out_h,rotation_deg,scale,"
           "center_x,center_y\n";
    char buf[64];
    const auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    for (const SampleCrop& s : specs) {
        out << s.index << ',' << s.frame_id << ',' << num(s.crop.origin_x) << ','
            << num(s.crop.origin_y) << ',' << s.crop.crop_w << ',' << s.crop.crop_h << ','
            << s.crop.out_w << ',' << s.crop.out_h << ',' << num(s.crop.pre_crop_rotation_deg)
            << ',' << num(s.crop.pre_crop_scale) << ',' << num(s.crop.center_x) << ','
            << num(s.crop.center_y) << '\n';
    }
    if (!out) throw IoError("crop spec write failed: " + path.string());
}

std::vector<SampleCrop> load_crop_specs(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open crop specs " + path.string());
    std::string line;
    if (!std::getline(in, line) ||
        line.rfind("index,frame_id,origin_x", 0) != 0)
        throw FormatError("bad crop spec header in " + path.string());
    std::vector<SampleCrop> specs;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        SampleCrop s;
        if (!(ss >> s.index >> s.frame_id >> s.crop.origin_x >> s.crop.origin_y >> s.crop.crop_w >>
              s.crop.crop_h >> s.crop.out_w >> s.crop.out_h >> s.crop.pre_crop_rotation_deg >>
              s.crop.pre_crop_scale >> s.crop.center_x >> s.crop.center_y))
            throw ParseError("crop specs line " + std::to_string(line_no) + ": malformed row");
        specs.push_back(s);
    }
    return specs;
}

} // namespace mothpose
