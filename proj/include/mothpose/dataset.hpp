#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "mothpose/augment.hpp"
#include "mothpose/nn/params.hpp"
#include "mothpose/nn/trainer.hpp"
#include "mothpose/tensor.hpp"

namespace mothpose {

/// Replicates grayscale input to 3 channels and subtracts the per-channel
/// mean constant; values stay on the 0..255 scale (no renormalization).
/// Input must be a single (1,1,H,W) or (1,3,H,W) image with 8-bit-range
/// values; anything outside [0,255] raises FormatError.
Tensor4 preprocess(const Tensor4& image, const std::array<double, 3>& means);

/// Per-channel pixel means over a set of frames (the training originals).
/// Grayscale frames contribute the same mean to all three channels.
std::array<double, 3> compute_channel_means(const std::vector<AnnotatedFrame>& frames,
                                            const ImageLoader& load_image);

/// ImageLoader that reads frame.image_ref (PGM/PPM) relative to dir.
ImageLoader file_image_loader(const std::filesystem::path& dir);

void save_channel_means(const std::array<double, 3>& means, const std::filesystem::path& path);
std::array<double, 3> load_channel_means(const std::filesystem::path& path);

/// One batch container file in memory: data (n,c,h,w) plus labels
/// (n,1,1,8) in crop space.
struct BatchFile {
    Tensor4 data;
    Tensor4 labels;
};

/// Writes samples chunked into HDF5 files (batch_0000.h5, batch_0001.h5,
/// ...) under dir, samples_per_file per file with a smaller final
/// remainder. Each file holds datasets /data and /label whose on-disk
/// dimension order is the reverse of the in-memory one — (w,h,c,n) and
/// (8,1,1,n) — with the values physically transposed to match, plus a
/// format_version attribute.
void write_batches(const Tensor4& samples, const Tensor4& labels,
                   const std::filesystem::path& dir, std::int64_t samples_per_file = 1000);

/// Incremental writer used when samples are generated as a stream: add()
/// spools samples in order and flushes a file whenever samples_per_file
/// have accumulated; finish() flushes the remainder and returns the total
/// sample count.
class BatchWriter {
public:
    BatchWriter(std::filesystem::path dir, std::int64_t samples_per_file = 1000);
    ~BatchWriter();
    BatchWriter(const BatchWriter&) = delete;
    BatchWriter& operator=(const BatchWriter&) = delete;

    void add(const Tensor4& image, const std::array<double, 8>& label);
    std::int64_t finish();

private:
    void flush();

    std::filesystem::path dir_;
    std::int64_t per_file_;
    std::vector<Tensor4> images_;
    std::vector<std::array<double, 8>> labels_;
    std::int64_t files_written_ = 0;
    std::int64_t total_ = 0;
    bool finished_ = false;
};

/// Batch files under dir in name order; IoError when none exist.
std::vector<std::filesystem::path> list_batch_files(const std::filesystem::path& dir);

/// Reads one container file back into in-memory (n,c,h,w)/(n,1,1,8) order,
/// bit-exactly. Missing datasets, wrong rank, or a label width other than
/// 8 raise FormatError.
BatchFile read_batch_file(const std::filesystem::path& file);

/// Concatenation of every batch file under dir (small sets / tests).
BatchFile read_batches(const std::filesystem::path& dir);

/// Streams training batches of batch_size samples straight from the batch
/// files, slicing across file boundaries; a trailing remainder smaller
/// than batch_size is dropped. Labels are delivered as (b,8,1,1) to match
/// the network head. Keeps the most recently touched file cached.
class DiskBatchSource final : public nn::BatchSource {
public:
    DiskBatchSource(const std::filesystem::path& dir, std::int64_t batch_size);
    std::int64_t batch_count() const override { return batch_count_; }
    void load(std::int64_t index, Tensor4& data, Tensor4& labels) override;

    std::int64_t total_samples() const { return total_; }
    std::int64_t sample_channels() const { return c_; }
    std::int64_t sample_height() const { return h_; }
    std::int64_t sample_width() const { return w_; }

private:
    struct FileInfo {
        std::filesystem::path path;
        std::int64_t first = 0; // global index of its first sample
        std::int64_t count = 0;
    };

    const BatchFile& file_at(std::size_t fi);

    std::vector<FileInfo> files_;
    std::int64_t batch_size_ = 0;
    std::int64_t batch_count_ = 0;
    std::int64_t total_ = 0;
    std::int64_t c_ = 0, h_ = 0, w_ = 0;
    BatchFile cached_;
    std::ptrdiff_t cached_index_ = -1;
};

/// Binary weight archive: every named layer's weights and biases, restored
/// bit-exactly by load. Layer lookup is by name (see init_params).
void save_weight_archive(const nn::NamedParams& params, const std::filesystem::path& path);
nn::NamedParams load_weight_archive(const std::filesystem::path& path);

/// Sidecar CSV mapping each sample to its source frame and recorded crop
/// geometry, so predictions in crop space can be taken back to native
/// coordinates.
struct SampleCrop {
    std::int64_t index = 0;
    std::int64_t frame_id = 0;
    CropSpec crop;

    bool operator==(const SampleCrop&) const = default;
};

void save_crop_specs(const std::vector<SampleCrop>& specs, const std::filesystem::path& path);
std::vector<SampleCrop> load_crop_specs(const std::filesystem::path& path);

} // namespace mothpose
