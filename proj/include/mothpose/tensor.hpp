#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "mothpose/errors.hpp"

namespace mothpose {

/// Dense 4D array of doubles in row-major (n, c, h, w) order.
///
/// The single activation/parameter carrier of the toolkit: batches are
/// (samples, channels, height, width), convolution weights are
/// (out_channels, in_channels, kh, kw), fully-connected weights are
/// (out_neurons, in_size, 1, 1). All dimensions are >= 1.
class Tensor4 {
public:
    Tensor4() = default;

    Tensor4(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w, double fill = 0.0)
        : n_(n), c_(c), h_(h), w_(w) {
        if (n < 1 || c < 1 || h < 1 || w < 1)
            throw ShapeError("tensor dimensions must be >= 1");
        const auto total = checked_volume(n, c, h, w);
        data_.assign(static_cast<std::size_t>(total), fill);
    }

    std::int64_t n() const { return n_; }
    std::int64_t c() const { return c_; }
    std::int64_t h() const { return h_; }
    std::int64_t w() const { return w_; }
    std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    /// Per-sample element count (c*h*w).
    std::int64_t sample_size() const { return c_ * h_ * w_; }

    std::int64_t offset(std::int64_t i, std::int64_t j, std::int64_t k, std::int64_t l) const {
        return ((i * c_ + j) * h_ + k) * w_ + l;
    }

    /// Bounds-checked element access.
    double at(std::int64_t i, std::int64_t j, std::int64_t k, std::int64_t l) const {
        check_index(i, j, k, l);
        return data_[static_cast<std::size_t>(offset(i, j, k, l))];
    }
    void set(std::int64_t i, std::int64_t j, std::int64_t k, std::int64_t l, double v) {
        check_index(i, j, k, l);
        data_[static_cast<std::size_t>(offset(i, j, k, l))] = v;
    }

    /// Unchecked access for inner loops.
    double operator()(std::int64_t i, std::int64_t j, std::int64_t k, std::int64_t l) const {
        return data_[static_cast<std::size_t>(offset(i, j, k, l))];
    }
    double& operator()(std::int64_t i, std::int64_t j, std::int64_t k, std::int64_t l) {
        return data_[static_cast<std::size_t>(offset(i, j, k, l))];
    }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::span<double> flat() { return data_; }
    std::span<const double> flat() const { return data_; }

    /// Pointer to the start of sample i.
    double* sample(std::int64_t i) { return data_.data() + i * sample_size(); }
    const double* sample(std::int64_t i) const { return data_.data() + i * sample_size(); }

    bool same_shape(const Tensor4& o) const {
        return n_ == o.n_ && c_ == o.c_ && h_ == o.h_ && w_ == o.w_;
    }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    bool operator==(const Tensor4& o) const {
        return same_shape(o) && data_ == o.data_;
    }

private:
    static std::int64_t checked_volume(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) {
        unsigned __int128 v = 1;
        for (std::int64_t d : {n, c, h, w}) v *= static_cast<unsigned __int128>(d);
        if (v == 0 || v > (unsigned __int128)1 << 40) // ~8 TB of doubles, far past anything sane here
            throw ShapeError("tensor volume zero or overflows");
        return static_cast<std::int64_t>(v);
    }

    void check_index(std::int64_t i, std::int64_t j, std::int64_t k, std::int64_t l) const {
        if (i < 0 || i >= n_ || j < 0 || j >= c_ || k < 0 || k >= h_ || l < 0 || l >= w_)
            throw BoundsError("tensor index out of range");
    }

    std::int64_t n_ = 0, c_ = 0, h_ = 0, w_ = 0;
    std::vector<double> data_;
};

/// Factory matching the toolkit-wide construction contract.
inline Tensor4 tensor_new(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w, double fill = 0.0) {
    return Tensor4(n, c, h, w, fill);
}

/// Same flat data under a new shape of equal volume (e.g. labels stored
/// (n,1,1,8) viewed as (n,8,1,1) for the loss).
inline Tensor4 reshaped(const Tensor4& t, std::int64_t n, std::int64_t c, std::int64_t h,
                        std::int64_t w) {
    Tensor4 out(n, c, h, w);
    if (out.size() != t.size()) throw ShapeError("reshape changes the element count");
    std::copy(t.flat().begin(), t.flat().end(), out.flat().begin());
    return out;
}

} // namespace mothpose
