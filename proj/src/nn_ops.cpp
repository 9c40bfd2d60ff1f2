#include "mothpose/nn/ops.hpp"

#include <iterator>

#include <Eigen/Dense>

#include "mothpose/parallel.hpp"

namespace mothpose::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Shape3 in_shape_of(const Tensor4& t) {
    return {static_cast<int>(t.c()), static_cast<int>(t.h()), static_cast<int>(t.w())};
}

Shape3 conv_out_shape(const ConvSpec& spec, const Shape3& in) {
    LayerSpec probe;
    probe.kind = spec;
    return layer_output_shape(probe, in);
}

void check_conv_params(const ConvSpec& spec, const Tensor4& weights,
                       const std::vector<double>& bias, const Shape3& in) {
    if (weights.n() != spec.out_channels || weights.c() != in.c || weights.h() != spec.kernel ||
        weights.w() != spec.kernel)
        throw ShapeError("conv weights do not match layer spec");
    if (std::ssize(bias) != spec.out_channels)
        throw ShapeError("conv bias length must equal output channel count");
}

/// Gathers one sample's patches into cols (ic*k*k rows, oh*ow columns).
/// Out-of-frame positions read as zero (zero padding).
void im2col(const ConvSpec& spec, const double* sample, const Shape3& in, const Shape3& out,
            RowMat& cols) {
    const int k = spec.kernel, s = spec.stride, p = spec.padding;
    for (int ci = 0; ci < in.c; ++ci) {
        const double* plane = sample + std::int64_t(ci) * in.h * in.w;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const int row = (ci * k + ky) * k + kx;
                double* dst = cols.data() + std::int64_t(row) * out.h * out.w;
                for (int oy = 0; oy < out.h; ++oy) {
                    const int iy = oy * s - p + ky;
                    if (iy < 0 || iy >= in.h) {
                        for (int ox = 0; ox < out.w; ++ox) dst[oy * out.w + ox] = 0.0;
                        continue;
                    }
                    const double* src_row = plane + std::int64_t(iy) * in.w;
                    for (int ox = 0; ox < out.w; ++ox) {
                        const int ix = ox * s - p + kx;
                        dst[oy * out.w + ox] = (ix < 0 || ix >= in.w) ? 0.0 : src_row[ix];
                    }
                }
            }
        }
    }
}

/// Scatter-add of cols back into one sample's gradient (inverse of im2col).
void col2im_add(const ConvSpec& spec, const RowMat& cols, const Shape3& in, const Shape3& out,
                double* sample) {
    const int k = spec.kernel, s = spec.stride, p = spec.padding;
    for (int ci = 0; ci < in.c; ++ci) {
        double* plane = sample + std::int64_t(ci) * in.h * in.w;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const int row = (ci * k + ky) * k + kx;
                const double* src = cols.data() + std::int64_t(row) * out.h * out.w;
                for (int oy = 0; oy < out.h; ++oy) {
                    const int iy = oy * s - p + ky;
                    if (iy < 0 || iy >= in.h) continue;
                    double* dst_row = plane + std::int64_t(iy) * in.w;
                    for (int ox = 0; ox < out.w; ++ox) {
                        const int ix = ox * s - p + kx;
                        if (ix >= 0 && ix < in.w) dst_row[ix] += src[oy * out.w + ox];
                    }
                }
            }
        }
    }
}

Shape3 pool_out_shape(const MaxPoolSpec& spec, const Shape3& in) {
    LayerSpec probe;
    probe.kind = spec;
    return layer_output_shape(probe, in);
}

} // namespace

Tensor4 conv_forward(const ConvSpec& spec, const Tensor4& weights,
                     const std::vector<double>& bias, const Tensor4& input) {
    const Shape3 in = in_shape_of(input);
    const Shape3 out = conv_out_shape(spec, in);
    check_conv_params(spec, weights, bias, in);

    const std::int64_t ckk = std::int64_t(in.c) * spec.kernel * spec.kernel;
    const std::int64_t ohw = std::int64_t(out.h) * out.w;
    Tensor4 result(input.n(), out.c, out.h, out.w, 0.0);
    Eigen::Map<const RowMat> w_mat(weights.flat().data(), spec.out_channels, ckk);

    parallel_for(0, input.n(), [&](std::int64_t i) {
        RowMat cols(ckk, ohw);
        im2col(spec, input.sample(i), in, out, cols);
        Eigen::Map<RowMat> out_mat(result.sample(i), spec.out_channels, ohw);
        out_mat.noalias() = w_mat * cols;
        for (int o = 0; o < spec.out_channels; ++o) out_mat.row(o).array() += bias[o];
    });
    return result;
}

Tensor4 conv_backward_data(const ConvSpec& spec, const Tensor4& weights, const Tensor4& grad_out,
                           const Shape3& in_shape) {
    const Shape3 out = conv_out_shape(spec, in_shape);
    if (grad_out.c() != out.c || grad_out.h() != out.h || grad_out.w() != out.w)
        throw ShapeError("conv grad_out shape mismatch");

    const std::int64_t ckk = std::int64_t(in_shape.c) * spec.kernel * spec.kernel;
    const std::int64_t ohw = std::int64_t(out.h) * out.w;
    Tensor4 grad_in(grad_out.n(), in_shape.c, in_shape.h, in_shape.w, 0.0);
    Eigen::Map<const RowMat> w_mat(weights.flat().data(), spec.out_channels, ckk);

    parallel_for(0, grad_out.n(), [&](std::int64_t i) {
        Eigen::Map<const RowMat> go_mat(grad_out.sample(i), spec.out_channels, ohw);
        RowMat cols(ckk, ohw);
        cols.noalias() = w_mat.transpose() * go_mat;
        col2im_add(spec, cols, in_shape, out, grad_in.sample(i));
    });
    return grad_in;
}

void conv_backward_params(const ConvSpec& spec, const Tensor4& input, const Tensor4& grad_out,
                          Tensor4& grad_weights, std::vector<double>& grad_bias) {
    const Shape3 in = in_shape_of(input);
    const Shape3 out = conv_out_shape(spec, in);
    check_conv_params(spec, grad_weights, grad_bias, in);
    if (grad_out.n() != input.n()) throw ShapeError("conv grad_out batch mismatch");

    const std::int64_t ckk = std::int64_t(in.c) * spec.kernel * spec.kernel;
    const std::int64_t ohw = std::int64_t(out.h) * out.w;
    Eigen::Map<RowMat> gw_mat(grad_weights.flat().data(), spec.out_channels, ckk);

    // Serial over samples: the accumulation order is part of the
    // determinism contract (bit-identical for any thread count).
    RowMat cols(ckk, ohw);
    for (std::int64_t i = 0; i < input.n(); ++i) {
        im2col(spec, input.sample(i), in, out, cols);
        Eigen::Map<const RowMat> go_mat(grad_out.sample(i), spec.out_channels, ohw);
        gw_mat.noalias() += go_mat * cols.transpose();
        for (int o = 0; o < spec.out_channels; ++o) {
            double acc = 0.0;
            const double* row = grad_out.sample(i) + std::int64_t(o) * ohw;
            for (std::int64_t p = 0; p < ohw; ++p) acc += row[p];
            grad_bias[static_cast<std::size_t>(o)] += acc;
        }
    }
}

Tensor4 relu_forward(const Tensor4& input) {
    Tensor4 out(input.n(), input.c(), input.h(), input.w(), 0.0);
    const std::int64_t per_sample = input.sample_size();
    parallel_for(0, input.n(), [&](std::int64_t i) {
        const double* src = input.sample(i);
        double* dst = out.sample(i);
        for (std::int64_t j = 0; j < per_sample; ++j) dst[j] = src[j] > 0.0 ? src[j] : 0.0;
    });
    return out;
}

Tensor4 relu_backward(const Tensor4& input, const Tensor4& grad_out) {
    if (!input.same_shape(grad_out)) throw ShapeError("relu grad_out shape mismatch");
    Tensor4 grad_in(input.n(), input.c(), input.h(), input.w(), 0.0);
    const std::int64_t per_sample = input.sample_size();
    parallel_for(0, input.n(), [&](std::int64_t i) {
        const double* x = input.sample(i);
        const double* go = grad_out.sample(i);
        double* gi = grad_in.sample(i);
        for (std::int64_t j = 0; j < per_sample; ++j) gi[j] = x[j] > 0.0 ? go[j] : 0.0;
    });
    return grad_in;
}

Tensor4 maxpool_forward(const MaxPoolSpec& spec, const Tensor4& input,
                        std::vector<std::int64_t>& argmax) {
    const Shape3 in = in_shape_of(input);
    const Shape3 out = pool_out_shape(spec, in);
    Tensor4 result(input.n(), out.c, out.h, out.w, 0.0);
    argmax.assign(static_cast<std::size_t>(result.flat().size()), 0);

    const std::int64_t out_per_sample = result.sample_size();
    parallel_for(0, input.n(), [&](std::int64_t i) {
        const double* src = input.sample(i);
        double* dst = result.sample(i);
        std::int64_t* am = argmax.data() + i * out_per_sample;
        for (int c = 0; c < in.c; ++c) {
            const double* plane = src + std::int64_t(c) * in.h * in.w;
            for (int oy = 0; oy < out.h; ++oy) {
                for (int ox = 0; ox < out.w; ++ox) {
                    const int y0 = oy * spec.stride, x0 = ox * spec.stride;
                    double best = plane[std::int64_t(y0) * in.w + x0];
                    std::int64_t best_at = std::int64_t(y0) * in.w + x0;
                    for (int wy = 0; wy < spec.window; ++wy) {
                        for (int wx = 0; wx < spec.window; ++wx) {
                            const std::int64_t at = std::int64_t(y0 + wy) * in.w + (x0 + wx);
                            if (plane[at] > best) {
                                best = plane[at];
                                best_at = at;
                            }
                        }
                    }
                    const std::int64_t o = (std::int64_t(c) * out.h + oy) * out.w + ox;
                    dst[o] = best;
                    am[o] = std::int64_t(c) * in.h * in.w + best_at;
                }
            }
        }
    });
    return result;
}

Tensor4 maxpool_backward(const MaxPoolSpec& spec, const std::vector<std::int64_t>& argmax,
                         const Tensor4& grad_out, const Shape3& in_shape) {
    const Shape3 out = pool_out_shape(spec, in_shape);
    if (grad_out.c() != out.c || grad_out.h() != out.h || grad_out.w() != out.w)
        throw ShapeError("pool grad_out shape mismatch");
    if (static_cast<std::int64_t>(argmax.size()) != grad_out.size())
        throw ConsistencyError("pool argmax record does not match grad_out");

    Tensor4 grad_in(grad_out.n(), in_shape.c, in_shape.h, in_shape.w, 0.0);
    const std::int64_t out_per_sample = grad_out.sample_size();
    parallel_for(0, grad_out.n(), [&](std::int64_t i) {
        const double* go = grad_out.sample(i);
        const std::int64_t* am = argmax.data() + i * out_per_sample;
        double* gi = grad_in.sample(i);
        // += because windows overlap when stride < window.
        for (std::int64_t o = 0; o < out_per_sample; ++o) gi[am[o]] += go[o];
    });
    return grad_in;
}

Tensor4 fc_forward(const Tensor4& weights, const std::vector<double>& bias, const Tensor4& input) {
    const std::int64_t v = input.sample_size();
    const std::int64_t out_n = weights.n();
    if (weights.c() != v || weights.h() != 1 || weights.w() != 1)
        throw ShapeError("fc weights do not match flattened input size");
    if (std::ssize(bias) != out_n) throw ShapeError("fc bias length must equal neuron count");

    Tensor4 result(input.n(), out_n, 1, 1, 0.0);
    Eigen::Map<const RowMat> in_mat(input.flat().data(), input.n(), v);
    Eigen::Map<const RowMat> w_mat(weights.flat().data(), out_n, v);
    Eigen::Map<RowMat> out_mat(result.flat().data(), input.n(), out_n);
    out_mat.noalias() = in_mat * w_mat.transpose();
    Eigen::Map<const Eigen::VectorXd> b_vec(bias.data(), out_n);
    out_mat.rowwise() += b_vec.transpose();
    return result;
}

Tensor4 fc_backward_data(const Tensor4& weights, const Tensor4& grad_out, const Shape3& in_shape,
                         std::int64_t n) {
    const std::int64_t v = in_shape.volume();
    if (weights.c() != v) throw ShapeError("fc weights do not match input shape");
    if (grad_out.n() != n || grad_out.sample_size() != weights.n())
        throw ShapeError("fc grad_out shape mismatch");

    Tensor4 grad_in(n, in_shape.c, in_shape.h, in_shape.w, 0.0);
    Eigen::Map<const RowMat> go_mat(grad_out.flat().data(), n, weights.n());
    Eigen::Map<const RowMat> w_mat(weights.flat().data(), weights.n(), v);
    Eigen::Map<RowMat> gi_mat(grad_in.flat().data(), n, v);
    gi_mat.noalias() = go_mat * w_mat;
    return grad_in;
}

void fc_backward_params(const Tensor4& input, const Tensor4& grad_out, Tensor4& grad_weights,
                        std::vector<double>& grad_bias) {
    const std::int64_t v = input.sample_size();
    const std::int64_t out_n = grad_out.sample_size();
    if (grad_weights.n() != out_n || grad_weights.c() != v)
        throw ShapeError("fc grad_weights shape mismatch");
    if (std::ssize(grad_bias) != out_n) throw ShapeError("fc grad_bias length mismatch");
    if (grad_out.n() != input.n()) throw ShapeError("fc grad_out batch mismatch");

    Eigen::Map<const RowMat> in_mat(input.flat().data(), input.n(), v);
    Eigen::Map<const RowMat> go_mat(grad_out.flat().data(), input.n(), out_n);
    Eigen::Map<RowMat> gw_mat(grad_weights.flat().data(), out_n, v);
    gw_mat.noalias() += go_mat.transpose() * in_mat;
    for (std::int64_t o = 0; o < out_n; ++o) {
        double acc = 0.0;
        for (std::int64_t i = 0; i < input.n(); ++i) acc += go_mat(i, o);
        grad_bias[static_cast<std::size_t>(o)] += acc;
    }
}

} // namespace mothpose::nn
