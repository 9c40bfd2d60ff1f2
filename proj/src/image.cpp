#include "mothpose/image.hpp"

#include <cmath>
#include <fstream>

#include "mothpose/parallel.hpp"

namespace mothpose {

namespace {

void check_image(const Tensor4& img, const char* what) {
    if (img.n() != 1 || (img.c() != 1 && img.c() != 3))
        throw ShapeError(std::string(what) + ": expected a single gray or RGB image");
}

int read_pnm_token(std::istream& in) {
    // skips whitespace and '#' comments per the PNM grammar
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (!std::isspace(c)) {
            break;
        }
        c = in.get();
    }
    if (c == EOF) throw FormatError("truncated PNM header");
    int value = 0;
    bool any = false;
    while (c != EOF && std::isdigit(c)) {
        value = value * 10 + (c - '0');
        any = true;
        c = in.get();
    }
    if (!any) throw FormatError("malformed PNM header");
    return value;
}

} // namespace

Tensor4 read_image(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open image " + path.string());
    char magic[2] = {};
    in.read(magic, 2);
    if (!in || magic[0] != 'P' || (magic[1] != '5' && magic[1] != '6'))
        throw FormatError("unsupported image format (want binary PGM/PPM): " + path.string());
    const int channels = magic[1] == '5' ? 1 : 3;
    const int w = read_pnm_token(in);
    const int h = read_pnm_token(in);
    const int maxval = read_pnm_token(in);
    if (w < 1 || h < 1) throw FormatError("bad PNM dimensions in " + path.string());
    if (maxval != 255) throw FormatError("only 8-bit PNM images are supported: " + path.string());

    std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * channels);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!in) throw FormatError("truncated PNM pixel data in " + path.string());

    // PNM interleaves channels per pixel; we store planar (c,h,w).
    Tensor4 img(1, channels, h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < channels; ++c)
                img(0, c, y, x) =
                    static_cast<double>(raw[(static_cast<std::size_t>(y) * w + x) * channels + c]);
    return img;
}

void write_image(const Tensor4& image, const std::filesystem::path& path) {
    check_image(image, "write_image");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write image " + path.string());
    out << (image.c() == 1 ? "P5" : "P6") << '\n' << image.w() << ' ' << image.h() << "\n255\n";
    std::vector<unsigned char> raw(static_cast<std::size_t>(image.size()));
    std::size_t at = 0;
    for (std::int64_t y = 0; y < image.h(); ++y)
        for (std::int64_t x = 0; x < image.w(); ++x)
            for (std::int64_t c = 0; c < image.c(); ++c) {
                const double v = std::round(image(0, c, y, x));
                raw[at++] = static_cast<unsigned char>(std::clamp(v, 0.0, 255.0));
            }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw IoError("image write failed: " + path.string());
}

Tensor4 bilinear_resize(const Tensor4& image, std::int64_t out_h, std::int64_t out_w) {
    if (out_h < 1 || out_w < 1) throw ShapeError("resize target must be >= 1 per axis");
    if (out_h == image.h() && out_w == image.w()) return image;

    const std::int64_t ih = image.h(), iw = image.w();
    const double ry = static_cast<double>(ih) / static_cast<double>(out_h);
    const double rx = static_cast<double>(iw) / static_cast<double>(out_w);
    Tensor4 out(image.n(), image.c(), out_h, out_w);

    parallel_for(0, image.n() * image.c(), [&](std::int64_t plane) {
        const std::int64_t i = plane / image.c(), c = plane % image.c();
        for (std::int64_t y = 0; y < out_h; ++y) {
            const double sy = (static_cast<double>(y) + 0.5) * ry - 0.5;
            const double fy = std::floor(sy);
            const double dy = sy - fy;
            const std::int64_t y0 = std::clamp<std::int64_t>(static_cast<std::int64_t>(fy), 0, ih - 1);
            const std::int64_t y1 = std::clamp<std::int64_t>(static_cast<std::int64_t>(fy) + 1, 0, ih - 1);
            for (std::int64_t x = 0; x < out_w; ++x) {
                const double sx = (static_cast<double>(x) + 0.5) * rx - 0.5;
                const double fx = std::floor(sx);
                const double dx = sx - fx;
                const std::int64_t x0 = std::clamp<std::int64_t>(static_cast<std::int64_t>(fx), 0, iw - 1);
                const std::int64_t x1 = std::clamp<std::int64_t>(static_cast<std::int64_t>(fx) + 1, 0, iw - 1);
                const double top = image(i, c, y0, x0) * (1.0 - dx) + image(i, c, y0, x1) * dx;
                const double bot = image(i, c, y1, x0) * (1.0 - dx) + image(i, c, y1, x1) * dx;
                out(i, c, y, x) = top * (1.0 - dy) + bot * dy;
            }
        }
    });
    return out;
}

Tensor4 crop_window(const Tensor4& image, std::int64_t x0, std::int64_t y0, std::int64_t w,
                    std::int64_t h) {
    if (w < 1 || h < 1) throw ShapeError("crop window must be >= 1 per axis");
    if (x0 < 0 || y0 < 0 || x0 + w > image.w() || y0 + h > image.h())
        throw BoundsError("crop window outside the image");
    Tensor4 out(image.n(), image.c(), h, w);
    for (std::int64_t i = 0; i < image.n(); ++i)
        for (std::int64_t c = 0; c < image.c(); ++c)
            for (std::int64_t y = 0; y < h; ++y)
                for (std::int64_t x = 0; x < w; ++x)
                    out(i, c, y, x) = image(i, c, y0 + y, x0 + x);
    return out;
}

std::vector<double> border_mean(const Tensor4& image) {
    check_image(image, "border_mean");
    std::vector<double> means(static_cast<std::size_t>(image.c()), 0.0);
    const std::int64_t h = image.h(), w = image.w();
    for (std::int64_t c = 0; c < image.c(); ++c) {
        double sum = 0.0;
        std::int64_t count = 0;
        for (std::int64_t y = 0; y < h; ++y)
            for (std::int64_t x = 0; x < w; ++x)
                if (y == 0 || y == h - 1 || x == 0 || x == w - 1) {
                    sum += image(0, c, y, x);
                    ++count;
                }
        means[static_cast<std::size_t>(c)] = sum / static_cast<double>(count);
    }
    return means;
}

namespace {

/// Resamples `image` through the inverse affine map q -> A*(q-c) + c,
/// bilinear, with per-channel fill outside the frame.
Tensor4 affine_resample(const Tensor4& image, double a00, double a01, double a10, double a11,
                        double cx, double cy, const std::vector<double>& fill) {
    const std::int64_t h = image.h(), w = image.w();
    Tensor4 out(1, image.c(), h, w);
    parallel_for(0, h, [&](std::int64_t y) {
        for (std::int64_t x = 0; x < w; ++x) {
            const double qx = static_cast<double>(x) - cx;
            const double qy = static_cast<double>(y) - cy;
            const double sx = a00 * qx + a01 * qy + cx;
            const double sy = a10 * qx + a11 * qy + cy;
            const double fx = std::floor(sx), fy = std::floor(sy);
            const std::int64_t x0 = static_cast<std::int64_t>(fx);
            const std::int64_t y0 = static_cast<std::int64_t>(fy);
            const double dx = sx - fx, dy = sy - fy;
            for (std::int64_t c = 0; c < image.c(); ++c) {
                const double bg = fill[static_cast<std::size_t>(c)];
                const auto tap = [&](std::int64_t yy, std::int64_t xx) {
                    return (xx < 0 || xx >= w || yy < 0 || yy >= h) ? bg : image(0, c, yy, xx);
                };
                const double top = tap(y0, x0) * (1.0 - dx) + tap(y0, x0 + 1) * dx;
                const double bot = tap(y0 + 1, x0) * (1.0 - dx) + tap(y0 + 1, x0 + 1) * dx;
                out(0, c, y, x) = top * (1.0 - dy) + bot * dy;
            }
        }
    });
    return out;
}

} // namespace

Tensor4 rotate_about(const Tensor4& image, double deg, double cx, double cy) {
    check_image(image, "rotate_about");
    const double rad = deg * 3.14159265358979323846 / 180.0;
    const double cs = std::cos(rad), sn = std::sin(rad);
    // output pixel q maps back through the inverse rotation R(-deg)
    return affine_resample(image, cs, sn, -sn, cs, cx, cy, border_mean(image));
}

Tensor4 scale_about(const Tensor4& image, double factor, double cx, double cy) {
    check_image(image, "scale_about");
    if (!(factor > 0.0)) throw GeometryError("scale factor must be positive");
    const double inv = 1.0 / factor;
    return affine_resample(image, inv, 0.0, 0.0, inv, cx, cy, border_mean(image));
}

} // namespace mothpose
