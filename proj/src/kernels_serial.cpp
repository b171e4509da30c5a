// Reference kernels: one accumulator per output element, no reordering.

#include "wsmil/kernels.hpp"

#include <cstddef>

namespace wsmil::kernels::serial {

namespace {
inline std::size_t at(int a, int b, int c, int d, int nb, int nc, int nd) {
    return ((static_cast<std::size_t>(a) * static_cast<std::size_t>(nb) + static_cast<std::size_t>(b)) *
                static_cast<std::size_t>(nc) +
            static_cast<std::size_t>(c)) *
               static_cast<std::size_t>(nd) +
           static_cast<std::size_t>(d);
}
} // namespace

void conv3x3_forward(const ConvShape& s, std::span<const double> in, std::span<const double> weight,
                     std::span<const double> bias, std::span<double> out) {
    for (int n = 0; n < s.batch; ++n)
        for (int oc = 0; oc < s.out_channels; ++oc)
            for (int y = 0; y < s.height; ++y)
                for (int x = 0; x < s.width; ++x) {
                    double acc = bias[static_cast<std::size_t>(oc)];
                    for (int ic = 0; ic < s.in_channels; ++ic)
                        for (int ky = 0; ky < 3; ++ky)
                            for (int kx = 0; kx < 3; ++kx) {
                                const int iy = y + ky - 1, ix = x + kx - 1;
                                if (iy < 0 || iy >= s.height || ix < 0 || ix >= s.width) continue;
                                acc += weight[at(oc, ic, ky, kx, s.in_channels, 3, 3)] *
                                       in[at(n, ic, iy, ix, s.in_channels, s.height, s.width)];
                            }
                    out[at(n, oc, y, x, s.out_channels, s.height, s.width)] = acc;
                }
}

void conv3x3_backward(const ConvShape& s, std::span<const double> in, std::span<const double> dout,
                      std::span<const double> weight, std::span<double> dweight, std::span<double> dbias,
                      std::span<double> din) {
    for (int oc = 0; oc < s.out_channels; ++oc) {
        double acc = 0.0;
        for (int n = 0; n < s.batch; ++n)
            for (int y = 0; y < s.height; ++y)
                for (int x = 0; x < s.width; ++x) acc += dout[at(n, oc, y, x, s.out_channels, s.height, s.width)];
        dbias[static_cast<std::size_t>(oc)] += acc;
    }
    for (int oc = 0; oc < s.out_channels; ++oc)
        for (int ic = 0; ic < s.in_channels; ++ic)
            for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx) {
                    double acc = 0.0;
                    for (int n = 0; n < s.batch; ++n)
                        for (int y = 0; y < s.height; ++y)
                            for (int x = 0; x < s.width; ++x) {
                                const int iy = y + ky - 1, ix = x + kx - 1;
                                if (iy < 0 || iy >= s.height || ix < 0 || ix >= s.width) continue;
                                acc += dout[at(n, oc, y, x, s.out_channels, s.height, s.width)] *
                                       in[at(n, ic, iy, ix, s.in_channels, s.height, s.width)];
                            }
                    dweight[at(oc, ic, ky, kx, s.in_channels, 3, 3)] += acc;
                }
    if (din.empty()) return;
    for (int n = 0; n < s.batch; ++n)
        for (int ic = 0; ic < s.in_channels; ++ic)
            for (int iy = 0; iy < s.height; ++iy)
                for (int ix = 0; ix < s.width; ++ix) {
                    double acc = 0.0;
                    for (int oc = 0; oc < s.out_channels; ++oc)
                        for (int ky = 0; ky < 3; ++ky)
                            for (int kx = 0; kx < 3; ++kx) {
                                const int y = iy - ky + 1, x = ix - kx + 1;
                                if (y < 0 || y >= s.height || x < 0 || x >= s.width) continue;
                                acc += weight[at(oc, ic, ky, kx, s.in_channels, 3, 3)] *
                                       dout[at(n, oc, y, x, s.out_channels, s.height, s.width)];
                            }
                    din[at(n, ic, iy, ix, s.in_channels, s.height, s.width)] = acc;
                }
}

void relu_forward(std::span<double> x) {
    for (auto& v : x)
        if (v < 0.0) v = 0.0;
}

void relu_backward(std::span<const double> y, std::span<double> dx) {
    for (std::size_t i = 0; i < dx.size(); ++i)
        if (!(y[i] > 0.0)) dx[i] = 0.0;
}

void avgpool2_forward(int planes, int h, int w, std::span<const double> in, std::span<double> out) {
    const int oh = h / 2, ow = w / 2;
    for (int p = 0; p < planes; ++p)
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x) {
                const double sum = in[at(0, p, 2 * y, 2 * x, planes, h, w)] + in[at(0, p, 2 * y, 2 * x + 1, planes, h, w)] +
                                   in[at(0, p, 2 * y + 1, 2 * x, planes, h, w)] +
                                   in[at(0, p, 2 * y + 1, 2 * x + 1, planes, h, w)];
                out[at(0, p, y, x, planes, oh, ow)] = 0.25 * sum;
            }
}

void avgpool2_backward(int planes, int h, int w, std::span<const double> dout, std::span<double> din) {
    const int oh = h / 2, ow = w / 2;
    for (int p = 0; p < planes; ++p)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) din[at(0, p, y, x, planes, h, w)] = 0.25 * dout[at(0, p, y / 2, x / 2, planes, oh, ow)];
}

void global_avg_pool_forward(int planes, int plane_size, std::span<const double> in, std::span<double> out) {
    for (int p = 0; p < planes; ++p) {
        double sum = 0.0;
        for (int i = 0; i < plane_size; ++i) sum += in[static_cast<std::size_t>(p) * static_cast<std::size_t>(plane_size) + static_cast<std::size_t>(i)];
        out[static_cast<std::size_t>(p)] = sum / plane_size;
    }
}

void global_avg_pool_backward(int planes, int plane_size, std::span<const double> dout, std::span<double> din) {
    for (int p = 0; p < planes; ++p)
        for (int i = 0; i < plane_size; ++i)
            din[static_cast<std::size_t>(p) * static_cast<std::size_t>(plane_size) + static_cast<std::size_t>(i)] =
                dout[static_cast<std::size_t>(p)] / plane_size;
}

void dense_forward(int batch, int in_dim, int out_dim, std::span<const double> in, std::span<const double> weight,
                   std::span<const double> bias, std::span<double> out) {
    for (int n = 0; n < batch; ++n)
        for (int o = 0; o < out_dim; ++o) {
            double acc = bias[static_cast<std::size_t>(o)];
            for (int i = 0; i < in_dim; ++i)
                acc += weight[static_cast<std::size_t>(o * in_dim + i)] * in[static_cast<std::size_t>(n * in_dim + i)];
            out[static_cast<std::size_t>(n * out_dim + o)] = acc;
        }
}

void dense_backward(int batch, int in_dim, int out_dim, std::span<const double> in, std::span<const double> dout,
                    std::span<const double> weight, std::span<double> dweight, std::span<double> dbias,
                    std::span<double> din) {
    for (int o = 0; o < out_dim; ++o) {
        double db = 0.0;
        for (int n = 0; n < batch; ++n) db += dout[static_cast<std::size_t>(n * out_dim + o)];
        dbias[static_cast<std::size_t>(o)] += db;
        for (int i = 0; i < in_dim; ++i) {
            double acc = 0.0;
            for (int n = 0; n < batch; ++n)
                acc += dout[static_cast<std::size_t>(n * out_dim + o)] * in[static_cast<std::size_t>(n * in_dim + i)];
            dweight[static_cast<std::size_t>(o * in_dim + i)] += acc;
        }
    }
    if (din.empty()) return;
    for (int n = 0; n < batch; ++n)
        for (int i = 0; i < in_dim; ++i) {
            double acc = 0.0;
            for (int o = 0; o < out_dim; ++o)
                acc += weight[static_cast<std::size_t>(o * in_dim + i)] * dout[static_cast<std::size_t>(n * out_dim + o)];
            din[static_cast<std::size_t>(n * in_dim + i)] = acc;
        }
}

} // namespace wsmil::kernels::serial
