#include "wsmil/kernels.hpp"

#include <algorithm>
#include <cstddef>
#include <vector>

namespace wsmil::kernels::parallel {

namespace {
using std::size_t;

inline size_t sz(int v) { return static_cast<size_t>(v); }

// Valid output x range for kernel column kx with padding 1.
inline int x_begin(int kx) { return kx == 0 ? 1 : 0; }
inline int x_end(int kx, int w) { return kx == 2 ? w - 1 : w; }
} // namespace

// Column matrix of one image: row k = (ic, ky, kx), column p = y * W + x,
// zero where the tap falls into the padding.
static void im2col(int channels, int H, int W, const double* src, double* col) {
    const size_t P = sz(H) * sz(W);
    for (int ic = 0; ic < channels; ++ic)
        for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
                double* row = col + (sz(ic) * 9 + sz(ky * 3 + kx)) * P;
                const double* plane = src + sz(ic) * P;
                const int xb = x_begin(kx), xe = x_end(kx, W), shift = kx - 1;
                for (int y = 0; y < H; ++y) {
                    double* r = row + sz(y) * sz(W);
                    const int iy = y + ky - 1;
                    if (iy < 0 || iy >= H) {
                        std::fill(r, r + W, 0.0);
                        continue;
                    }
                    const double* irow = plane + sz(iy) * sz(W);
                    r[0] = 0.0;
                    r[W - 1] = 0.0;
                    for (int x = xb; x < xe; ++x) r[x] = irow[x + shift];
                }
            }
}

void conv3x3_forward(const ConvShape& s, std::span<const double> in, std::span<const double> weight,
                     std::span<const double> bias, std::span<double> out) {
    const size_t plane = s.plane();
    const size_t K = sz(s.in_channels) * 9;
#pragma omp parallel
    {
        std::vector<double> col(K * plane);
#pragma omp for schedule(static)
        for (int n = 0; n < s.batch; ++n) {
            im2col(s.in_channels, s.height, s.width, in.data() + sz(n) * sz(s.in_channels) * plane, col.data());
            double* o_n = out.data() + sz(n) * sz(s.out_channels) * plane;
            int oc = 0;
            // Four output channels per pass over the column matrix.
            for (; oc + 4 <= s.out_channels; oc += 4) {
                double* o0 = o_n + sz(oc) * plane;
                double* o1 = o0 + plane;
                double* o2 = o1 + plane;
                double* o3 = o2 + plane;
                std::fill(o0, o0 + plane, bias[sz(oc)]);
                std::fill(o1, o1 + plane, bias[sz(oc + 1)]);
                std::fill(o2, o2 + plane, bias[sz(oc + 2)]);
                std::fill(o3, o3 + plane, bias[sz(oc + 3)]);
                const double* w0 = weight.data() + sz(oc) * K;
                for (size_t k = 0; k < K; ++k) {
                    const double a = w0[k], b = w0[K + k], c2 = w0[2 * K + k], d = w0[3 * K + k];
                    const double* c = col.data() + k * plane;
#pragma omp simd
                    for (size_t p = 0; p < plane; ++p) {
                        o0[p] += a * c[p];
                        o1[p] += b * c[p];
                        o2[p] += c2 * c[p];
                        o3[p] += d * c[p];
                    }
                }
            }
            for (; oc < s.out_channels; ++oc) {
                double* o = o_n + sz(oc) * plane;
                std::fill(o, o + plane, bias[sz(oc)]);
                const double* w = weight.data() + sz(oc) * K;
                for (size_t k = 0; k < K; ++k) {
                    const double wk = w[k];
                    const double* c = col.data() + k * plane;
#pragma omp simd
                    for (size_t p = 0; p < plane; ++p) o[p] += wk * c[p];
                }
            }
        }
    }
}

// Transposed column matrix: row p = y * W + x holds the K = channels * 9 taps.
static void im2col_t(int channels, int H, int W, const double* src, double* colT) {
    const size_t P = sz(H) * sz(W), K = sz(channels) * 9;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double* row = colT + (sz(y) * sz(W) + sz(x)) * K;
            for (int ic = 0; ic < channels; ++ic) {
                const double* plane = src + sz(ic) * P;
                for (int ky = 0; ky < 3; ++ky) {
                    const int iy = y + ky - 1;
                    for (int kx = 0; kx < 3; ++kx) {
                        const int ix = x + kx - 1;
                        *row++ = (iy < 0 || iy >= H || ix < 0 || ix >= W) ? 0.0 : plane[sz(iy) * sz(W) + sz(ix)];
                    }
                }
            }
        }
}

void conv3x3_backward(const ConvShape& s, std::span<const double> in, std::span<const double> dout,
                      std::span<const double> weight, std::span<double> dweight, std::span<double> dbias,
                      std::span<double> din) {
    const int H = s.height, W = s.width;
    const size_t plane = s.plane();
    const size_t K = sz(s.in_channels) * 9;

#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < s.out_channels; ++oc) {
        double acc = 0.0;
        for (int n = 0; n < s.batch; ++n) {
            const double* d = dout.data() + (sz(n) * sz(s.out_channels) + sz(oc)) * plane;
#pragma omp simd reduction(+ : acc)
            for (size_t i = 0; i < plane; ++i) acc += d[i];
        }
        dbias[sz(oc)] += acc;
    }

    std::vector<double> cols(sz(s.batch) * plane * K);
#pragma omp parallel for schedule(static)
    for (int n = 0; n < s.batch; ++n)
        im2col_t(s.in_channels, H, W, in.data() + sz(n) * sz(s.in_channels) * plane, cols.data() + sz(n) * plane * K);

    // dW[oc][:] += dout[n][oc][p] * colT[n][p][:], images and pixels in order.
#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < s.out_channels; ++oc) {
        double* dw = dweight.data() + sz(oc) * K;
        for (int n = 0; n < s.batch; ++n) {
            const double* d = dout.data() + (sz(n) * sz(s.out_channels) + sz(oc)) * plane;
            const double* c = cols.data() + sz(n) * plane * K;
            size_t p = 0;
            for (; p + 4 <= plane; p += 4) {
                const double d0 = d[p], d1 = d[p + 1], d2 = d[p + 2], d3 = d[p + 3];
                const double* c0 = c + p * K;
                const double* c1 = c0 + K;
                const double* c2 = c1 + K;
                const double* c3 = c2 + K;
#pragma omp simd
                for (size_t k = 0; k < K; ++k) dw[k] += d0 * c0[k] + d1 * c1[k] + d2 * c2[k] + d3 * c3[k];
            }
            for (; p < plane; ++p) {
                const double dp = d[p];
                const double* cp = c + p * K;
#pragma omp simd
                for (size_t k = 0; k < K; ++k) dw[k] += dp * cp[k];
            }
        }
    }

    if (din.empty()) return;
#pragma omp parallel
    {
        std::vector<double> dcol(K);
#pragma omp for schedule(static)
        for (int n = 0; n < s.batch; ++n) {
            double* g = din.data() + sz(n) * sz(s.in_channels) * plane;
            std::fill(g, g + sz(s.in_channels) * plane, 0.0);
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x) {
                    const size_t p = sz(y) * sz(W) + sz(x);
                    std::fill(dcol.begin(), dcol.end(), 0.0);
                    const double* dn = dout.data() + sz(n) * sz(s.out_channels) * plane + p;
                    int oc = 0;
                    for (; oc + 4 <= s.out_channels; oc += 4) {
                        const double d0 = dn[sz(oc) * plane], d1 = dn[sz(oc + 1) * plane];
                        const double d2 = dn[sz(oc + 2) * plane], d3 = dn[sz(oc + 3) * plane];
                        const double* w0 = weight.data() + sz(oc) * K;
                        const double* w1 = w0 + K;
                        const double* w2 = w1 + K;
                        const double* w3 = w2 + K;
#pragma omp simd
                        for (size_t k = 0; k < K; ++k) dcol[k] += d0 * w0[k] + d1 * w1[k] + d2 * w2[k] + d3 * w3[k];
                    }
                    for (; oc < s.out_channels; ++oc) {
                        const double dp = dn[sz(oc) * plane];
                        const double* w = weight.data() + sz(oc) * K;
#pragma omp simd
                        for (size_t k = 0; k < K; ++k) dcol[k] += dp * w[k];
                    }
                    // Scatter each tap back to the input pixel it read.
                    const double* t = dcol.data();
                    for (int ic = 0; ic < s.in_channels; ++ic) {
                        double* gp = g + sz(ic) * plane;
                        for (int ky = 0; ky < 3; ++ky) {
                            const int iy = y + ky - 1;
                            for (int kx = 0; kx < 3; ++kx, ++t) {
                                const int ix = x + kx - 1;
                                if (iy >= 0 && iy < H && ix >= 0 && ix < W) gp[sz(iy) * sz(W) + sz(ix)] += *t;
                            }
                        }
                    }
                }
        }
    }
}

void relu_forward(std::span<double> x) {
    double* p = x.data();
    const auto n = static_cast<std::ptrdiff_t>(x.size());
#pragma omp parallel for simd schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) p[i] = p[i] > 0.0 ? p[i] : 0.0;
}

void relu_backward(std::span<const double> y, std::span<double> dx) {
    const double* yp = y.data();
    double* dp = dx.data();
    const auto n = static_cast<std::ptrdiff_t>(dx.size());
#pragma omp parallel for simd schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) dp[i] = yp[i] > 0.0 ? dp[i] : 0.0;
}

void avgpool2_forward(int planes, int h, int w, std::span<const double> in, std::span<double> out) {
    const int oh = h / 2, ow = w / 2;
#pragma omp parallel for schedule(static)
    for (int p = 0; p < planes; ++p) {
        const double* src = in.data() + sz(p) * sz(h) * sz(w);
        double* dst = out.data() + sz(p) * sz(oh) * sz(ow);
        for (int y = 0; y < oh; ++y) {
            const double* r0 = src + sz(2 * y) * sz(w);
            const double* r1 = r0 + w;
            for (int x = 0; x < ow; ++x)
                dst[sz(y) * sz(ow) + sz(x)] = 0.25 * (r0[2 * x] + r0[2 * x + 1] + r1[2 * x] + r1[2 * x + 1]);
        }
    }
}

void avgpool2_backward(int planes, int h, int w, std::span<const double> dout, std::span<double> din) {
    const int oh = h / 2, ow = w / 2;
#pragma omp parallel for schedule(static)
    for (int p = 0; p < planes; ++p) {
        const double* src = dout.data() + sz(p) * sz(oh) * sz(ow);
        double* dst = din.data() + sz(p) * sz(h) * sz(w);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) dst[sz(y) * sz(w) + sz(x)] = 0.25 * src[sz(y / 2) * sz(ow) + sz(x / 2)];
    }
}

void global_avg_pool_forward(int planes, int plane_size, std::span<const double> in, std::span<double> out) {
#pragma omp parallel for schedule(static)
    for (int p = 0; p < planes; ++p) {
        const double* src = in.data() + sz(p) * sz(plane_size);
        double sum = 0.0;
#pragma omp simd reduction(+ : sum)
        for (int i = 0; i < plane_size; ++i) sum += src[i];
        out[sz(p)] = sum / plane_size;
    }
}

void global_avg_pool_backward(int planes, int plane_size, std::span<const double> dout, std::span<double> din) {
#pragma omp parallel for schedule(static)
    for (int p = 0; p < planes; ++p) {
        const double g = dout[sz(p)] / plane_size;
        double* dst = din.data() + sz(p) * sz(plane_size);
        std::fill(dst, dst + plane_size, g);
    }
}

void dense_forward(int batch, int in_dim, int out_dim, std::span<const double> in, std::span<const double> weight,
                   std::span<const double> bias, std::span<double> out) {
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < batch; ++n) {
        for (int o = 0; o < out_dim; ++o) {
            const double* w = weight.data() + sz(o) * sz(in_dim);
            const double* x = in.data() + sz(n) * sz(in_dim);
            double acc = 0.0;
#pragma omp simd reduction(+ : acc)
            for (int i = 0; i < in_dim; ++i) acc += w[i] * x[i];
            out[sz(n) * sz(out_dim) + sz(o)] = bias[sz(o)] + acc;
        }
    }
}

void dense_backward(int batch, int in_dim, int out_dim, std::span<const double> in, std::span<const double> dout,
                    std::span<const double> weight, std::span<double> dweight, std::span<double> dbias,
                    std::span<double> din) {
#pragma omp parallel for schedule(static)
    for (int o = 0; o < out_dim; ++o) {
        double* dw = dweight.data() + sz(o) * sz(in_dim);
        double db = 0.0;
        for (int n = 0; n < batch; ++n) {
            const double g = dout[sz(n) * sz(out_dim) + sz(o)];
            const double* x = in.data() + sz(n) * sz(in_dim);
            db += g;
#pragma omp simd
            for (int i = 0; i < in_dim; ++i) dw[i] += g * x[i];
        }
        dbias[sz(o)] += db;
    }
    if (din.empty()) return;
#pragma omp parallel for schedule(static)
    for (int n = 0; n < batch; ++n) {
        double* dx = din.data() + sz(n) * sz(in_dim);
        std::fill(dx, dx + in_dim, 0.0);
        for (int o = 0; o < out_dim; ++o) {
            const double g = dout[sz(n) * sz(out_dim) + sz(o)];
            const double* w = weight.data() + sz(o) * sz(in_dim);
#pragma omp simd
            for (int i = 0; i < in_dim; ++i) dx[i] += g * w[i];
        }
    }
}

} // namespace wsmil::kernels::parallel
