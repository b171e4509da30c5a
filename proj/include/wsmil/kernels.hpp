#pragma once

// Dense CPU kernels for the patch encoder. Tensors are contiguous NCHW
// doubles. Two implementations share one interface:
//
//   serial::   straightforward per-output loops, kept as the test reference;
//   parallel:: OpenMP over independent outputs with SIMD inner loops.
//
// Work in the parallel kernels is split by output element only, so results
// do not depend on the thread count.

#include <span>

namespace wsmil::kernels {

struct ConvShape {
    int batch = 1;
    int in_channels = 1;
    int out_channels = 1;
    int height = 1;
    int width = 1;

    std::size_t input_size() const noexcept { return plane() * static_cast<std::size_t>(batch * in_channels); }
    std::size_t output_size() const noexcept { return plane() * static_cast<std::size_t>(batch * out_channels); }
    std::size_t weight_size() const noexcept { return static_cast<std::size_t>(out_channels * in_channels * 9); }
    std::size_t plane() const noexcept { return static_cast<std::size_t>(height) * static_cast<std::size_t>(width); }
};

#define WSMIL_KERNEL_DECLS                                                                                        \
    /* 3x3 convolution, zero padding 1, stride 1. weight is [out][in][3][3]. */                                   \
    void conv3x3_forward(const ConvShape& s, std::span<const double> in, std::span<const double> weight,          \
                         std::span<const double> bias, std::span<double> out);                                   \
    /* Accumulates into dweight/dbias. din is overwritten; pass an empty span to skip it. */                      \
    void conv3x3_backward(const ConvShape& s, std::span<const double> in, std::span<const double> dout,           \
                          std::span<const double> weight, std::span<double> dweight, std::span<double> dbias,    \
                          std::span<double> din);                                                                \
    void relu_forward(std::span<double> x);                                                                      \
    /* dx *= (y > 0) */                                                                                          \
    void relu_backward(std::span<const double> y, std::span<double> dx);                                         \
    /* 2x2 average pooling, stride 2, over planes of size h x w (even). */                                       \
    void avgpool2_forward(int planes, int h, int w, std::span<const double> in, std::span<double> out);          \
    void avgpool2_backward(int planes, int h, int w, std::span<const double> dout, std::span<double> din);       \
    void global_avg_pool_forward(int planes, int plane_size, std::span<const double> in, std::span<double> out);  \
    void global_avg_pool_backward(int planes, int plane_size, std::span<const double> dout,                      \
                                  std::span<double> din);                                                        \
    /* out[n][o] = bias[o] + sum_i weight[o][i] * in[n][i] */                                                    \
    void dense_forward(int batch, int in_dim, int out_dim, std::span<const double> in,                           \
                       std::span<const double> weight, std::span<const double> bias, std::span<double> out);     \
    void dense_backward(int batch, int in_dim, int out_dim, std::span<const double> in,                          \
                        std::span<const double> dout, std::span<const double> weight, std::span<double> dweight, \
                        std::span<double> dbias, std::span<double> din);

namespace serial {
WSMIL_KERNEL_DECLS
}

namespace parallel {
WSMIL_KERNEL_DECLS
}

#undef WSMIL_KERNEL_DECLS

} // namespace wsmil::kernels
