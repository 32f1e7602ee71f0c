// Copyright 2026 The EdgeDerm Authors
// SPDX-License-Identifier: Apache-2.0

#include "edgederm/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace edgederm {

Padding resolve_padding(PadMode mode, std::size_t in_h, std::size_t in_w, std::size_t kernel_h,
                        std::size_t kernel_w, int stride) {
  if (stride < 1) throw ShapeError("stride must be >= 1");
  if (mode == PadMode::kValid) return {};
  auto total = [stride](std::size_t in, std::size_t k) {
    const long s = stride;
    const long out = (static_cast<long>(in) + s - 1) / s;
    return static_cast<int>(std::max<long>((out - 1) * s + static_cast<long>(k) - static_cast<long>(in), 0));
  };
  const int th = total(in_h, kernel_h);
  const int tw = total(in_w, kernel_w);
  // Extra pixel of an odd total goes top/left.
  return {th - th / 2, th / 2, tw - tw / 2, tw / 2};
}

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, int stride, int pad_before,
                               int pad_after) {
  if (stride < 1) throw ShapeError("stride must be >= 1, got " + std::to_string(stride));
  if (pad_before < 0 || pad_after < 0) throw ShapeError("padding must be >= 0");
  const long span = static_cast<long>(in) + pad_before + pad_after - static_cast<long>(kernel);
  if (span < 0) {
    throw ShapeError("kernel extent " + std::to_string(kernel) + " exceeds padded input extent " +
                     std::to_string(in + pad_before + pad_after));
  }
  return static_cast<std::size_t>(span / stride + 1);
}

namespace {

struct ConvGeometry {
  std::size_t batch, in_h, in_w, in_ch, out_h, out_w, out_ch, kh, kw;
};

ConvGeometry check_conv(const Tensor& input, const ConvParams& p, bool depthwise) {
  const char* name = depthwise ? "depthwise_conv2d" : "conv2d";
  if (input.rank() != 4) {
    throw ShapeError(std::string(name) + ": input must be 4-D NHWC, got " + to_string(input.shape()));
  }
  if (p.weights.rank() != 4) {
    throw ShapeError(std::string(name) + ": kernel must be 4-D, got " + to_string(p.weights.shape()));
  }
  ConvGeometry g{};
  g.batch = input.dim(0);
  g.in_h = input.dim(1);
  g.in_w = input.dim(2);
  g.in_ch = input.dim(3);
  g.kh = p.weights.dim(0);
  g.kw = p.weights.dim(1);
  if (p.weights.dim(2) != g.in_ch) {
    throw ShapeError(std::string(name) + ": input has " + std::to_string(g.in_ch) +
                     " channels but kernel expects " + std::to_string(p.weights.dim(2)));
  }
  if (depthwise && p.weights.dim(3) != 1) {
    throw ShapeError("depthwise_conv2d: channel multiplier must be 1, kernel is " +
                     to_string(p.weights.shape()));
  }
  g.out_ch = depthwise ? g.in_ch : p.weights.dim(3);
  if (p.bias.size() != g.out_ch) {
    throw ShapeError(std::string(name) + ": bias length " + std::to_string(p.bias.size()) +
                     " does not match output channels " + std::to_string(g.out_ch));
  }
  g.out_h = conv_output_extent(g.in_h, g.kh, p.stride, p.padding.top, p.padding.bottom);
  g.out_w = conv_output_extent(g.in_w, g.kw, p.stride, p.padding.left, p.padding.right);
  return g;
}

}  // namespace

Tensor conv2d(const Tensor& input, const ConvParams& p) {
  const ConvGeometry g = check_conv(input, p, false);
  Tensor out({g.batch, g.out_h, g.out_w, g.out_ch});
  const float* in = input.data().data();
  const float* w = p.weights.data().data();
  float* o = out.data().data();

  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t oy = 0; oy < g.out_h; ++oy) {
      for (std::size_t ox = 0; ox < g.out_w; ++ox) {
        float* acc = o + ((n * g.out_h + oy) * g.out_w + ox) * g.out_ch;
        std::copy(p.bias.begin(), p.bias.end(), acc);
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
          const long iy = static_cast<long>(oy) * p.stride + static_cast<long>(ky) - p.padding.top;
          if (iy < 0 || iy >= static_cast<long>(g.in_h)) continue;
          for (std::size_t kx = 0; kx < g.kw; ++kx) {
            const long ix = static_cast<long>(ox) * p.stride + static_cast<long>(kx) - p.padding.left;
            if (ix < 0 || ix >= static_cast<long>(g.in_w)) continue;
            const float* pixel = in + ((n * g.in_h + iy) * g.in_w + ix) * g.in_ch;
            const float* wk = w + (ky * g.kw + kx) * g.in_ch * g.out_ch;
            for (std::size_t ic = 0; ic < g.in_ch; ++ic) {
              const float v = pixel[ic];
              const float* wrow = wk + ic * g.out_ch;
              for (std::size_t oc = 0; oc < g.out_ch; ++oc) acc[oc] += v * wrow[oc];
            }
          }
        }
      }
    }
  }
  return out;
}

Tensor depthwise_conv2d(const Tensor& input, const ConvParams& p) {
  const ConvGeometry g = check_conv(input, p, true);
  Tensor out({g.batch, g.out_h, g.out_w, g.out_ch});
  const float* in = input.data().data();
  const float* w = p.weights.data().data();
  float* o = out.data().data();
  const std::size_t ch = g.in_ch;

  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t oy = 0; oy < g.out_h; ++oy) {
      for (std::size_t ox = 0; ox < g.out_w; ++ox) {
        float* acc = o + ((n * g.out_h + oy) * g.out_w + ox) * ch;
        std::copy(p.bias.begin(), p.bias.end(), acc);
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
          const long iy = static_cast<long>(oy) * p.stride + static_cast<long>(ky) - p.padding.top;
          if (iy < 0 || iy >= static_cast<long>(g.in_h)) continue;
          for (std::size_t kx = 0; kx < g.kw; ++kx) {
            const long ix = static_cast<long>(ox) * p.stride + static_cast<long>(kx) - p.padding.left;
            if (ix < 0 || ix >= static_cast<long>(g.in_w)) continue;
            const float* pixel = in + ((n * g.in_h + iy) * g.in_w + ix) * ch;
            const float* wk = w + (ky * g.kw + kx) * ch;
            for (std::size_t c = 0; c < ch; ++c) acc[c] += pixel[c] * wk[c];
          }
        }
      }
    }
  }
  return out;
}

Tensor relu6(const Tensor& input) {
  Tensor out = input;
  relu6_inplace(out);
  return out;
}

void relu6_inplace(Tensor& tensor) noexcept {
  for (float& v : tensor.data()) v = std::min(std::max(v, 0.0f), 6.0f);
}

std::vector<float> global_avg_pool(const Tensor& input) {
  if (input.rank() != 4) {
    throw ShapeError("global_avg_pool: input must be 4-D NHWC, got " + to_string(input.shape()));
  }
  const std::size_t ch = input.dim(3);
  const std::size_t positions = input.size() / ch;
  std::vector<double> sum(ch, 0.0);
  const float* in = input.data().data();
  for (std::size_t i = 0; i < positions; ++i) {
    for (std::size_t c = 0; c < ch; ++c) sum[c] += in[i * ch + c];
  }
  std::vector<float> out(ch);
  for (std::size_t c = 0; c < ch; ++c) out[c] = static_cast<float>(sum[c] / static_cast<double>(positions));
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw ShapeError("softmax: empty input");
  for (double v : logits) {
    if (!std::isfinite(v)) throw NumericError("softmax: non-finite logit");
  }
  const double max = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - max);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

std::vector<double> softmax(std::span<const float> logits) {
  std::vector<double> wide(logits.begin(), logits.end());
  return softmax(std::span<const double>(wide));
}

ConvParams batchnorm_fold(const ConvParams& conv, const BatchNorm& bn, ConvKind kind) {
  if (conv.weights.rank() != 4) throw ShapeError("batchnorm_fold: kernel must be 4-D");
  const std::size_t out_ch = kind == ConvKind::kDepthwise ? conv.weights.dim(2) : conv.weights.dim(3);
  const auto check = [out_ch](std::size_t n, const char* what) {
    if (n != out_ch) {
      throw ShapeError(std::string("batchnorm_fold: ") + what + " has length " + std::to_string(n) +
                       ", expected " + std::to_string(out_ch));
    }
  };
  check(conv.bias.size(), "bias");
  check(bn.gamma.size(), "gamma");
  check(bn.beta.size(), "beta");
  check(bn.mean.size(), "mean");
  check(bn.variance.size(), "variance");

  std::vector<double> factor(out_ch);
  for (std::size_t c = 0; c < out_ch; ++c) {
    if (bn.variance[c] < 0.0f) throw NumericError("batchnorm_fold: negative variance");
    factor[c] = static_cast<double>(bn.gamma[c]) /
                std::sqrt(static_cast<double>(bn.variance[c]) + static_cast<double>(bn.epsilon));
  }

  ConvParams folded = conv;
  // (kh,kw,in,out) and (kh,kw,ch,1) both put the output channel at flat index % out_ch.
  auto w = folded.weights.data();
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = static_cast<float>(w[i] * factor[i % out_ch]);
  for (std::size_t c = 0; c < out_ch; ++c) {
    folded.bias[c] = static_cast<float>((conv.bias[c] - bn.mean[c]) * factor[c] + bn.beta[c]);
  }
  return folded;
}

}  // namespace edgederm
