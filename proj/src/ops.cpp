#include "dtnet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dtnet/errors.hpp"

namespace dtnet {

namespace {

std::string shape_str(const Tensor& t) {
  std::string s = "[";
  for (int i = 0; i < t.ndim(); ++i) {
    if (i) s += ",";
    s += std::to_string(t.dim(i));
  }
  return s + "]";
}

void require_4d(const Tensor& t, const char* what) {
  if (t.ndim() != 4) {
    throw ShapeError(std::string(what) + " must be 4-d [N,C,H,W], got " + shape_str(t));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) +
                     " vs " + shape_str(b));
  }
}

// Integer ceil/floor division for b > 0 (loop-bound arithmetic with padding).
int ceil_div(int a, int b) { return a > 0 ? (a + b - 1) / b : a / b; }
int floor_div(int a, int b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

struct ConvDims {
  int n, c_in, h, w;
  int c_out, kh, kw;
  int stride, pad;
  int h_out, w_out;
};

ConvDims conv_dims(const Tensor& input, const ConvParams& p) {
  require_4d(input, "conv2d input");
  require_4d(p.weight, "conv2d weight");
  ConvDims d;
  d.n = input.dim(0);
  d.c_in = input.dim(1);
  d.h = input.dim(2);
  d.w = input.dim(3);
  d.c_out = p.weight.dim(0);
  d.kh = p.weight.dim(2);
  d.kw = p.weight.dim(3);
  d.stride = p.stride;
  d.pad = p.padding;
  if (p.weight.dim(1) != d.c_in) {
    throw ShapeError("conv2d: input has " + std::to_string(d.c_in) +
                     " channels but weight expects " + std::to_string(p.weight.dim(1)));
  }
  if (d.stride < 1) throw ConfigError("conv2d: stride must be >= 1");
  if (d.pad < 0) throw ConfigError("conv2d: padding must be >= 0");
  const int h_span = d.h + 2 * d.pad - d.kh;
  const int w_span = d.w + 2 * d.pad - d.kw;
  if (h_span < 0 || w_span < 0 || h_span % d.stride != 0 || w_span % d.stride != 0) {
    throw ConfigError("conv2d: output size (" + std::to_string(d.h) + "+2*" +
                      std::to_string(d.pad) + "-" + std::to_string(d.kh) + ")/" +
                      std::to_string(d.stride) + "+1 is not a positive integer");
  }
  d.h_out = h_span / d.stride + 1;
  d.w_out = w_span / d.stride + 1;
  if (p.bias.defined() &&
      (p.bias.ndim() != 1 || p.bias.dim(0) != d.c_out)) {
    throw ShapeError("conv2d: bias must be [C_out]");
  }
  return d;
}

// Copies one input plane into a zero-padded scratch plane so the fused
// 3x3 kernels below run branchless full-width rows.
void pad_plane(const double* src, int h, int w, int pad, double* dst) {
  const int pw = w + 2 * pad;
  const int ph = h + 2 * pad;
  std::fill(dst, dst + static_cast<std::size_t>(pw) * ph, 0.0);
  for (int r = 0; r < h; ++r) {
    std::copy_n(src + static_cast<std::size_t>(r) * w, w,
                dst + static_cast<std::size_t>(r + pad) * pw + pad);
  }
}

// 3x3 stride-1 forward: all nine taps fused into one pass per (ci, co) pair.
void conv3x3_forward(const ConvDims& d, const double* in, const double* w,
                     const double* bias, double* out,
                     std::vector<double>& scratch) {
  const int pw = d.w + 2 * d.pad;
  scratch.resize(static_cast<std::size_t>(pw) * (d.h + 2 * d.pad));
  const std::size_t out_plane_sz = static_cast<std::size_t>(d.h_out) * d.w_out;
  for (int n = 0; n < d.n; ++n) {
    for (int co = 0; co < d.c_out; ++co) {
      double* op = out + (static_cast<std::size_t>(n) * d.c_out + co) * out_plane_sz;
      std::fill(op, op + out_plane_sz, bias ? bias[co] : 0.0);
    }
    for (int ci = 0; ci < d.c_in; ++ci) {
      pad_plane(in + (static_cast<std::size_t>(n) * d.c_in + ci) * d.h * d.w, d.h,
                d.w, d.pad, scratch.data());
      for (int co = 0; co < d.c_out; ++co) {
        const double* wk = w + ((static_cast<std::size_t>(co) * d.c_in + ci) * 9);
        const double w00 = wk[0], w01 = wk[1], w02 = wk[2];
        const double w10 = wk[3], w11 = wk[4], w12 = wk[5];
        const double w20 = wk[6], w21 = wk[7], w22 = wk[8];
        double* __restrict__ op =
            out + (static_cast<std::size_t>(n) * d.c_out + co) * out_plane_sz;
        for (int oh = 0; oh < d.h_out; ++oh) {
          const double* __restrict__ r0 = scratch.data() + static_cast<std::size_t>(oh) * pw;
          const double* __restrict__ r1 = r0 + pw;
          const double* __restrict__ r2 = r1 + pw;
          double* __restrict__ orow = op + static_cast<std::size_t>(oh) * d.w_out;
          for (int ow = 0; ow < d.w_out; ++ow) {
            orow[ow] += w00 * r0[ow] + w01 * r0[ow + 1] + w02 * r0[ow + 2] +
                        w10 * r1[ow] + w11 * r1[ow + 1] + w12 * r1[ow + 2] +
                        w20 * r2[ow] + w21 * r2[ow + 1] + w22 * r2[ow + 2];
          }
        }
      }
    }
  }
}

// 3x3 stride-1 input gradient: a full correlation of the output gradient
// with the flipped kernel, using the same padded-plane trick.
void conv3x3_backward_input(const ConvDims& d, const double* dout, const double* w,
                            double* din, std::vector<double>& scratch) {
  const int hpad = 2 - d.pad;  // padding that realigns d_out over the input
  const int pw = d.w_out + 2 * hpad;
  scratch.resize(static_cast<std::size_t>(pw) * (d.h_out + 2 * hpad));
  const std::size_t in_plane_sz = static_cast<std::size_t>(d.h) * d.w;
  for (int n = 0; n < d.n; ++n) {
    for (int co = 0; co < d.c_out; ++co) {
      pad_plane(dout + (static_cast<std::size_t>(n) * d.c_out + co) * d.h_out * d.w_out,
                d.h_out, d.w_out, hpad, scratch.data());
      for (int ci = 0; ci < d.c_in; ++ci) {
        const double* wk = w + ((static_cast<std::size_t>(co) * d.c_in + ci) * 9);
        // flipped taps
        const double w00 = wk[8], w01 = wk[7], w02 = wk[6];
        const double w10 = wk[5], w11 = wk[4], w12 = wk[3];
        const double w20 = wk[2], w21 = wk[1], w22 = wk[0];
        double* __restrict__ ip =
            din + (static_cast<std::size_t>(n) * d.c_in + ci) * in_plane_sz;
        for (int ih = 0; ih < d.h; ++ih) {
          const double* __restrict__ r0 = scratch.data() + static_cast<std::size_t>(ih) * pw;
          const double* __restrict__ r1 = r0 + pw;
          const double* __restrict__ r2 = r1 + pw;
          double* __restrict__ irow = ip + static_cast<std::size_t>(ih) * d.w;
          for (int iw = 0; iw < d.w; ++iw) {
            irow[iw] += w00 * r0[iw] + w01 * r0[iw + 1] + w02 * r0[iw + 2] +
                        w10 * r1[iw] + w11 * r1[iw + 1] + w12 * r1[iw + 2] +
                        w20 * r2[iw] + w21 * r2[iw + 1] + w22 * r2[iw + 2];
          }
        }
      }
    }
  }
}

// 3x3 stride-1 weight gradient: nine running sums per (ci, co) pair over one
// pass of the output gradient.
void conv3x3_backward_weight(const ConvDims& d, const double* in, const double* dout,
                             double* dw, std::vector<double>& scratch) {
  const int pw = d.w + 2 * d.pad;
  scratch.resize(static_cast<std::size_t>(pw) * (d.h + 2 * d.pad));
  for (int n = 0; n < d.n; ++n) {
    for (int ci = 0; ci < d.c_in; ++ci) {
      pad_plane(in + (static_cast<std::size_t>(n) * d.c_in + ci) * d.h * d.w, d.h,
                d.w, d.pad, scratch.data());
      for (int co = 0; co < d.c_out; ++co) {
        const double* __restrict__ gp =
            dout + (static_cast<std::size_t>(n) * d.c_out + co) * d.h_out * d.w_out;
        double a00 = 0, a01 = 0, a02 = 0, a10 = 0, a11 = 0, a12 = 0, a20 = 0,
               a21 = 0, a22 = 0;
        for (int oh = 0; oh < d.h_out; ++oh) {
          const double* __restrict__ r0 = scratch.data() + static_cast<std::size_t>(oh) * pw;
          const double* __restrict__ r1 = r0 + pw;
          const double* __restrict__ r2 = r1 + pw;
          const double* __restrict__ grow = gp + static_cast<std::size_t>(oh) * d.w_out;
          for (int ow = 0; ow < d.w_out; ++ow) {
            const double g = grow[ow];
            a00 += g * r0[ow];
            a01 += g * r0[ow + 1];
            a02 += g * r0[ow + 2];
            a10 += g * r1[ow];
            a11 += g * r1[ow + 1];
            a12 += g * r1[ow + 2];
            a20 += g * r2[ow];
            a21 += g * r2[ow + 1];
            a22 += g * r2[ow + 2];
          }
        }
        double* wk = dw + ((static_cast<std::size_t>(co) * d.c_in + ci) * 9);
        wk[0] += a00;
        wk[1] += a01;
        wk[2] += a02;
        wk[3] += a10;
        wk[4] += a11;
        wk[5] += a12;
        wk[6] += a20;
        wk[7] += a21;
        wk[8] += a22;
      }
    }
  }
}

bool fused3x3_applies(const ConvDims& d) {
  return d.kh == 3 && d.kw == 3 && d.stride == 1 && d.pad <= 2;
}

// out[n,co,oh,ow] += sum_{ci,kh,kw} w[co,ci,kh,kw] * in[n,ci,oh*s+kh-p,ow*s+kw-p]
// Inner loops run over contiguous output/input rows so they vectorize.
void conv_forward_kernel(const ConvDims& d, const double* in, const double* w,
                         const double* bias, double* out) {
  for (int n = 0; n < d.n; ++n) {
    for (int co = 0; co < d.c_out; ++co) {
      double* out_plane = out + (static_cast<std::size_t>(n) * d.c_out + co) * d.h_out * d.w_out;
      const double b = bias ? bias[co] : 0.0;
      std::fill(out_plane, out_plane + static_cast<std::size_t>(d.h_out) * d.w_out, b);
      for (int ci = 0; ci < d.c_in; ++ci) {
        const double* in_plane = in + (static_cast<std::size_t>(n) * d.c_in + ci) * d.h * d.w;
        const double* w_k = w + ((static_cast<std::size_t>(co) * d.c_in + ci) * d.kh) * d.kw;
        for (int kh = 0; kh < d.kh; ++kh) {
          const int oh_lo = std::max(0, ceil_div(d.pad - kh, d.stride));
          const int oh_hi = std::min(d.h_out, floor_div(d.h - 1 + d.pad - kh, d.stride) + 1);
          for (int kw = 0; kw < d.kw; ++kw) {
            const double wv = w_k[kh * d.kw + kw];
            const int ow_lo = std::max(0, ceil_div(d.pad - kw, d.stride));
            const int ow_hi = std::min(d.w_out, floor_div(d.w - 1 + d.pad - kw, d.stride) + 1);
            const int off = kw - d.pad;
            for (int oh = oh_lo; oh < oh_hi; ++oh) {
              const int ih = oh * d.stride + kh - d.pad;
              const double* in_row = in_plane + static_cast<std::size_t>(ih) * d.w;
              double* out_row = out_plane + static_cast<std::size_t>(oh) * d.w_out;
              if (d.stride == 1) {
                for (int ow = ow_lo; ow < ow_hi; ++ow) out_row[ow] += wv * in_row[ow + off];
              } else {
                for (int ow = ow_lo; ow < ow_hi; ++ow)
                  out_row[ow] += wv * in_row[ow * d.stride + off];
              }
            }
          }
        }
      }
    }
  }
}

void conv_backward_input_kernel(const ConvDims& d, const double* dout,
                                const double* w, double* din) {
  for (int n = 0; n < d.n; ++n) {
    for (int co = 0; co < d.c_out; ++co) {
      const double* dout_plane =
          dout + (static_cast<std::size_t>(n) * d.c_out + co) * d.h_out * d.w_out;
      for (int ci = 0; ci < d.c_in; ++ci) {
        double* din_plane = din + (static_cast<std::size_t>(n) * d.c_in + ci) * d.h * d.w;
        const double* w_k = w + ((static_cast<std::size_t>(co) * d.c_in + ci) * d.kh) * d.kw;
        for (int kh = 0; kh < d.kh; ++kh) {
          const int oh_lo = std::max(0, ceil_div(d.pad - kh, d.stride));
          const int oh_hi = std::min(d.h_out, floor_div(d.h - 1 + d.pad - kh, d.stride) + 1);
          for (int kw = 0; kw < d.kw; ++kw) {
            const double wv = w_k[kh * d.kw + kw];
            const int ow_lo = std::max(0, ceil_div(d.pad - kw, d.stride));
            const int ow_hi = std::min(d.w_out, floor_div(d.w - 1 + d.pad - kw, d.stride) + 1);
            const int off = kw - d.pad;
            for (int oh = oh_lo; oh < oh_hi; ++oh) {
              const int ih = oh * d.stride + kh - d.pad;
              double* din_row = din_plane + static_cast<std::size_t>(ih) * d.w;
              const double* dout_row = dout_plane + static_cast<std::size_t>(oh) * d.w_out;
              if (d.stride == 1) {
                for (int ow = ow_lo; ow < ow_hi; ++ow) din_row[ow + off] += wv * dout_row[ow];
              } else {
                for (int ow = ow_lo; ow < ow_hi; ++ow)
                  din_row[ow * d.stride + off] += wv * dout_row[ow];
              }
            }
          }
        }
      }
    }
  }
}

void conv_backward_weight_kernel(const ConvDims& d, const double* in,
                                 const double* dout, double* dw) {
  for (int n = 0; n < d.n; ++n) {
    for (int co = 0; co < d.c_out; ++co) {
      const double* dout_plane =
          dout + (static_cast<std::size_t>(n) * d.c_out + co) * d.h_out * d.w_out;
      for (int ci = 0; ci < d.c_in; ++ci) {
        const double* in_plane = in + (static_cast<std::size_t>(n) * d.c_in + ci) * d.h * d.w;
        double* dw_k = dw + ((static_cast<std::size_t>(co) * d.c_in + ci) * d.kh) * d.kw;
        for (int kh = 0; kh < d.kh; ++kh) {
          const int oh_lo = std::max(0, ceil_div(d.pad - kh, d.stride));
          const int oh_hi = std::min(d.h_out, floor_div(d.h - 1 + d.pad - kh, d.stride) + 1);
          for (int kw = 0; kw < d.kw; ++kw) {
            const int ow_lo = std::max(0, ceil_div(d.pad - kw, d.stride));
            const int ow_hi = std::min(d.w_out, floor_div(d.w - 1 + d.pad - kw, d.stride) + 1);
            const int off = kw - d.pad;
            double acc = 0.0;
            for (int oh = oh_lo; oh < oh_hi; ++oh) {
              const int ih = oh * d.stride + kh - d.pad;
              const double* in_row = in_plane + static_cast<std::size_t>(ih) * d.w;
              const double* dout_row = dout_plane + static_cast<std::size_t>(oh) * d.w_out;
              if (d.stride == 1) {
                for (int ow = ow_lo; ow < ow_hi; ++ow) acc += dout_row[ow] * in_row[ow + off];
              } else {
                for (int ow = ow_lo; ow < ow_hi; ++ow)
                  acc += dout_row[ow] * in_row[ow * d.stride + off];
              }
            }
            dw_k[kh * d.kw + kw] += acc;
          }
        }
      }
    }
  }
}

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Elementwise op with backward dx += dout * dydx(x, y).
template <typename Fwd, typename Dydx>
Tensor unary_elementwise(const Tensor& x, Fwd fwd, Dydx dydx) {
  Tensor out = Tensor::zeros(x.shape());
  const double* xd = x.data();
  double* od = out.data();
  const std::size_t n = x.numel();
  for (std::size_t i = 0; i < n; ++i) od[i] = fwd(xd[i]);
  Tape* tape = Tape::current();
  if (tape && x.requires_grad()) {
    out.set_requires_grad(true);
    Tensor xc = x, oc = out;
    tape->record([xc, oc, dydx]() mutable {
      const double* g = oc.grad();
      const double* xv = xc.data();
      const double* yv = oc.data();
      double* dx = xc.grad();
      const std::size_t m = xc.numel();
      for (std::size_t i = 0; i < m; ++i) dx[i] += g[i] * dydx(xv[i], yv[i]);
    });
  }
  return out;
}

}  // namespace

void fill_he_uniform(Tensor& w, int fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / fan_in);
  double* d = w.data();
  for (std::size_t i = 0; i < w.numel(); ++i) d[i] = rng.uniform(-bound, bound);
}

void fill_glorot_uniform(Tensor& w, int fan_in, int fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  double* d = w.data();
  for (std::size_t i = 0; i < w.numel(); ++i) d[i] = rng.uniform(-bound, bound);
}

ConvParams make_conv_he(int c_out, int c_in, int k, int stride, int padding,
                        bool with_bias, Rng& rng) {
  ConvParams p;
  p.weight = Tensor::zeros({c_out, c_in, k, k}, true);
  fill_he_uniform(p.weight, c_in * k * k, rng);
  if (with_bias) p.bias = Tensor::zeros({c_out}, true);
  p.stride = stride;
  p.padding = padding;
  return p;
}

ConvParams make_conv_glorot(int c_out, int c_in, int k, int stride, int padding,
                            bool with_bias, Rng& rng) {
  ConvParams p;
  p.weight = Tensor::zeros({c_out, c_in, k, k}, true);
  fill_glorot_uniform(p.weight, c_in * k * k, c_out * k * k, rng);
  if (with_bias) p.bias = Tensor::zeros({c_out}, true);
  p.stride = stride;
  p.padding = padding;
  return p;
}

BatchNormState make_batchnorm(int channels) {
  BatchNormState s;
  s.gamma = Tensor::full({channels}, 1.0, true);
  s.beta = Tensor::zeros({channels}, true);
  s.running_mean = Tensor::zeros({channels});
  s.running_var = Tensor::full({channels}, 1.0);
  return s;
}

Tensor conv2d(const Tensor& input, const ConvParams& params) {
  const ConvDims d = conv_dims(input, params);
  Tensor out = Tensor::zeros({d.n, d.c_out, d.h_out, d.w_out});
  static thread_local std::vector<double> scratch;
  if (fused3x3_applies(d)) {
    conv3x3_forward(d, input.data(), params.weight.data(),
                    params.bias.defined() ? params.bias.data() : nullptr,
                    out.data(), scratch);
  } else {
    conv_forward_kernel(d, input.data(), params.weight.data(),
                        params.bias.defined() ? params.bias.data() : nullptr,
                        out.data());
  }
  Tape* tape = Tape::current();
  const bool needs = input.requires_grad() || params.weight.requires_grad() ||
                     (params.bias.defined() && params.bias.requires_grad());
  if (tape && needs) {
    out.set_requires_grad(true);
    Tensor in_c = input, w_c = params.weight, b_c = params.bias, out_c = out;
    tape->record([d, in_c, w_c, b_c, out_c]() mutable {
      const double* g = out_c.grad();
      if (in_c.requires_grad()) {
        if (fused3x3_applies(d)) {
          conv3x3_backward_input(d, g, w_c.data(), in_c.grad(), scratch);
        } else {
          conv_backward_input_kernel(d, g, w_c.data(), in_c.grad());
        }
      }
      if (w_c.requires_grad()) {
        if (fused3x3_applies(d)) {
          conv3x3_backward_weight(d, in_c.data(), g, w_c.grad(), scratch);
        } else {
          conv_backward_weight_kernel(d, in_c.data(), g, w_c.grad());
        }
      }
      if (b_c.defined() && b_c.requires_grad()) {
        double* db = b_c.grad();
        for (int n = 0; n < d.n; ++n) {
          for (int co = 0; co < d.c_out; ++co) {
            const double* plane =
                g + (static_cast<std::size_t>(n) * d.c_out + co) * d.h_out * d.w_out;
            double acc = 0.0;
            for (int i = 0; i < d.h_out * d.w_out; ++i) acc += plane[i];
            db[co] += acc;
          }
        }
      }
    });
  }
  return out;
}

Tensor batchnorm(const Tensor& input, BatchNormState& state) {
  require_4d(input, "batchnorm input");
  const int n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  if (state.gamma.dim(0) != c) {
    throw ShapeError("batchnorm: state has " + std::to_string(state.gamma.dim(0)) +
                     " channels but input has " + std::to_string(c));
  }
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const std::size_t per_channel = static_cast<std::size_t>(n) * plane;

  Tensor out = Tensor::zeros(input.shape());
  const double* x = input.data();
  double* y = out.data();
  const double* gamma = state.gamma.data();
  const double* beta = state.beta.data();

  std::vector<double> inv_std(c);
  Tensor xhat;  // saved for the train-mode backward

  if (state.mode == BnMode::Train) {
    if (per_channel < 2) {
      throw ContractError(
          "batchnorm: train mode needs at least 2 elements per channel for "
          "batch statistics, got " + std::to_string(per_channel));
    }
    xhat = Tensor::zeros(input.shape());
    double* xh = xhat.data();
    double* rm = state.running_mean.data();
    double* rv = state.running_var.data();
    for (int ci = 0; ci < c; ++ci) {
      double mean = 0.0;
      for (int ni = 0; ni < n; ++ni) {
        const double* xp = x + (static_cast<std::size_t>(ni) * c + ci) * plane;
        for (std::size_t i = 0; i < plane; ++i) mean += xp[i];
      }
      mean /= static_cast<double>(per_channel);
      double var = 0.0;
      for (int ni = 0; ni < n; ++ni) {
        const double* xp = x + (static_cast<std::size_t>(ni) * c + ci) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          const double dlt = xp[i] - mean;
          var += dlt * dlt;
        }
      }
      var /= static_cast<double>(per_channel);
      const double istd = 1.0 / std::sqrt(var + state.eps);
      inv_std[ci] = istd;
      for (int ni = 0; ni < n; ++ni) {
        const std::size_t base = (static_cast<std::size_t>(ni) * c + ci) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          const double xn = (x[base + i] - mean) * istd;
          xh[base + i] = xn;
          y[base + i] = gamma[ci] * xn + beta[ci];
        }
      }
      rm[ci] = (1.0 - state.momentum) * rm[ci] + state.momentum * mean;
      rv[ci] = (1.0 - state.momentum) * rv[ci] + state.momentum * var;
    }
  } else {
    const double* rm = state.running_mean.data();
    const double* rv = state.running_var.data();
    for (int ci = 0; ci < c; ++ci) {
      inv_std[ci] = 1.0 / std::sqrt(rv[ci] + state.eps);
      const double scale = gamma[ci] * inv_std[ci];
      const double shift = beta[ci] - rm[ci] * scale;
      for (int ni = 0; ni < n; ++ni) {
        const std::size_t base = (static_cast<std::size_t>(ni) * c + ci) * plane;
        for (std::size_t i = 0; i < plane; ++i) y[base + i] = scale * x[base + i] + shift;
      }
    }
  }

  Tape* tape = Tape::current();
  const bool needs = input.requires_grad() || state.gamma.requires_grad() ||
                     state.beta.requires_grad();
  if (tape && needs) {
    out.set_requires_grad(true);
    Tensor in_c = input, out_c = out, gamma_c = state.gamma, beta_c = state.beta;
    Tensor rm_c = state.running_mean, rv_c = state.running_var;
    const BnMode mode = state.mode;
    const double eps = state.eps;
    tape->record([=]() mutable {
      const double* g = out_c.grad();
      const double* gm = gamma_c.data();
      const std::size_t m = per_channel;
      if (mode == BnMode::Train) {
        const double* xh = xhat.data();
        for (int ci = 0; ci < c; ++ci) {
          double sum_g = 0.0, sum_gx = 0.0;
          for (int ni = 0; ni < n; ++ni) {
            const std::size_t base = (static_cast<std::size_t>(ni) * c + ci) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              sum_g += g[base + i];
              sum_gx += g[base + i] * xh[base + i];
            }
          }
          if (beta_c.requires_grad()) beta_c.grad()[ci] += sum_g;
          if (gamma_c.requires_grad()) gamma_c.grad()[ci] += sum_gx;
          if (in_c.requires_grad()) {
            const double k = gm[ci] * inv_std[ci];
            const double mg = sum_g / static_cast<double>(m);
            const double mgx = sum_gx / static_cast<double>(m);
            double* dx = in_c.grad();
            for (int ni = 0; ni < n; ++ni) {
              const std::size_t base = (static_cast<std::size_t>(ni) * c + ci) * plane;
              for (std::size_t i = 0; i < plane; ++i) {
                dx[base + i] += k * (g[base + i] - mg - xh[base + i] * mgx);
              }
            }
          }
        }
      } else {
        const double* x = in_c.data();
        const double* rm = rm_c.data();
        const double* rv = rv_c.data();
        for (int ci = 0; ci < c; ++ci) {
          const double istd = 1.0 / std::sqrt(rv[ci] + eps);
          double sum_g = 0.0, sum_gx = 0.0;
          for (int ni = 0; ni < n; ++ni) {
            const std::size_t base = (static_cast<std::size_t>(ni) * c + ci) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              sum_g += g[base + i];
              sum_gx += g[base + i] * (x[base + i] - rm[ci]) * istd;
            }
          }
          if (beta_c.requires_grad()) beta_c.grad()[ci] += sum_g;
          if (gamma_c.requires_grad()) gamma_c.grad()[ci] += sum_gx;
          if (in_c.requires_grad()) {
            const double k = gm[ci] * istd;
            double* dx = in_c.grad();
            for (int ni = 0; ni < n; ++ni) {
              const std::size_t base = (static_cast<std::size_t>(ni) * c + ci) * plane;
              for (std::size_t i = 0; i < plane; ++i) dx[base + i] += k * g[base + i];
            }
          }
        }
      }
    });
  }
  return out;
}

Tensor relu(const Tensor& x) {
  return unary_elementwise(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary_elementwise(
      x, [](double v) { return stable_sigmoid(v); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
  return unary_elementwise(
      x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out = Tensor::zeros(a.shape());
  const double* ad = a.data();
  const double* bd = b.data();
  double* od = out.data();
  for (std::size_t i = 0; i < a.numel(); ++i) od[i] = ad[i] + bd[i];
  Tape* tape = Tape::current();
  if (tape && (a.requires_grad() || b.requires_grad())) {
    out.set_requires_grad(true);
    Tensor ac = a, bc = b, oc = out;
    tape->record([ac, bc, oc]() mutable {
      const double* g = oc.grad();
      const std::size_t n = oc.numel();
      if (ac.requires_grad()) {
        double* da = ac.grad();
        for (std::size_t i = 0; i < n; ++i) da[i] += g[i];
      }
      if (bc.requires_grad()) {
        double* db = bc.grad();
        for (std::size_t i = 0; i < n; ++i) db[i] += g[i];
      }
    });
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out = Tensor::zeros(a.shape());
  const double* ad = a.data();
  const double* bd = b.data();
  double* od = out.data();
  for (std::size_t i = 0; i < a.numel(); ++i) od[i] = ad[i] - bd[i];
  Tape* tape = Tape::current();
  if (tape && (a.requires_grad() || b.requires_grad())) {
    out.set_requires_grad(true);
    Tensor ac = a, bc = b, oc = out;
    tape->record([ac, bc, oc]() mutable {
      const double* g = oc.grad();
      const std::size_t n = oc.numel();
      if (ac.requires_grad()) {
        double* da = ac.grad();
        for (std::size_t i = 0; i < n; ++i) da[i] += g[i];
      }
      if (bc.requires_grad()) {
        double* db = bc.grad();
        for (std::size_t i = 0; i < n; ++i) db[i] -= g[i];
      }
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out = Tensor::zeros(a.shape());
  const double* ad = a.data();
  const double* bd = b.data();
  double* od = out.data();
  for (std::size_t i = 0; i < a.numel(); ++i) od[i] = ad[i] * bd[i];
  Tape* tape = Tape::current();
  if (tape && (a.requires_grad() || b.requires_grad())) {
    out.set_requires_grad(true);
    Tensor ac = a, bc = b, oc = out;
    tape->record([ac, bc, oc]() mutable {
      const double* g = oc.grad();
      const std::size_t n = oc.numel();
      if (ac.requires_grad()) {
        double* da = ac.grad();
        const double* bv = bc.data();
        for (std::size_t i = 0; i < n; ++i) da[i] += g[i] * bv[i];
      }
      if (bc.requires_grad()) {
        double* db = bc.grad();
        const double* av = ac.data();
        for (std::size_t i = 0; i < n; ++i) db[i] += g[i] * av[i];
      }
    });
  }
  return out;
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary_elementwise(
      a, [s](double v) { return v + s; }, [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& a, double s) {
  return unary_elementwise(
      a, [s](double v) { return v * s; }, [s](double, double) { return s; });
}

Tensor global_avg_pool(const Tensor& input) {
  require_4d(input, "global_avg_pool input");
  const int n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  Tensor out = Tensor::zeros({n, c});
  const double* x = input.data();
  double* y = out.data();
  for (int ni = 0; ni < n; ++ni) {
    for (int ci = 0; ci < c; ++ci) {
      const double* xp = x + (static_cast<std::size_t>(ni) * c + ci) * plane;
      double acc = 0.0;
      for (std::size_t i = 0; i < plane; ++i) acc += xp[i];
      y[static_cast<std::size_t>(ni) * c + ci] = acc / static_cast<double>(plane);
    }
  }
  Tape* tape = Tape::current();
  if (tape && input.requires_grad()) {
    out.set_requires_grad(true);
    Tensor in_c = input, out_c = out;
    tape->record([in_c, out_c, n, c, plane]() mutable {
      const double* g = out_c.grad();
      double* dx = in_c.grad();
      const double inv = 1.0 / static_cast<double>(plane);
      for (int ni = 0; ni < n; ++ni) {
        for (int ci = 0; ci < c; ++ci) {
          const double gv = g[static_cast<std::size_t>(ni) * c + ci] * inv;
          double* dxp = dx + (static_cast<std::size_t>(ni) * c + ci) * plane;
          for (std::size_t i = 0; i < plane; ++i) dxp[i] += gv;
        }
      }
    });
  }
  return out;
}

Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  if (input.ndim() != 2) throw ShapeError("linear input must be [N,C], got " + shape_str(input));
  const int n = input.dim(0), c = input.dim(1);
  if (weight.ndim() != 2 || weight.dim(1) != c) {
    throw ShapeError("linear weight must be [K," + std::to_string(c) + "], got " +
                     shape_str(weight));
  }
  const int k = weight.dim(0);
  if (bias.defined() && (bias.ndim() != 1 || bias.dim(0) != k)) {
    throw ShapeError("linear bias must be [K]");
  }
  Tensor out = Tensor::zeros({n, k});
  const double* x = input.data();
  const double* wd = weight.data();
  double* y = out.data();
  for (int ni = 0; ni < n; ++ni) {
    for (int ki = 0; ki < k; ++ki) {
      double acc = bias.defined() ? bias.data()[ki] : 0.0;
      const double* xr = x + static_cast<std::size_t>(ni) * c;
      const double* wr = wd + static_cast<std::size_t>(ki) * c;
      for (int ci = 0; ci < c; ++ci) acc += xr[ci] * wr[ci];
      y[static_cast<std::size_t>(ni) * k + ki] = acc;
    }
  }
  Tape* tape = Tape::current();
  const bool needs = input.requires_grad() || weight.requires_grad() ||
                     (bias.defined() && bias.requires_grad());
  if (tape && needs) {
    out.set_requires_grad(true);
    Tensor xc = input, wc = weight, bc = bias, oc = out;
    tape->record([xc, wc, bc, oc, n, c, k]() mutable {
      const double* g = oc.grad();
      if (xc.requires_grad()) {
        double* dx = xc.grad();
        const double* wv = wc.data();
        for (int ni = 0; ni < n; ++ni) {
          for (int ki = 0; ki < k; ++ki) {
            const double gv = g[static_cast<std::size_t>(ni) * k + ki];
            const double* wr = wv + static_cast<std::size_t>(ki) * c;
            double* dxr = dx + static_cast<std::size_t>(ni) * c;
            for (int ci = 0; ci < c; ++ci) dxr[ci] += gv * wr[ci];
          }
        }
      }
      if (wc.requires_grad()) {
        double* dw = wc.grad();
        const double* xv = xc.data();
        for (int ni = 0; ni < n; ++ni) {
          for (int ki = 0; ki < k; ++ki) {
            const double gv = g[static_cast<std::size_t>(ni) * k + ki];
            const double* xr = xv + static_cast<std::size_t>(ni) * c;
            double* dwr = dw + static_cast<std::size_t>(ki) * c;
            for (int ci = 0; ci < c; ++ci) dwr[ci] += gv * xr[ci];
          }
        }
      }
      if (bc.defined() && bc.requires_grad()) {
        double* db = bc.grad();
        for (int ni = 0; ni < n; ++ni) {
          for (int ki = 0; ki < k; ++ki) db[ki] += g[static_cast<std::size_t>(ni) * k + ki];
        }
      }
    });
  }
  return out;
}

Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  if (logits.ndim() != 2) {
    throw ShapeError("softmax_cross_entropy logits must be [N,K], got " + shape_str(logits));
  }
  const int n = logits.dim(0), k = logits.dim(1);
  if (static_cast<int>(labels.size()) != n) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                     " labels for " + std::to_string(n) + " rows");
  }
  for (int i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= k) {
      throw ContractError("softmax_cross_entropy: label " + std::to_string(labels[i]) +
                          " out of range [0," + std::to_string(k) + ") at row " +
                          std::to_string(i));
    }
  }
  // Probabilities are kept for the backward pass.
  std::vector<double> probs(static_cast<std::size_t>(n) * k);
  const double* x = logits.data();
  double total = 0.0;
  for (int ni = 0; ni < n; ++ni) {
    const double* row = x + static_cast<std::size_t>(ni) * k;
    double mx = row[0];
    for (int ki = 1; ki < k; ++ki) mx = std::max(mx, row[ki]);
    double denom = 0.0;
    for (int ki = 0; ki < k; ++ki) denom += std::exp(row[ki] - mx);
    for (int ki = 0; ki < k; ++ki) {
      probs[static_cast<std::size_t>(ni) * k + ki] = std::exp(row[ki] - mx) / denom;
    }
    total += std::log(denom) - (row[labels[ni]] - mx);
  }
  Tensor out = Tensor::scalar(total / n);
  Tape* tape = Tape::current();
  if (tape && logits.requires_grad()) {
    out.set_requires_grad(true);
    Tensor lc = logits, oc = out;
    tape->record([lc, oc, probs = std::move(probs), labels, n, k]() mutable {
      const double g = oc.grad()[0] / n;
      double* dl = lc.grad();
      for (int ni = 0; ni < n; ++ni) {
        for (int ki = 0; ki < k; ++ki) {
          const std::size_t idx = static_cast<std::size_t>(ni) * k + ki;
          dl[idx] += g * (probs[idx] - (labels[ni] == ki ? 1.0 : 0.0));
        }
      }
    });
  }
  return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  require_4d(a, "concat_channels a");
  require_4d(b, "concat_channels b");
  if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3)) {
    throw ShapeError("concat_channels: " + shape_str(a) + " vs " + shape_str(b));
  }
  const int n = a.dim(0), ca = a.dim(1), cb = b.dim(1), h = a.dim(2), w = a.dim(3);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  Tensor out = Tensor::zeros({n, ca + cb, h, w});
  double* y = out.data();
  for (int ni = 0; ni < n; ++ni) {
    std::copy_n(a.data() + static_cast<std::size_t>(ni) * ca * plane, ca * plane,
                y + static_cast<std::size_t>(ni) * (ca + cb) * plane);
    std::copy_n(b.data() + static_cast<std::size_t>(ni) * cb * plane, cb * plane,
                y + (static_cast<std::size_t>(ni) * (ca + cb) + ca) * plane);
  }
  Tape* tape = Tape::current();
  if (tape && (a.requires_grad() || b.requires_grad())) {
    out.set_requires_grad(true);
    Tensor ac = a, bc = b, oc = out;
    tape->record([ac, bc, oc, n, ca, cb, plane]() mutable {
      const double* g = oc.grad();
      for (int ni = 0; ni < n; ++ni) {
        const double* ga = g + static_cast<std::size_t>(ni) * (ca + cb) * plane;
        if (ac.requires_grad()) {
          double* da = ac.grad() + static_cast<std::size_t>(ni) * ca * plane;
          for (std::size_t i = 0; i < static_cast<std::size_t>(ca) * plane; ++i) da[i] += ga[i];
        }
        if (bc.requires_grad()) {
          double* db = bc.grad() + static_cast<std::size_t>(ni) * cb * plane;
          const double* gb = ga + static_cast<std::size_t>(ca) * plane;
          for (std::size_t i = 0; i < static_cast<std::size_t>(cb) * plane; ++i) db[i] += gb[i];
        }
      }
    });
  }
  return out;
}

Tensor scale_rows(const Tensor& x, const Tensor& w) {
  if (x.ndim() < 1) throw ShapeError("scale_rows: x must have a leading batch dim");
  const int n = x.dim(0);
  if (static_cast<int>(w.numel()) != n) {
    throw ShapeError("scale_rows: weight numel " + std::to_string(w.numel()) +
                     " != batch size " + std::to_string(n));
  }
  const std::size_t slice = x.numel() / static_cast<std::size_t>(n);
  Tensor out = Tensor::zeros(x.shape());
  const double* xd = x.data();
  const double* wd = w.data();
  double* y = out.data();
  for (int ni = 0; ni < n; ++ni) {
    const double s = wd[ni];
    const std::size_t base = static_cast<std::size_t>(ni) * slice;
    for (std::size_t i = 0; i < slice; ++i) y[base + i] = s * xd[base + i];
  }
  Tape* tape = Tape::current();
  if (tape && (x.requires_grad() || w.requires_grad())) {
    out.set_requires_grad(true);
    Tensor xc = x, wc = w, oc = out;
    tape->record([xc, wc, oc, n, slice]() mutable {
      const double* g = oc.grad();
      if (xc.requires_grad()) {
        double* dx = xc.grad();
        const double* wv = wc.data();
        for (int ni = 0; ni < n; ++ni) {
          const std::size_t base = static_cast<std::size_t>(ni) * slice;
          for (std::size_t i = 0; i < slice; ++i) dx[base + i] += wv[ni] * g[base + i];
        }
      }
      if (wc.requires_grad()) {
        double* dw = wc.grad();
        const double* xv = xc.data();
        for (int ni = 0; ni < n; ++ni) {
          const std::size_t base = static_cast<std::size_t>(ni) * slice;
          double acc = 0.0;
          for (std::size_t i = 0; i < slice; ++i) acc += g[base + i] * xv[base + i];
          dw[ni] += acc;
        }
      }
    });
  }
  return out;
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  const double* xd = x.data();
  for (std::size_t i = 0; i < x.numel(); ++i) acc += xd[i];
  Tensor out = Tensor::scalar(acc);
  Tape* tape = Tape::current();
  if (tape && x.requires_grad()) {
    out.set_requires_grad(true);
    Tensor xc = x, oc = out;
    tape->record([xc, oc]() mutable {
      const double g = oc.grad()[0];
      double* dx = xc.grad();
      for (std::size_t i = 0; i < xc.numel(); ++i) dx[i] += g;
    });
  }
  return out;
}

std::vector<double> softmax_rows(const Tensor& logits) {
  const int n = logits.dim(0), k = logits.dim(1);
  std::vector<double> probs(static_cast<std::size_t>(n) * k);
  const double* x = logits.data();
  for (int ni = 0; ni < n; ++ni) {
    const double* row = x + static_cast<std::size_t>(ni) * k;
    double mx = row[0];
    for (int ki = 1; ki < k; ++ki) mx = std::max(mx, row[ki]);
    double denom = 0.0;
    for (int ki = 0; ki < k; ++ki) denom += std::exp(row[ki] - mx);
    for (int ki = 0; ki < k; ++ki) {
      probs[static_cast<std::size_t>(ni) * k + ki] = std::exp(row[ki] - mx) / denom;
    }
  }
  return probs;
}

std::vector<int> argmax_rows(const Tensor& logits) {
  const int n = logits.dim(0), k = logits.dim(1);
  std::vector<int> out(static_cast<std::size_t>(n));
  const double* x = logits.data();
  for (int ni = 0; ni < n; ++ni) {
    const double* row = x + static_cast<std::size_t>(ni) * k;
    int best = 0;
    for (int ki = 1; ki < k; ++ki) {
      if (row[ki] > row[best]) best = ki;
    }
    out[ni] = best;
  }
  return out;
}

}  // namespace dtnet
