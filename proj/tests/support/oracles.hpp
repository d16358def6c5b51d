#pragma once

// Independent reference implementations used to freeze expected values.
// Everything here is deliberately written as plain nested loops over raw
// buffers, with no dependence on the library's kernels.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace oracle {

// Direct cross-correlation with zero padding, six nested loops.
inline std::vector<double> conv2d_naive(const std::vector<double>& in, int n,
                                        int c_in, int h, int w,
                                        const std::vector<double>& weight, int c_out,
                                        int kh, int kw, const std::vector<double>* bias,
                                        int stride, int pad, int& h_out, int& w_out) {
  h_out = (h + 2 * pad - kh) / stride + 1;
  w_out = (w + 2 * pad - kw) / stride + 1;
  std::vector<double> out(static_cast<std::size_t>(n) * c_out * h_out * w_out, 0.0);
  for (int ni = 0; ni < n; ++ni) {
    for (int co = 0; co < c_out; ++co) {
      for (int oh = 0; oh < h_out; ++oh) {
        for (int ow = 0; ow < w_out; ++ow) {
          double acc = bias ? (*bias)[static_cast<std::size_t>(co)] : 0.0;
          for (int ci = 0; ci < c_in; ++ci) {
            for (int r = 0; r < kh; ++r) {
              for (int c = 0; c < kw; ++c) {
                const int ih = oh * stride + r - pad;
                const int iw = ow * stride + c - pad;
                if (ih < 0 || ih >= h || iw < 0 || iw >= w) continue;
                const double x =
                    in[((static_cast<std::size_t>(ni) * c_in + ci) * h + ih) * w + iw];
                const double wv =
                    weight[((static_cast<std::size_t>(co) * c_in + ci) * kh + r) * kw + c];
                acc += x * wv;
              }
            }
          }
          out[((static_cast<std::size_t>(ni) * c_out + co) * h_out + oh) * w_out + ow] = acc;
        }
      }
    }
  }
  return out;
}

// Per-channel mean/variance over (N, H, W) recomputed from scratch.
inline void channel_moments(const std::vector<double>& x, int n, int c, int h, int w,
                            std::vector<double>& mean, std::vector<double>& var) {
  mean.assign(static_cast<std::size_t>(c), 0.0);
  var.assign(static_cast<std::size_t>(c), 0.0);
  const std::size_t m = static_cast<std::size_t>(n) * h * w;
  for (int ci = 0; ci < c; ++ci) {
    double s = 0.0;
    for (int ni = 0; ni < n; ++ni) {
      for (int i = 0; i < h * w; ++i) {
        s += x[(static_cast<std::size_t>(ni) * c + ci) * h * w + i];
      }
    }
    mean[static_cast<std::size_t>(ci)] = s / static_cast<double>(m);
    double v = 0.0;
    for (int ni = 0; ni < n; ++ni) {
      for (int i = 0; i < h * w; ++i) {
        const double d = x[(static_cast<std::size_t>(ni) * c + ci) * h * w + i] -
                         mean[static_cast<std::size_t>(ci)];
        v += d * d;
      }
    }
    var[static_cast<std::size_t>(ci)] = v / static_cast<double>(m);
  }
}

// Mean cross-entropy after max-subtraction, explicit exp/log per row.
inline double softmax_ce_naive(const std::vector<double>& logits, int n, int k,
                               const std::vector<int>& labels) {
  double total = 0.0;
  for (int ni = 0; ni < n; ++ni) {
    const double* row = logits.data() + static_cast<std::size_t>(ni) * k;
    double mx = row[0];
    for (int ki = 1; ki < k; ++ki) mx = std::max(mx, row[ki]);
    double denom = 0.0;
    for (int ki = 0; ki < k; ++ki) denom += std::exp(row[ki] - mx);
    total += std::log(denom) - (row[labels[static_cast<std::size_t>(ni)]] - mx);
  }
  return total / n;
}

// Textbook two-pass Pearson correlation.
inline double pearson_naive(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cov += (a[i] - ma) * (b[i] - mb);
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
  }
  return cov / std::sqrt(va * vb);
}

// 90-degree counter-clockwise rotation as an index permutation.
inline std::vector<double> rot90_ccw_naive(const std::vector<double>& img, int n) {
  std::vector<double> out(img.size());
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      out[static_cast<std::size_t>(r) * n + c] =
          img[static_cast<std::size_t>(c) * n + (n - 1 - r)];
    }
  }
  return out;
}

}  // namespace oracle
