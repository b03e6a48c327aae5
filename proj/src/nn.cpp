// Copyright (c) 2026 cbasr authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cbasr/nn.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <istream>
#include <numeric>
#include <ostream>
#include <thread>

#include "cbasr/error.hpp"

namespace cbasr::nn {

namespace {

std::atomic<int> g_num_threads{2};

// C[M x N] (+)= A[M x K] * B[K x N], row-partitioned so any thread count
// produces identical results.
void gemm(const float* a, const float* b, float* c, int m, int k, int n,
          bool accumulate) {
  auto rows = [&](int row_begin, int row_end) {
    for (int i = row_begin; i < row_end; ++i) {
      float* crow = c + static_cast<size_t>(i) * n;
      if (!accumulate) std::fill(crow, crow + n, 0.0f);
      const float* arow = a + static_cast<size_t>(i) * k;
      for (int kk = 0; kk < k; ++kk) {
        float av = arow[kk];
        if (av == 0.0f) continue;
        const float* brow = b + static_cast<size_t>(kk) * n;
        for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  };
  int threads = g_num_threads.load();
  double work = static_cast<double>(m) * k * n;
  if (threads <= 1 || m < 2 || work < 1e5) {
    rows(0, m);
    return;
  }
  threads = std::min(threads, m);
  std::vector<std::thread> pool;
  pool.reserve(threads);
  int chunk = (m + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    int lo = t * chunk;
    int hi = std::min(m, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back(rows, lo, hi);
  }
  for (auto& th : pool) th.join();
}

void he_init(Param& p, size_t fan_in, std::mt19937* rng) {
  if (rng == nullptr) {
    std::fill(p.value.begin(), p.value.end(), 0.0f);
    return;
  }
  std::normal_distribution<float> dist(
      0.0f, std::sqrt(2.0f / static_cast<float>(fan_in)));
  for (auto& v : p.value) v = dist(*rng);
}

int conv_out_dim(int in, int k, int stride, int pad) {
  int out = (in + 2 * pad - k) / stride + 1;
  return std::max(out, 1);
}

int floor_div(int a, int b) {
  return a >= 0 ? a / b : -((-a + b - 1) / b);
}

// Output columns that reproduce an unpadded computation of a `valid`-wide
// input. Relies on the invalid region being kept at zero (matching the
// zero padding an unpadded tensor would see) and, for pools, on
// non-negative inputs; both architectures pool after ReLU.
int propagate_valid(int valid, int k, int stride, int pad, int out_dim) {
  int v = floor_div(valid + 2 * pad - k, stride) + 1;
  return std::clamp(v, 1, out_dim);
}

// Padding hygiene: everything right of the per-sample valid width is
// forced to zero so downstream windows read exactly what an unpadded
// input's zero padding would provide.
void zero_invalid_columns(Tensor& t) {
  if (t.valid_w.empty()) return;
  for (int n = 0; n < t.n; ++n) {
    int v = t.valid_w[n];
    if (v >= t.w) continue;
    for (int c = 0; c < t.c; ++c) {
      for (int i = 0; i < t.h; ++i) {
        float* row = &t.at(n, c, i, 0);
        std::fill(row + v, row + t.w, 0.0f);
      }
    }
  }
}

// Gradients of forced-zero cells must not reach the producing layer.
void zero_invalid_columns(Tensor& t, const std::vector<int>& valid_w) {
  if (valid_w.empty()) return;
  for (int n = 0; n < t.n; ++n) {
    int v = valid_w[n];
    if (v >= t.w) continue;
    for (int c = 0; c < t.c; ++c) {
      for (int i = 0; i < t.h; ++i) {
        float* row = &t.at(n, c, i, 0);
        std::fill(row + v, row + t.w, 0.0f);
      }
    }
  }
}

}  // namespace

void set_num_threads(int n) { g_num_threads.store(std::max(1, n)); }
int num_threads() { return g_num_threads.load(); }

// ---------------------------------------------------------------------------
// Conv2d
// ---------------------------------------------------------------------------

Conv2d::Conv2d(int in_c, int out_c, int kernel, int stride, int pad,
               std::mt19937* rng, const std::string& name)
    : in_c_(in_c), out_c_(out_c), k_(kernel), stride_(stride), pad_(pad) {
  weight_.name = name + ".weight";
  weight_.value.resize(static_cast<size_t>(out_c) * in_c * kernel * kernel);
  weight_.grad.assign(weight_.value.size(), 0.0f);
  he_init(weight_, static_cast<size_t>(in_c) * kernel * kernel, rng);
  bias_.name = name + ".bias";
  bias_.value.assign(out_c, 0.0f);
  bias_.grad.assign(out_c, 0.0f);
}

void Conv2d::collect_params(std::vector<Param*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

Tensor Conv2d::forward(const Tensor& x, bool /*train*/) {
  if (x.c != in_c_) {
    throw Error(ErrorKind::kCompatibility,
                weight_.name + ": got " + std::to_string(x.c) +
                    " input channels, want " + std::to_string(in_c_));
  }
  input_ = x;
  out_h_ = conv_out_dim(x.h, k_, stride_, pad_);
  out_w_ = conv_out_dim(x.w, k_, stride_, pad_);
  const int kk = in_c_ * k_ * k_;
  const size_t ohw = static_cast<size_t>(out_h_) * out_w_;
  col_.assign(static_cast<size_t>(x.n) * kk * ohw, 0.0f);

  Tensor y(x.n, out_c_, out_h_, out_w_);
  if (!x.valid_w.empty()) {
    y.valid_w.resize(x.n);
    for (int n = 0; n < x.n; ++n) {
      y.valid_w[n] =
          propagate_valid(x.valid_w[n], k_, stride_, pad_, out_w_);
    }
  }
  out_valid_ = y.valid_w;

  auto run_sample = [&](size_t n) {
    float* col = col_.data() + n * kk * ohw;
    // im2col
    for (int ic = 0; ic < in_c_; ++ic) {
      for (int ky = 0; ky < k_; ++ky) {
        for (int kx = 0; kx < k_; ++kx) {
          size_t row = (static_cast<size_t>(ic) * k_ + ky) * k_ + kx;
          float* dst = col + row * ohw;
          for (int oy = 0; oy < out_h_; ++oy) {
            int iy = oy * stride_ - pad_ + ky;
            if (iy < 0 || iy >= x.h) continue;
            for (int ox = 0; ox < out_w_; ++ox) {
              int ix = ox * stride_ - pad_ + kx;
              if (ix < 0 || ix >= x.w) continue;
              dst[static_cast<size_t>(oy) * out_w_ + ox] =
                  x.at(static_cast<int>(n), ic, iy, ix);
            }
          }
        }
      }
    }
    float* out = &y.at(static_cast<int>(n), 0, 0, 0);
    gemm(weight_.value.data(), col, out, out_c_, kk, static_cast<int>(ohw),
         false);
    for (int oc = 0; oc < out_c_; ++oc) {
      float b = bias_.value[oc];
      float* row = out + static_cast<size_t>(oc) * ohw;
      for (size_t i = 0; i < ohw; ++i) row[i] += b;
    }
  };

  int threads = std::min(g_num_threads.load(), x.n);
  if (threads <= 1) {
    for (int n = 0; n < x.n; ++n) run_sample(n);
  } else {
    std::vector<std::thread> pool;
    std::atomic<size_t> next{0};
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        while (true) {
          size_t n = next.fetch_add(1);
          if (n >= static_cast<size_t>(x.n)) break;
          run_sample(n);
        }
      });
    }
    for (auto& th : pool) th.join();
  }
  zero_invalid_columns(y);
  return y;
}

Tensor Conv2d::backward(const Tensor& dy_in) {
  Tensor dy = dy_in;
  zero_invalid_columns(dy, out_valid_);
  const int kk = in_c_ * k_ * k_;
  const size_t ohw = static_cast<size_t>(out_h_) * out_w_;
  Tensor dx(input_.n, input_.c, input_.h, input_.w);

  std::vector<float> dcol(kk * ohw);
  for (int n = 0; n < input_.n; ++n) {
    const float* dyn = &dy.at(n, 0, 0, 0);
    const float* col = col_.data() + static_cast<size_t>(n) * kk * ohw;

    // dW += dY_n * col_n^T  (row-parallel over out_c, deterministic)
    {
      auto rows = [&](int lo, int hi) {
        for (int oc = lo; oc < hi; ++oc) {
          const float* dyr = dyn + static_cast<size_t>(oc) * ohw;
          float* gw = weight_.grad.data() + static_cast<size_t>(oc) * kk;
          for (int r = 0; r < kk; ++r) {
            const float* cr = col + static_cast<size_t>(r) * ohw;
            double acc = 0.0;
            for (size_t i = 0; i < ohw; ++i) acc += dyr[i] * cr[i];
            gw[r] += static_cast<float>(acc);
          }
          double bacc = 0.0;
          for (size_t i = 0; i < ohw; ++i) bacc += dyr[i];
          bias_.grad[oc] += static_cast<float>(bacc);
        }
      };
      int threads = std::min(g_num_threads.load(), out_c_);
      if (threads <= 1 || static_cast<double>(out_c_) * kk * ohw < 1e5) {
        rows(0, out_c_);
      } else {
        std::vector<std::thread> pool;
        int chunk = (out_c_ + threads - 1) / threads;
        for (int t = 0; t < threads; ++t) {
          int lo = t * chunk, hi = std::min(out_c_, lo + chunk);
          if (lo >= hi) break;
          pool.emplace_back(rows, lo, hi);
        }
        for (auto& th : pool) th.join();
      }
    }

    // dcol = W^T * dY_n : [kk x ohw]
    std::fill(dcol.begin(), dcol.end(), 0.0f);
    {
      auto rows = [&](int lo, int hi) {
        for (int r = lo; r < hi; ++r) {
          float* drow = dcol.data() + static_cast<size_t>(r) * ohw;
          for (int oc = 0; oc < out_c_; ++oc) {
            float wv = weight_.value[static_cast<size_t>(oc) * kk + r];
            if (wv == 0.0f) continue;
            const float* dyr = dyn + static_cast<size_t>(oc) * ohw;
            for (size_t i = 0; i < ohw; ++i) drow[i] += wv * dyr[i];
          }
        }
      };
      int threads = std::min(g_num_threads.load(), kk);
      if (threads <= 1 || static_cast<double>(kk) * out_c_ * ohw < 1e5) {
        rows(0, kk);
      } else {
        std::vector<std::thread> pool;
        int chunk = (kk + threads - 1) / threads;
        for (int t = 0; t < threads; ++t) {
          int lo = t * chunk, hi = std::min(kk, lo + chunk);
          if (lo >= hi) break;
          pool.emplace_back(rows, lo, hi);
        }
        for (auto& th : pool) th.join();
      }
    }

    // col2im
    for (int ic = 0; ic < in_c_; ++ic) {
      for (int ky = 0; ky < k_; ++ky) {
        for (int kx = 0; kx < k_; ++kx) {
          size_t row = (static_cast<size_t>(ic) * k_ + ky) * k_ + kx;
          const float* src = dcol.data() + row * ohw;
          for (int oy = 0; oy < out_h_; ++oy) {
            int iy = oy * stride_ - pad_ + ky;
            if (iy < 0 || iy >= input_.h) continue;
            for (int ox = 0; ox < out_w_; ++ox) {
              int ix = ox * stride_ - pad_ + kx;
              if (ix < 0 || ix >= input_.w) continue;
              dx.at(n, ic, iy, ix) += src[static_cast<size_t>(oy) * out_w_ + ox];
            }
          }
        }
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// BatchNorm2d
// ---------------------------------------------------------------------------

BatchNorm2d::BatchNorm2d(int channels, const std::string& name) : c_(channels) {
  gamma_.name = name + ".gamma";
  gamma_.value.assign(channels, 1.0f);
  gamma_.grad.assign(channels, 0.0f);
  beta_.name = name + ".beta";
  beta_.value.assign(channels, 0.0f);
  beta_.grad.assign(channels, 0.0f);
  running_mean_.name = name + ".running_mean";
  running_mean_.value.assign(channels, 0.0f);
  running_mean_.trainable = false;
  running_var_.name = name + ".running_var";
  running_var_.value.assign(channels, 1.0f);
  running_var_.trainable = false;
}

void BatchNorm2d::collect_params(std::vector<Param*>& out) {
  out.push_back(&gamma_);
  out.push_back(&beta_);
  out.push_back(&running_mean_);
  out.push_back(&running_var_);
}

Tensor BatchNorm2d::forward(const Tensor& x, bool train) {
  Tensor y(x.n, x.c, x.h, x.w);
  y.valid_w = x.valid_w;
  out_valid_ = x.valid_w;
  const size_t plane = static_cast<size_t>(x.h) * x.w;
  const size_t per_channel = static_cast<size_t>(x.n) * plane;

  if (train) {
    input_ = x;
    batch_mean_.assign(c_, 0.0f);
    batch_inv_std_.assign(c_, 0.0f);
    normalized_ = Tensor(x.n, x.c, x.h, x.w);
    for (int c = 0; c < c_; ++c) {
      double sum = 0.0, sq = 0.0;
      for (int n = 0; n < x.n; ++n) {
        const float* p = &x.at(n, c, 0, 0);
        for (size_t i = 0; i < plane; ++i) {
          sum += p[i];
          sq += static_cast<double>(p[i]) * p[i];
        }
      }
      double mean = sum / static_cast<double>(per_channel);
      double var = sq / static_cast<double>(per_channel) - mean * mean;
      var = std::max(var, 0.0);
      double inv_std = 1.0 / std::sqrt(var + eps_);
      batch_mean_[c] = static_cast<float>(mean);
      batch_inv_std_[c] = static_cast<float>(inv_std);
      running_mean_.value[c] = static_cast<float>(
          (1.0 - momentum_) * running_mean_.value[c] + momentum_ * mean);
      running_var_.value[c] = static_cast<float>(
          (1.0 - momentum_) * running_var_.value[c] + momentum_ * var);
      float g = gamma_.value[c], b = beta_.value[c];
      for (int n = 0; n < x.n; ++n) {
        const float* p = &x.at(n, c, 0, 0);
        float* nh = &normalized_.at(n, c, 0, 0);
        float* py = &y.at(n, c, 0, 0);
        for (size_t i = 0; i < plane; ++i) {
          float xh = static_cast<float>((p[i] - mean) * inv_std);
          nh[i] = xh;
          py[i] = g * xh + b;
        }
      }
    }
  } else {
    for (int c = 0; c < c_; ++c) {
      float mean = running_mean_.value[c];
      float inv_std =
          1.0f / std::sqrt(running_var_.value[c] + static_cast<float>(eps_));
      float g = gamma_.value[c], b = beta_.value[c];
      for (int n = 0; n < x.n; ++n) {
        const float* p = &x.at(n, c, 0, 0);
        float* py = &y.at(n, c, 0, 0);
        for (size_t i = 0; i < plane; ++i) {
          py[i] = g * (p[i] - mean) * inv_std + b;
        }
      }
    }
  }
  zero_invalid_columns(y);
  return y;
}

Tensor BatchNorm2d::backward(const Tensor& dy_in) {
  Tensor dy = dy_in;
  zero_invalid_columns(dy, out_valid_);
  const size_t plane = static_cast<size_t>(dy.h) * dy.w;
  const double m = static_cast<double>(dy.n) * plane;
  Tensor dx(dy.n, dy.c, dy.h, dy.w);
  for (int c = 0; c < c_; ++c) {
    double sum_dy = 0.0, sum_dy_xh = 0.0;
    for (int n = 0; n < dy.n; ++n) {
      const float* pd = &dy.at(n, c, 0, 0);
      const float* ph = &normalized_.at(n, c, 0, 0);
      for (size_t i = 0; i < plane; ++i) {
        sum_dy += pd[i];
        sum_dy_xh += static_cast<double>(pd[i]) * ph[i];
      }
    }
    gamma_.grad[c] += static_cast<float>(sum_dy_xh);
    beta_.grad[c] += static_cast<float>(sum_dy);
    double g_inv_std_m = gamma_.value[c] * batch_inv_std_[c] / m;
    for (int n = 0; n < dy.n; ++n) {
      const float* pd = &dy.at(n, c, 0, 0);
      const float* ph = &normalized_.at(n, c, 0, 0);
      float* px = &dx.at(n, c, 0, 0);
      for (size_t i = 0; i < plane; ++i) {
        px[i] = static_cast<float>(
            g_inv_std_m * (m * pd[i] - sum_dy - ph[i] * sum_dy_xh));
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// ReLU / MaxPool / pooling
// ---------------------------------------------------------------------------

Tensor ReLU::forward(const Tensor& x, bool /*train*/) {
  Tensor y = x;
  mask_.assign(x.size(), 0);
  for (size_t i = 0; i < x.size(); ++i) {
    if (y.v[i] > 0.0f) {
      mask_[i] = 1;
    } else {
      y.v[i] = 0.0f;
    }
  }
  return y;
}

Tensor ReLU::backward(const Tensor& dy) {
  Tensor dx = dy;
  for (size_t i = 0; i < dx.size(); ++i) {
    if (!mask_[i]) dx.v[i] = 0.0f;
  }
  return dx;
}

MaxPool2d::MaxPool2d(int kernel, int stride, int pad)
    : k_(kernel), stride_(stride), pad_(pad) {}

Tensor MaxPool2d::forward(const Tensor& x, bool /*train*/) {
  in_n_ = x.n;
  in_c_ = x.c;
  in_h_ = x.h;
  in_w_ = x.w;
  int out_h = conv_out_dim(x.h, k_, stride_, pad_);
  int out_w = conv_out_dim(x.w, k_, stride_, pad_);
  Tensor y(x.n, x.c, out_h, out_w);
  if (!x.valid_w.empty()) {
    y.valid_w.resize(x.n);
    for (int n = 0; n < x.n; ++n) {
      y.valid_w[n] = propagate_valid(x.valid_w[n], k_, stride_, pad_, out_w);
    }
  }
  out_valid_ = y.valid_w;
  argmax_.assign(y.size(), 0);
  size_t out_idx = 0;
  for (int n = 0; n < x.n; ++n) {
    for (int c = 0; c < x.c; ++c) {
      for (int oy = 0; oy < out_h; ++oy) {
        int y0 = std::max(0, oy * stride_ - pad_);
        int y1 = std::min(x.h, oy * stride_ - pad_ + k_);
        if (y0 >= y1) {
          y0 = x.h - 1;
          y1 = x.h;
        }
        for (int ox = 0; ox < out_w; ++ox) {
          int x0 = std::max(0, ox * stride_ - pad_);
          int x1 = std::min(x.w, ox * stride_ - pad_ + k_);
          if (x0 >= x1) {
            x0 = x.w - 1;
            x1 = x.w;
          }
          float best = -std::numeric_limits<float>::infinity();
          int64_t best_idx = 0;
          for (int iy = y0; iy < y1; ++iy) {
            for (int ix = x0; ix < x1; ++ix) {
              float v = x.at(n, c, iy, ix);
              if (v > best) {
                best = v;
                best_idx =
                    ((static_cast<int64_t>(n) * x.c + c) * x.h + iy) * x.w + ix;
              }
            }
          }
          y.v[out_idx] = best;
          argmax_[out_idx] = best_idx;
          ++out_idx;
        }
      }
    }
  }
  zero_invalid_columns(y);
  return y;
}

Tensor MaxPool2d::backward(const Tensor& dy_in) {
  Tensor dy = dy_in;
  zero_invalid_columns(dy, out_valid_);
  Tensor dx(in_n_, in_c_, in_h_, in_w_);
  for (size_t i = 0; i < dy.size(); ++i) {
    if (dy.v[i] == 0.0f) continue;
    dx.v[static_cast<size_t>(argmax_[i])] += dy.v[i];
  }
  return dx;
}

Tensor MaskedGlobalAvgPool::forward(const Tensor& x, bool /*train*/) {
  in_h_ = x.h;
  in_w_ = x.w;
  in_c_ = x.c;
  widths_.resize(x.n);
  for (int n = 0; n < x.n; ++n) widths_[n] = x.width_of(n);
  Tensor y(x.n, x.c, 1, 1);
  for (int n = 0; n < x.n; ++n) {
    int wv = widths_[n];
    double denom = static_cast<double>(x.h) * wv;
    for (int c = 0; c < x.c; ++c) {
      double acc = 0.0;
      for (int i = 0; i < x.h; ++i) {
        const float* row = &x.at(n, c, i, 0);
        for (int j = 0; j < wv; ++j) acc += row[j];
      }
      y.at(n, c, 0, 0) = static_cast<float>(acc / denom);
    }
  }
  return y;
}

Tensor MaskedGlobalAvgPool::backward(const Tensor& dy) {
  Tensor dx(dy.n, in_c_, in_h_, in_w_);
  for (int n = 0; n < dy.n; ++n) {
    int wv = widths_[n];
    float denom = static_cast<float>(in_h_) * wv;
    for (int c = 0; c < in_c_; ++c) {
      float g = dy.at(n, c, 0, 0) / denom;
      for (int i = 0; i < in_h_; ++i) {
        float* row = &dx.at(n, c, i, 0);
        for (int j = 0; j < wv; ++j) row[j] = g;
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Linear / Sequential
// ---------------------------------------------------------------------------

Linear::Linear(int in_features, int out_features, std::mt19937* rng,
               const std::string& name)
    : in_f_(in_features), out_f_(out_features) {
  weight_.name = name + ".weight";
  weight_.value.resize(static_cast<size_t>(out_features) * in_features);
  weight_.grad.assign(weight_.value.size(), 0.0f);
  he_init(weight_, in_features, rng);
  bias_.name = name + ".bias";
  bias_.value.assign(out_features, 0.0f);
  bias_.grad.assign(out_features, 0.0f);
}

void Linear::collect_params(std::vector<Param*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

Tensor Linear::forward(const Tensor& x, bool /*train*/) {
  int features = x.c * x.h * x.w;
  if (features != in_f_) {
    throw Error(ErrorKind::kCompatibility,
                weight_.name + ": got " + std::to_string(features) +
                    " input features, want " + std::to_string(in_f_));
  }
  input_ = x;
  Tensor y(x.n, out_f_, 1, 1);
  for (int n = 0; n < x.n; ++n) {
    const float* xi = &x.v[static_cast<size_t>(n) * in_f_];
    float* yo = &y.v[static_cast<size_t>(n) * out_f_];
    for (int o = 0; o < out_f_; ++o) {
      const float* wr = weight_.value.data() + static_cast<size_t>(o) * in_f_;
      double acc = bias_.value[o];
      for (int i = 0; i < in_f_; ++i) acc += wr[i] * xi[i];
      yo[o] = static_cast<float>(acc);
    }
  }
  return y;
}

Tensor Linear::backward(const Tensor& dy) {
  Tensor dx(input_.n, input_.c, input_.h, input_.w);
  for (int n = 0; n < input_.n; ++n) {
    const float* xi = &input_.v[static_cast<size_t>(n) * in_f_];
    const float* dyo = &dy.v[static_cast<size_t>(n) * out_f_];
    float* dxi = &dx.v[static_cast<size_t>(n) * in_f_];
    for (int o = 0; o < out_f_; ++o) {
      float g = dyo[o];
      if (g == 0.0f) continue;
      float* wg = weight_.grad.data() + static_cast<size_t>(o) * in_f_;
      const float* wr = weight_.value.data() + static_cast<size_t>(o) * in_f_;
      for (int i = 0; i < in_f_; ++i) {
        wg[i] += g * xi[i];
        dxi[i] += g * wr[i];
      }
      bias_.grad[o] += g;
    }
  }
  return dx;
}

Tensor Sequential::forward(const Tensor& x, bool train) {
  Tensor cur = x;
  for (auto& m : mods_) cur = m->forward(cur, train);
  return cur;
}

Tensor Sequential::backward(const Tensor& dy) {
  Tensor cur = dy;
  for (auto it = mods_.rbegin(); it != mods_.rend(); ++it) {
    cur = (*it)->backward(cur);
  }
  return cur;
}

void Sequential::collect_params(std::vector<Param*>& out) {
  for (auto& m : mods_) m->collect_params(out);
}

// ---------------------------------------------------------------------------
// Bottleneck
// ---------------------------------------------------------------------------

Bottleneck::Bottleneck(int in_c, int mid_c, int stride, std::mt19937* rng,
                       const std::string& name) {
  const int out_c = mid_c * kExpansion;
  main_.add(std::make_unique<Conv2d>(in_c, mid_c, 1, 1, 0, rng, name + ".c1"));
  main_.add(std::make_unique<BatchNorm2d>(mid_c, name + ".bn1"));
  main_.add(std::make_unique<ReLU>());
  main_.add(
      std::make_unique<Conv2d>(mid_c, mid_c, 3, stride, 1, rng, name + ".c2"));
  main_.add(std::make_unique<BatchNorm2d>(mid_c, name + ".bn2"));
  main_.add(std::make_unique<ReLU>());
  main_.add(
      std::make_unique<Conv2d>(mid_c, out_c, 1, 1, 0, rng, name + ".c3"));
  main_.add(std::make_unique<BatchNorm2d>(out_c, name + ".bn3"));
  if (stride != 1 || in_c != out_c) {
    shortcut_ = std::make_unique<Sequential>();
    shortcut_->add(
        std::make_unique<Conv2d>(in_c, out_c, 1, stride, 0, rng, name + ".sc"));
    shortcut_->add(std::make_unique<BatchNorm2d>(out_c, name + ".scbn"));
  }
}

Tensor Bottleneck::forward(const Tensor& x, bool train) {
  Tensor m = main_.forward(x, train);
  Tensor s = shortcut_ ? shortcut_->forward(x, train) : x;
  relu_mask_.assign(m.size(), 0);
  for (size_t i = 0; i < m.size(); ++i) {
    float v = m.v[i] + s.v[i];
    if (v > 0.0f) {
      m.v[i] = v;
      relu_mask_[i] = 1;
    } else {
      m.v[i] = 0.0f;
    }
  }
  return m;
}

Tensor Bottleneck::backward(const Tensor& dy) {
  Tensor d = dy;
  for (size_t i = 0; i < d.size(); ++i) {
    if (!relu_mask_[i]) d.v[i] = 0.0f;
  }
  Tensor dx = main_.backward(d);
  if (shortcut_) {
    Tensor ds = shortcut_->backward(d);
    for (size_t i = 0; i < dx.size(); ++i) dx.v[i] += ds.v[i];
  } else {
    for (size_t i = 0; i < dx.size(); ++i) dx.v[i] += d.v[i];
  }
  return dx;
}

void Bottleneck::collect_params(std::vector<Param*>& out) {
  main_.collect_params(out);
  if (shortcut_) shortcut_->collect_params(out);
}

// ---------------------------------------------------------------------------
// Network / builders
// ---------------------------------------------------------------------------

std::vector<Param*> Network::params() {
  std::vector<Param*> out;
  root_->collect_params(out);
  return out;
}

size_t Network::num_weights() {
  size_t total = 0;
  for (Param* p : params()) total += p->value.size();
  return total;
}

void Network::save_params(std::ostream& out) {
  auto ps = params();
  uint32_t count = static_cast<uint32_t>(ps.size());
  out.write(reinterpret_cast<const char*>(&count), 4);
  for (Param* p : ps) {
    uint32_t name_len = static_cast<uint32_t>(p->name.size());
    out.write(reinterpret_cast<const char*>(&name_len), 4);
    out.write(p->name.data(), name_len);
    uint64_t size = p->value.size();
    out.write(reinterpret_cast<const char*>(&size), 8);
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(size * sizeof(float)));
  }
}

void Network::load_params(std::istream& in) {
  auto ps = params();
  uint32_t count = 0;
  in.read(reinterpret_cast<char*>(&count), 4);
  if (!in || count != ps.size()) {
    throw Error(ErrorKind::kCompatibility,
                "checkpoint parameter count mismatch: file has " +
                    std::to_string(count) + ", model has " +
                    std::to_string(ps.size()));
  }
  for (Param* p : ps) {
    uint32_t name_len = 0;
    in.read(reinterpret_cast<char*>(&name_len), 4);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    uint64_t size = 0;
    in.read(reinterpret_cast<char*>(&size), 8);
    if (!in || name != p->name || size != p->value.size()) {
      throw Error(ErrorKind::kCompatibility,
                  "checkpoint parameter mismatch at '" + p->name + "'");
    }
    in.read(reinterpret_cast<char*>(p->value.data()),
            static_cast<std::streamsize>(size * sizeof(float)));
    if (!in) {
      throw Error(ErrorKind::kCompatibility,
                  "checkpoint truncated at '" + p->name + "'");
    }
  }
}

Network make_small_cnn(int in_channels, uint64_t seed) {
  std::mt19937 rng(static_cast<uint32_t>(seed ^ (seed >> 32)));
  auto seq = std::make_unique<Sequential>();
  int c_in = in_channels;
  const int channels[4] = {16, 24, 32, 48};
  for (int b = 0; b < 4; ++b) {
    std::string tag = "block" + std::to_string(b + 1);
    seq->add(std::make_unique<Conv2d>(c_in, channels[b], 3, 1, 1, &rng,
                                      tag + ".conv"));
    seq->add(std::make_unique<BatchNorm2d>(channels[b], tag + ".bn"));
    seq->add(std::make_unique<ReLU>());
    seq->add(std::make_unique<MaxPool2d>(2, 2, 0));
    c_in = channels[b];
  }
  seq->add(std::make_unique<MaskedGlobalAvgPool>());
  seq->add(std::make_unique<Linear>(48, 2, &rng, "head"));
  return Network(std::move(seq));
}

Network make_resnet50(int in_channels, uint64_t seed) {
  std::mt19937 rng(static_cast<uint32_t>(seed ^ (seed >> 32)));
  auto seq = std::make_unique<Sequential>();
  seq->add(std::make_unique<Conv2d>(in_channels, 64, 7, 2, 3, &rng, "stem"));
  seq->add(std::make_unique<BatchNorm2d>(64, "stem.bn"));
  seq->add(std::make_unique<ReLU>());
  seq->add(std::make_unique<MaxPool2d>(3, 2, 1));

  struct Stage {
    int mid, blocks, stride;
  };
  const Stage stages[4] = {{64, 3, 1}, {128, 4, 2}, {256, 6, 2}, {512, 3, 2}};
  int c_in = 64;
  for (int s = 0; s < 4; ++s) {
    for (int b = 0; b < stages[s].blocks; ++b) {
      std::string tag =
          "layer" + std::to_string(s + 1) + "." + std::to_string(b);
      int stride = b == 0 ? stages[s].stride : 1;
      seq->add(std::make_unique<Bottleneck>(c_in, stages[s].mid, stride, &rng,
                                            tag));
      c_in = stages[s].mid * Bottleneck::kExpansion;
    }
  }
  seq->add(std::make_unique<MaskedGlobalAvgPool>());
  seq->add(std::make_unique<Linear>(2048, 2, &rng, "head"));
  return Network(std::move(seq));
}

// ---------------------------------------------------------------------------
// Adam / loss / AUC
// ---------------------------------------------------------------------------

void Adam::step(const std::vector<Param*>& params) {
  if (m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
      m_[i].assign(params[i]->value.size(), 0.0f);
      v_[i].assign(params[i]->value.size(), 0.0f);
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, t_);
  const double bc2 = 1.0 - std::pow(beta2_, t_);
  for (size_t i = 0; i < params.size(); ++i) {
    Param* p = params[i];
    if (!p->trainable) continue;
    for (size_t j = 0; j < p->value.size(); ++j) {
      double g = p->grad[j];
      double m = beta1_ * m_[i][j] + (1.0 - beta1_) * g;
      double v = beta2_ * v_[i][j] + (1.0 - beta2_) * g * g;
      m_[i][j] = static_cast<float>(m);
      v_[i][j] = static_cast<float>(v);
      double mhat = m / bc1;
      double vhat = v / bc2;
      p->value[j] -=
          static_cast<float>(lr_ * mhat / (std::sqrt(vhat) + eps_));
    }
  }
}

void Adam::zero_grad(const std::vector<Param*>& params) {
  for (Param* p : params) std::fill(p->grad.begin(), p->grad.end(), 0.0f);
}

double softmax_cross_entropy(const Tensor& logits,
                             const std::vector<int>& labels,
                             Tensor* dlogits) {
  if (static_cast<size_t>(logits.n) != labels.size()) {
    throw Error(ErrorKind::kInput, "logits/labels size mismatch");
  }
  const int classes = logits.c;
  if (dlogits != nullptr) *dlogits = Tensor(logits.n, classes, 1, 1);
  double total = 0.0;
  for (int n = 0; n < logits.n; ++n) {
    const float* row = &logits.v[static_cast<size_t>(n) * classes];
    float mx = *std::max_element(row, row + classes);
    double denom = 0.0;
    for (int c = 0; c < classes; ++c) denom += std::exp(row[c] - mx);
    double logp = row[labels[n]] - mx - std::log(denom);
    total -= logp;
    if (dlogits != nullptr) {
      for (int c = 0; c < classes; ++c) {
        double p = std::exp(row[c] - mx) / denom;
        dlogits->v[static_cast<size_t>(n) * classes + c] = static_cast<float>(
            (p - (c == labels[n] ? 1.0 : 0.0)) / logits.n);
      }
    }
  }
  return total / logits.n;
}

double auc(const std::vector<std::pair<double, bool>>& scored) {
  size_t pos = 0, neg = 0;
  for (const auto& [s, is_pos] : scored) {
    (void)s;
    if (is_pos) ++pos;
    else ++neg;
  }
  if (pos == 0 || neg == 0) {
    throw Error(ErrorKind::kInput, "AUC needs both classes");
  }
  std::vector<size_t> order(scored.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return scored[a].first < scored[b].first;
  });
  double rank_sum_pos = 0.0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j < order.size() &&
           scored[order[j]].first == scored[order[i]].first) {
      ++j;
    }
    double avg_rank = (static_cast<double>(i) + static_cast<double>(j - 1)) / 2.0 + 1.0;
    for (size_t k = i; k < j; ++k) {
      if (scored[order[k]].second) rank_sum_pos += avg_rank;
    }
    i = j;
  }
  double u = rank_sum_pos - static_cast<double>(pos) * (pos + 1) / 2.0;
  return u / (static_cast<double>(pos) * neg);
}

}  // namespace cbasr::nn
