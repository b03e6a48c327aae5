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

#ifndef CBASR_NN_HPP_
#define CBASR_NN_HPP_

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace cbasr::nn {

// Minimal CPU training stack for the similarity-map classifiers. Widths
// are masked per sample: utterance-axis padding never leaks into pooled
// features, so a map's score does not depend on how a batch was padded.

struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<float> v;
  std::vector<int> valid_w;  // per-sample real width; empty = all columns

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_),
        v(static_cast<size_t>(n_) * c_ * h_ * w_, 0.0f) {}

  float& at(int in, int ic, int ih, int iw) {
    return v[((static_cast<size_t>(in) * c + ic) * h + ih) * w + iw];
  }
  const float& at(int in, int ic, int ih, int iw) const {
    return v[((static_cast<size_t>(in) * c + ic) * h + ih) * w + iw];
  }
  size_t size() const { return v.size(); }
  int width_of(int sample) const {
    return valid_w.empty() ? w : valid_w[sample];
  }
};

struct Param {
  std::string name;
  std::vector<float> value;
  std::vector<float> grad;
  bool trainable = true;
};

class Module {
 public:
  virtual ~Module() = default;
  virtual Tensor forward(const Tensor& x, bool train) = 0;
  virtual Tensor backward(const Tensor& dy) = 0;
  virtual void collect_params(std::vector<Param*>& out) {}
};

// GEMM thread count; row-partitioned so results are identical for any
// value. Default 2.
void set_num_threads(int n);
int num_threads();

class Conv2d : public Module {
 public:
  Conv2d(int in_c, int out_c, int kernel, int stride, int pad,
         std::mt19937* rng = nullptr, const std::string& name = "conv");
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(std::vector<Param*>& out) override;

 private:
  int in_c_, out_c_, k_, stride_, pad_;
  Param weight_, bias_;
  Tensor input_;
  std::vector<float> col_;  // cached im2col of the last forward
  std::vector<int> out_valid_;
  int out_h_ = 0, out_w_ = 0;
};

class BatchNorm2d : public Module {
 public:
  explicit BatchNorm2d(int channels, const std::string& name = "bn");
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(std::vector<Param*>& out) override;

 private:
  int c_;
  double momentum_ = 0.1, eps_ = 1e-5;
  Param gamma_, beta_, running_mean_, running_var_;
  Tensor input_, normalized_;
  std::vector<float> batch_mean_, batch_inv_std_;
  std::vector<int> out_valid_;
};

class ReLU : public Module {
 public:
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;

 private:
  std::vector<uint8_t> mask_;
};

class MaxPool2d : public Module {
 public:
  MaxPool2d(int kernel, int stride, int pad = 0);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;

 private:
  int k_, stride_, pad_;
  std::vector<int64_t> argmax_;
  std::vector<int> out_valid_;
  int in_n_ = 0, in_c_ = 0, in_h_ = 0, in_w_ = 0;
};

// Mean over height x valid width per channel -> N x C x 1 x 1.
class MaskedGlobalAvgPool : public Module {
 public:
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;

 private:
  int in_h_ = 0, in_w_ = 0;
  std::vector<int> widths_;
  int in_c_ = 0;
};

class Linear : public Module {
 public:
  Linear(int in_features, int out_features, std::mt19937* rng = nullptr,
         const std::string& name = "fc");
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(std::vector<Param*>& out) override;

 private:
  int in_f_, out_f_;
  Param weight_, bias_;
  Tensor input_;
};

class Sequential : public Module {
 public:
  Sequential() = default;
  void add(std::unique_ptr<Module> m) { mods_.push_back(std::move(m)); }
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(std::vector<Param*>& out) override;
  size_t size() const { return mods_.size(); }

 private:
  std::vector<std::unique_ptr<Module>> mods_;
};

// Standard bottleneck residual block (1x1 -> 3x3 -> 1x1 with a projected
// shortcut when the shape changes).
class Bottleneck : public Module {
 public:
  Bottleneck(int in_c, int mid_c, int stride, std::mt19937* rng,
             const std::string& name);
  Tensor forward(const Tensor& x, bool train) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(std::vector<Param*>& out) override;

  static constexpr int kExpansion = 4;

 private:
  Sequential main_;
  std::unique_ptr<Sequential> shortcut_;  // null = identity
  std::vector<uint8_t> relu_mask_;
};

class Network {
 public:
  Network() = default;
  explicit Network(std::unique_ptr<Module> root) : root_(std::move(root)) {}

  Tensor forward(const Tensor& x, bool train) {
    return root_->forward(x, train);
  }
  Tensor backward(const Tensor& dy) { return root_->backward(dy); }
  std::vector<Param*> params();
  size_t num_weights();

  void save_params(std::ostream& out);
  void load_params(std::istream& in);

 private:
  std::unique_ptr<Module> root_;
};

// 4 conv blocks (conv3x3 + BN + ReLU + pool) with 16/24/32/48 channels,
// masked global pooling and a 2-way head. The desk-scale architecture.
Network make_small_cnn(int in_channels, uint64_t seed);

// ResNet-50 with a 2-way head.
Network make_resnet50(int in_channels, uint64_t seed);

class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(const std::vector<Param*>& params);
  void zero_grad(const std::vector<Param*>& params);

 private:
  double lr_, beta1_, beta2_, eps_;
  int t_ = 0;
  std::vector<std::vector<float>> m_, v_;
};

// Mean softmax cross-entropy over N x num_classes x 1 x 1 logits; fills
// dlogits when given.
double softmax_cross_entropy(const Tensor& logits,
                             const std::vector<int>& labels,
                             Tensor* dlogits = nullptr);

// Rank-based AUC with tie averaging over (score, is_positive) pairs.
double auc(const std::vector<std::pair<double, bool>>& scored);

}  // namespace cbasr::nn

#endif  // CBASR_NN_HPP_
