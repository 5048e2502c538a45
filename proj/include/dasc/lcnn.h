// dasc/lcnn.h
//
// Copyright 2026  DASC Toolkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.
//
// Light CNN with Max-Feature-Map activations, built from an LcnnSpec layer
// list. Everything runs on the CPU in plain loops; training is
// single-threaded by contract so that a fixed seed reproduces runs bit for
// bit. Inference never mutates the model and is safe to share across
// threads.
//
// Architectures are written as whitespace-separated tokens:
//
//   conv:OC:K[:S]  convolution, OC output channels, KxK kernel, stride S
//                  (default 1), zero padding K/2
//   mfm            max-feature-map: out[i] = max(x[i], x[i + C/2])
//   pool:P         PxP max pooling, stride P, floor division
//   bn             batch normalization (per channel)
//   flatten        collapse (C,H,W) to a vector
//   dense:U        fully connected, U outputs
//   dropout:P      dropout with probability P (training only)
//
// The MFM subgradient at ties goes entirely to the first operand.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "dasc/common.h"
#include "dasc/cqt.h"
#include "dasc/metrics.h"
#include "dasc/protocol.h"
#include "dasc/tensor.h"

namespace dasc {

constexpr int kLabelSpoof = 0;
constexpr int kLabelBonafide = 1;

struct LayerSpec {
  enum class Kind { conv, mfm, max_pool, batch_norm, flatten, dense, dropout };
  Kind kind = Kind::conv;
  int out_channels = 0;  // conv
  int kernel = 0;        // conv
  int stride = 1;        // conv
  int pool = 0;          // max_pool
  int units = 0;         // dense
  double p = 0.0;        // dropout

  std::string to_string() const {
    switch (kind) {
      case Kind::conv: {
        std::string s = "conv:" + std::to_string(out_channels) + ":" + std::to_string(kernel);
        if (stride != 1) s += ":" + std::to_string(stride);
        return s;
      }
      case Kind::mfm: return "mfm";
      case Kind::max_pool: return "pool:" + std::to_string(pool);
      case Kind::batch_norm: return "bn";
      case Kind::flatten: return "flatten";
      case Kind::dense: return "dense:" + std::to_string(units);
      case Kind::dropout: {
        std::ostringstream ss;
        ss << "dropout:" << p;
        return ss.str();
      }
    }
    return "";
  }
};

struct LcnnSpec {
  std::vector<LayerSpec> layers;
  int input_rows = 84;
  int input_cols = 550;

  std::string to_string() const {
    std::string s;
    for (const auto& l : layers) {
      if (!s.empty()) s += ' ';
      s += l.to_string();
    }
    return s;
  }

  static LcnnSpec parse(const std::string& text, int input_rows = 84, int input_cols = 550) {
    LcnnSpec spec;
    spec.input_rows = input_rows;
    spec.input_cols = input_cols;
    std::istringstream ss(text);
    std::string tok;
    while (ss >> tok) {
      std::vector<std::string> parts;
      std::istringstream ts(tok);
      std::string part;
      while (std::getline(ts, part, ':')) parts.push_back(part);
      LayerSpec layer;
      try {
        if (parts[0] == "conv") {
          if (parts.size() < 3 || parts.size() > 4) throw ParseError("conv needs OC:K[:S]");
          layer.kind = LayerSpec::Kind::conv;
          layer.out_channels = std::stoi(parts[1]);
          layer.kernel = std::stoi(parts[2]);
          layer.stride = parts.size() == 4 ? std::stoi(parts[3]) : 1;
        } else if (parts[0] == "mfm") {
          layer.kind = LayerSpec::Kind::mfm;
        } else if (parts[0] == "pool") {
          if (parts.size() != 2) throw ParseError("pool needs P");
          layer.kind = LayerSpec::Kind::max_pool;
          layer.pool = std::stoi(parts[1]);
        } else if (parts[0] == "bn") {
          layer.kind = LayerSpec::Kind::batch_norm;
        } else if (parts[0] == "flatten") {
          layer.kind = LayerSpec::Kind::flatten;
        } else if (parts[0] == "dense") {
          if (parts.size() != 2) throw ParseError("dense needs U");
          layer.kind = LayerSpec::Kind::dense;
          layer.units = std::stoi(parts[1]);
        } else if (parts[0] == "dropout") {
          if (parts.size() != 2) throw ParseError("dropout needs P");
          layer.kind = LayerSpec::Kind::dropout;
          layer.p = std::stod(parts[1]);
        } else {
          throw ParseError("unknown layer '" + tok + "'");
        }
      } catch (const std::invalid_argument&) {
        throw ParseError("bad layer token '" + tok + "'");
      }
      spec.layers.push_back(layer);
    }
    if (spec.layers.empty()) throw ParseError("empty architecture string");
    return spec;
  }

  // Compact LCNN in the spirit of the published systems: four conv-MFM
  // blocks (32/48/64/32 channels after MFM), pooling after each block,
  // batch norm between blocks, one dense-MFM of 80 units, two output logits.
  static LcnnSpec default_arch() {
    return parse(
        "conv:64:3 mfm pool:2 bn "
        "conv:96:3 mfm pool:2 bn "
        "conv:128:3 mfm pool:2 bn "
        "conv:64:3 mfm pool:2 "
        "flatten dense:160 mfm dense:2");
  }

  // Walks the layer list symbolically and validates it: MFM needs an even
  // channel count, dense needs a flattened input, the final layer must be
  // dense:2.
  Shape3 output_shape() const {
    Shape3 s{1, input_rows, input_cols};
    for (size_t i = 0; i < layers.size(); ++i) {
      const LayerSpec& l = layers[i];
      switch (l.kind) {
        case LayerSpec::Kind::conv: {
          if (l.out_channels <= 0 || l.kernel <= 0 || l.stride <= 0)
            throw DomainError("conv: bad parameters");
          const int pad = l.kernel / 2;
          const int oh = (s.h + 2 * pad - l.kernel) / l.stride + 1;
          const int ow = (s.w + 2 * pad - l.kernel) / l.stride + 1;
          if (oh <= 0 || ow <= 0) throw DomainError("conv: output collapses to zero");
          s = {l.out_channels, oh, ow};
          break;
        }
        case LayerSpec::Kind::mfm:
          if (s.c % 2 != 0)
            throw DomainError("mfm: incoming channel count " + std::to_string(s.c) +
                              " is odd");
          s.c /= 2;
          break;
        case LayerSpec::Kind::max_pool:
          if (l.pool <= 0) throw DomainError("pool: bad size");
          if (s.h < l.pool || s.w < l.pool)
            throw DomainError("pool: input " + s.str() + " smaller than window");
          s.h /= l.pool;
          s.w /= l.pool;
          break;
        case LayerSpec::Kind::batch_norm:
          break;
        case LayerSpec::Kind::flatten:
          s = {s.c * s.h * s.w, 1, 1};
          break;
        case LayerSpec::Kind::dense:
          if (s.h != 1 || s.w != 1) throw DomainError("dense: flatten the input first");
          if (l.units <= 0) throw DomainError("dense: bad unit count");
          s = {l.units, 1, 1};
          break;
        case LayerSpec::Kind::dropout:
          if (l.p < 0.0 || l.p >= 1.0) throw DomainError("dropout: p must be in [0,1)");
          break;
      }
    }
    if (layers.back().kind != LayerSpec::Kind::dense || s.c != 2 || s.h != 1 || s.w != 1)
      throw DomainError("architecture must end in dense:2 (got " + s.str() + ")");
    return s;
  }
};

namespace nn_detail {

// C[m][p] += A[m][k] * B[k][p], row-major.
inline void gemm_acc(const double* a, const double* b, double* c_out, int m, int k, int p) {
  for (int i = 0; i < m; ++i) {
    const double* arow = a + static_cast<size_t>(i) * k;
    double* crow = c_out + static_cast<size_t>(i) * p;
    for (int kk = 0; kk < k; ++kk) {
      const double av = arow[kk];
      if (av == 0.0) continue;
      const double* brow = b + static_cast<size_t>(kk) * p;
      for (int j = 0; j < p; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m][p] += A^T[m][k] * B[k][p] where A is stored [k][m].
inline void gemm_at_acc(const double* a, const double* b, double* c_out, int m, int k, int p) {
  for (int kk = 0; kk < k; ++kk) {
    const double* arow = a + static_cast<size_t>(kk) * m;
    const double* brow = b + static_cast<size_t>(kk) * p;
    for (int i = 0; i < m; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* crow = c_out + static_cast<size_t>(i) * p;
      for (int j = 0; j < p; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace nn_detail

// Per-layer training cache; reused loosely by each layer kind.
struct LayerCache {
  Tensor x;                    // saved input
  std::vector<double> col;     // conv: im2col buffer
  std::vector<int32_t> index;  // pool: argmax indices
  std::vector<uint8_t> mask;   // mfm / dropout
  std::vector<double> stats;   // bn: xhat
  std::vector<double> inv_std; // bn: per-channel 1/sqrt(var+eps)
};

struct ParamRef {
  std::vector<double>* value;
  std::vector<double>* grad;
};

class Layer {
 public:
  explicit Layer(LayerSpec spec) : spec_(spec) {}
  virtual ~Layer() = default;

  const LayerSpec& spec() const { return spec_; }

  // Thread-safe, never mutates the layer.
  virtual Tensor infer(const Tensor& x) const = 0;

  // Training pass; may update internal statistics (batch norm) and fills the
  // cache consumed by backward().
  virtual Tensor train_forward(const Tensor& x, LayerCache& cache, Rng& rng) {
    (void)rng;
    cache.x = x;
    return infer(x);
  }

  // Returns d(loss)/d(input) and accumulates parameter gradients.
  virtual Tensor backward(const Tensor& grad_out, const LayerCache& cache) = 0;

  virtual void collect_params(std::vector<ParamRef>& out) { (void)out; }
  // Non-trainable state that still belongs in a checkpoint (BN running stats).
  virtual void collect_buffers(std::vector<std::vector<double>*>& out) { (void)out; }

 protected:
  LayerSpec spec_;
};

class ConvLayer : public Layer {
 public:
  ConvLayer(LayerSpec spec, int in_channels, Rng& rng)
      : Layer(spec), in_c_(in_channels) {
    const int k = spec.kernel;
    const size_t wsize = static_cast<size_t>(spec.out_channels) * in_c_ * k * k;
    weight_.resize(wsize);
    bias_.assign(spec.out_channels, 0.0);
    wgrad_.assign(wsize, 0.0);
    bgrad_.assign(spec.out_channels, 0.0);
    const double std = std::sqrt(2.0 / (static_cast<double>(in_c_) * k * k));
    for (auto& v : weight_) v = rng.gaussian() * std;
  }

  Tensor infer(const Tensor& x) const override {
    std::vector<double> col;
    return forward_impl(x, &col);
  }

  Tensor train_forward(const Tensor& x, LayerCache& cache, Rng&) override {
    cache.x = x;
    return forward_impl(x, &cache.col);
  }

  Tensor backward(const Tensor& gout, const LayerCache& cache) override {
    const Tensor& x = cache.x;
    const int k = spec_.kernel, pad = k / 2, stride = spec_.stride;
    const int oh = gout.h, ow = gout.w, oc = spec_.out_channels;
    const int patch = in_c_ * k * k;
    Tensor gin(x.n, x.c, x.h, x.w);
    std::vector<double> col(static_cast<size_t>(patch) * oh * ow);
    std::vector<double> dcol(col.size());
    for (int in = 0; in < x.n; ++in) {
      im2col(x, in, col.data());
      // dW += gout * col^T
      const double* g = gout.sample(in);
      for (int o = 0; o < oc; ++o) {
        const double* grow = g + static_cast<size_t>(o) * oh * ow;
        double* wrow = wgrad_.data() + static_cast<size_t>(o) * patch;
        for (int pp = 0; pp < patch; ++pp) {
          const double* crow = col.data() + static_cast<size_t>(pp) * oh * ow;
          double acc = 0.0;
          for (int j = 0; j < oh * ow; ++j) acc += grow[j] * crow[j];
          wrow[pp] += acc;
        }
        double bacc = 0.0;
        for (int j = 0; j < oh * ow; ++j) bacc += grow[j];
        bgrad_[o] += bacc;
      }
      // dcol = W^T * gout, then scatter back
      std::fill(dcol.begin(), dcol.end(), 0.0);
      nn_detail::gemm_at_acc(weight_.data(), g, dcol.data(), patch, oc, oh * ow);
      double* gx = gin.sample(in);
      size_t idx = 0;
      for (int ic = 0; ic < in_c_; ++ic) {
        for (int ky = 0; ky < k; ++ky) {
          for (int kx = 0; kx < k; ++kx) {
            for (int oy = 0; oy < oh; ++oy) {
              const int iy = oy * stride + ky - pad;
              for (int ox = 0; ox < ow; ++ox, ++idx) {
                const int ix = ox * stride + kx - pad;
                if (iy >= 0 && iy < x.h && ix >= 0 && ix < x.w)
                  gx[(static_cast<size_t>(ic) * x.h + iy) * x.w + ix] += dcol[idx];
              }
            }
          }
        }
      }
    }
    return gin;
  }

  void collect_params(std::vector<ParamRef>& out) override {
    out.push_back({&weight_, &wgrad_});
    out.push_back({&bias_, &bgrad_});
  }

 private:
  Tensor forward_impl(const Tensor& x, std::vector<double>* colbuf) const {
    if (x.c != in_c_)
      throw DomainError("conv: expected " + std::to_string(in_c_) + " channels, got " +
                        std::to_string(x.c));
    const int k = spec_.kernel, pad = k / 2, stride = spec_.stride;
    const int oh = (x.h + 2 * pad - k) / stride + 1;
    const int ow = (x.w + 2 * pad - k) / stride + 1;
    const int oc = spec_.out_channels;
    const int patch = in_c_ * k * k;
    Tensor out(x.n, oc, oh, ow);
    colbuf->resize(static_cast<size_t>(patch) * oh * ow);
    for (int in = 0; in < x.n; ++in) {
      im2col(x, in, colbuf->data());
      double* o = out.sample(in);
      for (int c = 0; c < oc; ++c) {
        double* orow = o + static_cast<size_t>(c) * oh * ow;
        std::fill(orow, orow + oh * ow, bias_[c]);
      }
      nn_detail::gemm_acc(weight_.data(), colbuf->data(), o, oc, patch, oh * ow);
    }
    return out;
  }

  // col[(ic*k*k + ky*k + kx)][oy*ow + ox] = x[ic][oy*s + ky - pad][ox*s + kx - pad]
  void im2col(const Tensor& x, int in, double* col) const {
    const int k = spec_.kernel, pad = k / 2, stride = spec_.stride;
    const int oh = (x.h + 2 * pad - k) / stride + 1;
    const int ow = (x.w + 2 * pad - k) / stride + 1;
    const double* xs = x.sample(in);
    size_t idx = 0;
    for (int ic = 0; ic < in_c_; ++ic) {
      const double* xc = xs + static_cast<size_t>(ic) * x.h * x.w;
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * stride + ky - pad;
            if (iy < 0 || iy >= x.h) {
              for (int ox = 0; ox < ow; ++ox) col[idx++] = 0.0;
              continue;
            }
            const double* xrow = xc + static_cast<size_t>(iy) * x.w;
            for (int ox = 0; ox < ow; ++ox, ++idx) {
              const int ix = ox * stride + kx - pad;
              col[idx] = (ix >= 0 && ix < x.w) ? xrow[ix] : 0.0;
            }
          }
        }
      }
    }
  }

  int in_c_;
  std::vector<double> weight_, bias_, wgrad_, bgrad_;
};

class MfmLayer : public Layer {
 public:
  using Layer::Layer;

  Tensor infer(const Tensor& x) const override {
    if (x.c % 2 != 0) throw DomainError("mfm: odd channel count " + std::to_string(x.c));
    const int half = x.c / 2;
    Tensor out(x.n, half, x.h, x.w);
    const int plane = x.h * x.w;
    for (int in = 0; in < x.n; ++in) {
      const double* xs = x.sample(in);
      double* os = out.sample(in);
      for (int c = 0; c < half; ++c) {
        const double* a = xs + static_cast<size_t>(c) * plane;
        const double* b = xs + static_cast<size_t>(c + half) * plane;
        double* o = os + static_cast<size_t>(c) * plane;
        for (int i = 0; i < plane; ++i) o[i] = a[i] >= b[i] ? a[i] : b[i];
      }
    }
    return out;
  }

  Tensor train_forward(const Tensor& x, LayerCache& cache, Rng&) override {
    Tensor out = infer(x);
    const int half = x.c / 2, plane = x.h * x.w;
    cache.x.n = x.n;
    cache.x.c = x.c;
    cache.x.h = x.h;
    cache.x.w = x.w;  // shape only; data not needed
    cache.mask.resize(out.size());
    for (int in = 0; in < x.n; ++in) {
      const double* xs = x.sample(in);
      uint8_t* m = cache.mask.data() + static_cast<size_t>(in) * half * plane;
      for (int c = 0; c < half; ++c) {
        const double* a = xs + static_cast<size_t>(c) * plane;
        const double* b = xs + static_cast<size_t>(c + half) * plane;
        // Ties route the subgradient to the first operand.
        for (int i = 0; i < plane; ++i) m[static_cast<size_t>(c) * plane + i] = a[i] >= b[i];
      }
    }
    return out;
  }

  Tensor backward(const Tensor& gout, const LayerCache& cache) override {
    const int half = gout.c, plane = gout.h * gout.w;
    Tensor gin(cache.x.n, cache.x.c, cache.x.h, cache.x.w);
    for (int in = 0; in < gout.n; ++in) {
      const double* g = gout.sample(in);
      const uint8_t* m = cache.mask.data() + static_cast<size_t>(in) * half * plane;
      double* gi = gin.sample(in);
      for (int c = 0; c < half; ++c) {
        for (int i = 0; i < plane; ++i) {
          const size_t off = static_cast<size_t>(c) * plane + i;
          if (m[off])
            gi[off] = g[off];
          else
            gi[static_cast<size_t>(c + half) * plane + i] = g[off];
        }
      }
    }
    return gin;
  }
};

class MaxPoolLayer : public Layer {
 public:
  using Layer::Layer;

  Tensor infer(const Tensor& x) const override { return forward_impl(x, nullptr); }

  Tensor train_forward(const Tensor& x, LayerCache& cache, Rng&) override {
    cache.x.n = x.n;
    cache.x.c = x.c;
    cache.x.h = x.h;
    cache.x.w = x.w;
    return forward_impl(x, &cache.index);
  }

  Tensor backward(const Tensor& gout, const LayerCache& cache) override {
    Tensor gin(cache.x.n, cache.x.c, cache.x.h, cache.x.w);
    for (size_t i = 0; i < gout.size(); ++i) gin.data[cache.index[i]] += gout.data[i];
    return gin;
  }

 private:
  Tensor forward_impl(const Tensor& x, std::vector<int32_t>* index) const {
    const int p = spec_.pool;
    if (x.h < p || x.w < p) throw DomainError("pool: input smaller than window");
    const int oh = x.h / p, ow = x.w / p;
    Tensor out(x.n, x.c, oh, ow);
    if (index) index->resize(out.size());
    size_t oidx = 0;
    for (int in = 0; in < x.n; ++in) {
      for (int c = 0; c < x.c; ++c) {
        for (int oy = 0; oy < oh; ++oy) {
          for (int ox = 0; ox < ow; ++ox, ++oidx) {
            double best = -std::numeric_limits<double>::infinity();
            size_t best_idx = 0;
            for (int py = 0; py < p; ++py) {
              for (int px = 0; px < p; ++px) {
                const size_t idx =
                    ((static_cast<size_t>(in) * x.c + c) * x.h + oy * p + py) * x.w + ox * p + px;
                if (x.data[idx] > best) {
                  best = x.data[idx];
                  best_idx = idx;
                }
              }
            }
            out.data[oidx] = best;
            if (index) (*index)[oidx] = static_cast<int32_t>(best_idx);
          }
        }
      }
    }
    return out;
  }
};

class BatchNormLayer : public Layer {
 public:
  BatchNormLayer(LayerSpec spec, int channels) : Layer(spec), channels_(channels) {
    gamma_.assign(channels, 1.0);
    beta_.assign(channels, 0.0);
    ggrad_.assign(channels, 0.0);
    bgrad_.assign(channels, 0.0);
    running_mean_.assign(channels, 0.0);
    running_var_.assign(channels, 1.0);
  }

  Tensor infer(const Tensor& x) const override {
    Tensor out(x.n, x.c, x.h, x.w);
    const int plane = x.h * x.w;
    for (int c = 0; c < x.c; ++c) {
      const double inv = 1.0 / std::sqrt(running_var_[c] + kEps);
      for (int in = 0; in < x.n; ++in) {
        const double* xs = x.sample(in) + static_cast<size_t>(c) * plane;
        double* os = out.sample(in) + static_cast<size_t>(c) * plane;
        for (int i = 0; i < plane; ++i)
          os[i] = gamma_[c] * (xs[i] - running_mean_[c]) * inv + beta_[c];
      }
    }
    return out;
  }

  Tensor train_forward(const Tensor& x, LayerCache& cache, Rng&) override {
    Tensor out(x.n, x.c, x.h, x.w);
    const int plane = x.h * x.w;
    const double count = static_cast<double>(x.n) * plane;
    cache.x.n = x.n;
    cache.x.c = x.c;
    cache.x.h = x.h;
    cache.x.w = x.w;
    cache.stats.resize(x.size());     // xhat
    cache.inv_std.assign(x.c, 0.0);
    for (int c = 0; c < x.c; ++c) {
      double mean = 0.0;
      for (int in = 0; in < x.n; ++in) {
        const double* xs = x.sample(in) + static_cast<size_t>(c) * plane;
        for (int i = 0; i < plane; ++i) mean += xs[i];
      }
      mean /= count;
      double var = 0.0;
      for (int in = 0; in < x.n; ++in) {
        const double* xs = x.sample(in) + static_cast<size_t>(c) * plane;
        for (int i = 0; i < plane; ++i) var += (xs[i] - mean) * (xs[i] - mean);
      }
      var /= count;
      const double inv = 1.0 / std::sqrt(var + kEps);
      cache.inv_std[c] = inv;
      running_mean_[c] = (1.0 - kMomentum) * running_mean_[c] + kMomentum * mean;
      running_var_[c] = (1.0 - kMomentum) * running_var_[c] + kMomentum * var;
      for (int in = 0; in < x.n; ++in) {
        const double* xs = x.sample(in) + static_cast<size_t>(c) * plane;
        double* os = out.sample(in) + static_cast<size_t>(c) * plane;
        double* xh = cache.stats.data() + (static_cast<size_t>(in) * x.c + c) * plane;
        for (int i = 0; i < plane; ++i) {
          xh[i] = (xs[i] - mean) * inv;
          os[i] = gamma_[c] * xh[i] + beta_[c];
        }
      }
    }
    return out;
  }

  Tensor backward(const Tensor& gout, const LayerCache& cache) override {
    const int plane = gout.h * gout.w;
    const double count = static_cast<double>(gout.n) * plane;
    Tensor gin(gout.n, gout.c, gout.h, gout.w);
    for (int c = 0; c < gout.c; ++c) {
      double sum_g = 0.0, sum_gx = 0.0;
      for (int in = 0; in < gout.n; ++in) {
        const double* g = gout.sample(in) + static_cast<size_t>(c) * plane;
        const double* xh = cache.stats.data() + (static_cast<size_t>(in) * gout.c + c) * plane;
        for (int i = 0; i < plane; ++i) {
          sum_g += g[i];
          sum_gx += g[i] * xh[i];
        }
      }
      ggrad_[c] += sum_gx;
      bgrad_[c] += sum_g;
      const double inv = cache.inv_std[c];
      for (int in = 0; in < gout.n; ++in) {
        const double* g = gout.sample(in) + static_cast<size_t>(c) * plane;
        const double* xh = cache.stats.data() + (static_cast<size_t>(in) * gout.c + c) * plane;
        double* gi = gin.sample(in) + static_cast<size_t>(c) * plane;
        for (int i = 0; i < plane; ++i)
          gi[i] = gamma_[c] * inv * (g[i] - sum_g / count - xh[i] * sum_gx / count);
      }
    }
    return gin;
  }

  void collect_params(std::vector<ParamRef>& out) override {
    out.push_back({&gamma_, &ggrad_});
    out.push_back({&beta_, &bgrad_});
  }

  void collect_buffers(std::vector<std::vector<double>*>& out) override {
    out.push_back(&running_mean_);
    out.push_back(&running_var_);
  }

  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.1;

 private:
  int channels_;
  std::vector<double> gamma_, beta_, ggrad_, bgrad_;
  std::vector<double> running_mean_, running_var_;
};

class FlattenLayer : public Layer {
 public:
  using Layer::Layer;

  Tensor infer(const Tensor& x) const override {
    Tensor out = x;
    out.c = x.chw();
    out.h = 1;
    out.w = 1;
    return out;
  }

  Tensor train_forward(const Tensor& x, LayerCache& cache, Rng&) override {
    cache.x.n = x.n;
    cache.x.c = x.c;
    cache.x.h = x.h;
    cache.x.w = x.w;
    return infer(x);
  }

  Tensor backward(const Tensor& gout, const LayerCache& cache) override {
    Tensor gin = gout;
    gin.c = cache.x.c;
    gin.h = cache.x.h;
    gin.w = cache.x.w;
    return gin;
  }
};

class DenseLayer : public Layer {
 public:
  DenseLayer(LayerSpec spec, int in_features, Rng& rng)
      : Layer(spec), in_(in_features) {
    weight_.resize(static_cast<size_t>(spec.units) * in_);
    bias_.assign(spec.units, 0.0);
    wgrad_.assign(weight_.size(), 0.0);
    bgrad_.assign(spec.units, 0.0);
    const double std = std::sqrt(2.0 / static_cast<double>(in_));
    for (auto& v : weight_) v = rng.gaussian() * std;
  }

  Tensor infer(const Tensor& x) const override {
    if (x.chw() != in_)
      throw DomainError("dense: expected " + std::to_string(in_) + " inputs, got " +
                        std::to_string(x.chw()));
    Tensor out(x.n, spec_.units, 1, 1);
    for (int in = 0; in < x.n; ++in) {
      const double* xs = x.sample(in);
      double* os = out.sample(in);
      for (int u = 0; u < spec_.units; ++u) {
        const double* wrow = weight_.data() + static_cast<size_t>(u) * in_;
        double acc = bias_[u];
        for (int i = 0; i < in_; ++i) acc += wrow[i] * xs[i];
        os[u] = acc;
      }
    }
    return out;
  }

  Tensor backward(const Tensor& gout, const LayerCache& cache) override {
    const Tensor& x = cache.x;
    Tensor gin(x.n, x.c, x.h, x.w);
    for (int in = 0; in < x.n; ++in) {
      const double* xs = x.sample(in);
      const double* g = gout.sample(in);
      double* gi = gin.sample(in);
      for (int u = 0; u < spec_.units; ++u) {
        const double gu = g[u];
        double* wrow = wgrad_.data() + static_cast<size_t>(u) * in_;
        const double* w = weight_.data() + static_cast<size_t>(u) * in_;
        for (int i = 0; i < in_; ++i) {
          wrow[i] += gu * xs[i];
          gi[i] += gu * w[i];
        }
        bgrad_[u] += gu;
      }
    }
    return gin;
  }

  void collect_params(std::vector<ParamRef>& out) override {
    out.push_back({&weight_, &wgrad_});
    out.push_back({&bias_, &bgrad_});
  }

 private:
  int in_;
  std::vector<double> weight_, bias_, wgrad_, bgrad_;
};

class DropoutLayer : public Layer {
 public:
  using Layer::Layer;

  // Identity at inference; no inference-time randomness.
  Tensor infer(const Tensor& x) const override { return x; }

  Tensor train_forward(const Tensor& x, LayerCache& cache, Rng& rng) override {
    Tensor out = x;
    cache.mask.resize(x.size());
    const double keep = 1.0 - spec_.p;
    for (size_t i = 0; i < x.size(); ++i) {
      const bool kept = rng.uniform() >= spec_.p;
      cache.mask[i] = kept;
      out.data[i] = kept ? x.data[i] / keep : 0.0;
    }
    return out;
  }

  Tensor backward(const Tensor& gout, const LayerCache& cache) override {
    Tensor gin = gout;
    const double keep = 1.0 - spec_.p;
    for (size_t i = 0; i < gout.size(); ++i)
      gin.data[i] = cache.mask[i] ? gout.data[i] / keep : 0.0;
    return gin;
  }
};

// Mean softmax cross-entropy over the batch; grad is d(loss)/d(logits).
struct LossResult {
  double loss = 0.0;
  Tensor grad;
};

inline LossResult softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  if (static_cast<int>(labels.size()) != logits.n)
    throw DomainError("softmax_cross_entropy: label/batch mismatch");
  const int classes = logits.chw();
  LossResult result;
  result.grad = Tensor(logits.n, logits.c, logits.h, logits.w);
  for (int in = 0; in < logits.n; ++in) {
    const double* z = logits.sample(in);
    double zmax = z[0];
    for (int c = 1; c < classes; ++c) zmax = std::max(zmax, z[c]);
    double denom = 0.0;
    for (int c = 0; c < classes; ++c) denom += std::exp(z[c] - zmax);
    const double logz = zmax + std::log(denom);
    result.loss += logz - z[labels[in]];
    double* g = result.grad.sample(in);
    for (int c = 0; c < classes; ++c) {
      const double p = std::exp(z[c] - logz);
      g[c] = (p - (c == labels[in] ? 1.0 : 0.0)) / logits.n;
    }
  }
  result.loss /= logits.n;
  return result;
}

class Model {
 public:
  Model(LcnnSpec spec, uint64_t init_seed) : spec_(std::move(spec)) {
    spec_.output_shape();  // validates
    Rng rng(init_seed);
    Shape3 s{1, spec_.input_rows, spec_.input_cols};
    for (const auto& l : spec_.layers) {
      switch (l.kind) {
        case LayerSpec::Kind::conv:
          layers_.push_back(std::make_unique<ConvLayer>(l, s.c, rng));
          break;
        case LayerSpec::Kind::mfm:
          layers_.push_back(std::make_unique<MfmLayer>(l));
          break;
        case LayerSpec::Kind::max_pool:
          layers_.push_back(std::make_unique<MaxPoolLayer>(l));
          break;
        case LayerSpec::Kind::batch_norm:
          layers_.push_back(std::make_unique<BatchNormLayer>(l, s.c));
          break;
        case LayerSpec::Kind::flatten:
          layers_.push_back(std::make_unique<FlattenLayer>(l));
          break;
        case LayerSpec::Kind::dense:
          layers_.push_back(std::make_unique<DenseLayer>(l, s.c * s.h * s.w, rng));
          break;
        case LayerSpec::Kind::dropout:
          layers_.push_back(std::make_unique<DropoutLayer>(l));
          break;
      }
      s = advance_shape(s, l);
    }
  }

  const LcnnSpec& spec() const { return spec_; }
  size_t num_layers() const { return layers_.size(); }

  // Forward pass with no side effects; safe for concurrent use.
  Tensor infer(const Tensor& x) const {
    check_input(x);
    Tensor cur = x;
    for (const auto& layer : layers_) cur = layer->infer(cur);
    return cur;
  }

  // Score = logit(bonafide) - logit(spoof); higher means more bonafide-like.
  double score(const FeatureMatrix& f) const {
    Tensor logits = infer(to_tensor(f));
    return logits.data[kLabelBonafide] - logits.data[kLabelSpoof];
  }

  Tensor train_forward(const Tensor& x, std::vector<LayerCache>& caches, Rng& rng) {
    check_input(x);
    caches.resize(layers_.size());
    Tensor cur = x;
    for (size_t i = 0; i < layers_.size(); ++i)
      cur = layers_[i]->train_forward(cur, caches[i], rng);
    return cur;
  }

  void backward(const Tensor& grad_logits, std::vector<LayerCache>& caches) {
    Tensor g = grad_logits;
    for (size_t i = layers_.size(); i-- > 0;) g = layers_[i]->backward(g, caches[i]);
  }

  std::vector<ParamRef> params() {
    std::vector<ParamRef> refs;
    for (auto& l : layers_) l->collect_params(refs);
    return refs;
  }

  std::vector<std::vector<double>*> buffers() {
    std::vector<std::vector<double>*> refs;
    for (auto& l : layers_) l->collect_buffers(refs);
    return refs;
  }

  void zero_grads() {
    for (auto& p : params()) std::fill(p.grad->begin(), p.grad->end(), 0.0);
  }

  static Tensor to_tensor(const FeatureMatrix& f) {
    Tensor t(1, 1, f.rows, f.cols);
    t.data = f.values;
    return t;
  }

  // --- checkpoints: "LCNN" magic, version, spec text, shapes, then all
  // parameter and buffer arrays as float32 in declaration order. ---

  void save(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open for writing: " + path.string());
    const char magic[4] = {'L', 'C', 'N', 'N'};
    out.write(magic, 4);
    const uint32_t version = 1;
    out.write(reinterpret_cast<const char*>(&version), 4);
    const std::string arch = spec_.to_string();
    const uint32_t arch_len = static_cast<uint32_t>(arch.size());
    out.write(reinterpret_cast<const char*>(&arch_len), 4);
    out.write(arch.data(), arch_len);
    const uint32_t shape[2] = {static_cast<uint32_t>(spec_.input_rows),
                               static_cast<uint32_t>(spec_.input_cols)};
    out.write(reinterpret_cast<const char*>(shape), sizeof(shape));
    auto arrays = all_arrays();
    const uint32_t count = static_cast<uint32_t>(arrays.size());
    out.write(reinterpret_cast<const char*>(&count), 4);
    for (auto* arr : arrays) {
      const uint32_t len = static_cast<uint32_t>(arr->size());
      out.write(reinterpret_cast<const char*>(&len), 4);
      std::vector<float> f32(arr->begin(), arr->end());
      out.write(reinterpret_cast<const char*>(f32.data()),
                static_cast<std::streamsize>(f32.size() * sizeof(float)));
    }
    if (!out) throw FormatError("short write: " + path.string());
  }

  static Model load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open checkpoint: " + path.string());
    char magic[4];
    uint32_t version = 0;
    if (!in.read(magic, 4) || std::string(magic, 4) != "LCNN")
      throw FormatError(path.string() + ": not a model checkpoint");
    in.read(reinterpret_cast<char*>(&version), 4);
    if (version != 1)
      throw FormatError(path.string() + ": unsupported checkpoint version " +
                        std::to_string(version));
    uint32_t arch_len = 0;
    in.read(reinterpret_cast<char*>(&arch_len), 4);
    std::string arch(arch_len, '\0');
    in.read(arch.data(), arch_len);
    uint32_t shape[2];
    in.read(reinterpret_cast<char*>(shape), sizeof(shape));
    Model model(LcnnSpec::parse(arch, static_cast<int>(shape[0]), static_cast<int>(shape[1])), 0);
    uint32_t count = 0;
    in.read(reinterpret_cast<char*>(&count), 4);
    auto arrays = model.all_arrays();
    if (count != arrays.size())
      throw FormatError(path.string() + ": checkpoint has " + std::to_string(count) +
                        " arrays, model expects " + std::to_string(arrays.size()));
    for (auto* arr : arrays) {
      uint32_t len = 0;
      in.read(reinterpret_cast<char*>(&len), 4);
      if (len != arr->size())
        throw FormatError(path.string() + ": array size mismatch");
      std::vector<float> f32(len);
      in.read(reinterpret_cast<char*>(f32.data()),
              static_cast<std::streamsize>(f32.size() * sizeof(float)));
      for (size_t i = 0; i < len; ++i) (*arr)[i] = static_cast<double>(f32[i]);
    }
    if (!in) throw FormatError(path.string() + ": truncated checkpoint");
    return model;
  }

  // Weight snapshot, used to keep the best-dev-EER epoch during training.
  std::vector<std::vector<double>> snapshot() {
    std::vector<std::vector<double>> snap;
    for (auto* arr : all_arrays()) snap.push_back(*arr);
    return snap;
  }

  void restore(const std::vector<std::vector<double>>& snap) {
    auto arrays = all_arrays();
    if (snap.size() != arrays.size()) throw DomainError("restore: snapshot mismatch");
    for (size_t i = 0; i < arrays.size(); ++i) *arrays[i] = snap[i];
  }

 private:
  static Shape3 advance_shape(Shape3 s, const LayerSpec& l) {
    switch (l.kind) {
      case LayerSpec::Kind::conv: {
        const int pad = l.kernel / 2;
        return {l.out_channels, (s.h + 2 * pad - l.kernel) / l.stride + 1,
                (s.w + 2 * pad - l.kernel) / l.stride + 1};
      }
      case LayerSpec::Kind::mfm: return {s.c / 2, s.h, s.w};
      case LayerSpec::Kind::max_pool: return {s.c, s.h / l.pool, s.w / l.pool};
      case LayerSpec::Kind::flatten: return {s.c * s.h * s.w, 1, 1};
      case LayerSpec::Kind::dense: return {l.units, 1, 1};
      default: return s;
    }
  }

  void check_input(const Tensor& x) const {
    if (x.c != 1 || x.h != spec_.input_rows || x.w != spec_.input_cols)
      throw DomainError("model: input " + x.shape_str() + " does not match spec (1," +
                        std::to_string(spec_.input_rows) + "," + std::to_string(spec_.input_cols) +
                        ")");
  }

  std::vector<std::vector<double>*> all_arrays() {
    std::vector<std::vector<double>*> arrays;
    for (auto& p : params()) arrays.push_back(p.value);
    for (auto* b : buffers()) arrays.push_back(b);
    return arrays;
  }

  LcnnSpec spec_;
  std::vector<std::unique_ptr<Layer>> layers_;
};

}  // namespace dasc
