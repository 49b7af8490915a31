// Copyright (C) 2026 The difftext authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "difftext/rng.hpp"
#include "difftext/tensor.hpp"

namespace difftext::nn {

struct Param {
    std::string name;
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;
    Eigen::MatrixXd m;  // Adam first moment
    Eigen::MatrixXd v;  // Adam second moment

    void init_zero(const std::string& n, Eigen::Index rows, Eigen::Index cols) {
        name = n;
        value = Eigen::MatrixXd::Zero(rows, cols);
        grad = Eigen::MatrixXd::Zero(rows, cols);
    }

    void init_normal(const std::string& n, Eigen::Index rows, Eigen::Index cols, double scale,
                     Rng& rng) {
        init_zero(n, rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r) {
            for (Eigen::Index c = 0; c < cols; ++c) value(r, c) = scale * rng.normal();
        }
    }
};

using ParamRefs = std::vector<Param*>;

struct AdamW {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
    long step_count = 0;

    void zero_grad(const ParamRefs& params) {
        for (Param* p : params) p->grad.setZero();
    }

    void step(const ParamRefs& params);
};

// ---------------------------------------------------------------------------
// Layers. Each caches its last forward inputs; backward must follow the
// matching forward (per-sample gradient accumulation).
// ---------------------------------------------------------------------------

struct Conv2d {
    int in_ch = 0, out_ch = 0, ksize = 3, stride = 1, pad = 1;
    Param weight;  // out_ch x (in_ch * k * k)
    Param bias;    // out_ch x 1

    void init(const std::string& name, int in_channels, int out_channels, int k, int s, int p,
              Rng& rng, double scale_mult = 1.0);
    FeatureMap forward(const FeatureMap& x);
    FeatureMap backward(const FeatureMap& gy);
    void collect(ParamRefs& out) {
        out.push_back(&weight);
        out.push_back(&bias);
    }

private:
    Eigen::MatrixXd m_cols;
    int m_in_h = 0, m_in_w = 0, m_out_h = 0, m_out_w = 0;
};

struct Linear {
    Param weight;  // out x in
    Param bias;    // out x 1

    void init(const std::string& name, int in_dim, int out_dim, Rng& rng, double scale_mult = 1.0);
    Eigen::MatrixXd forward(const Eigen::MatrixXd& x);   // x: in x n
    Eigen::MatrixXd backward(const Eigen::MatrixXd& gy);
    void collect(ParamRefs& out) {
        out.push_back(&weight);
        out.push_back(&bias);
    }

private:
    Eigen::MatrixXd m_x;
};

struct Silu {
    Eigen::MatrixXd forward(const Eigen::MatrixXd& x);
    Eigen::MatrixXd backward(const Eigen::MatrixXd& gy) const;
    FeatureMap forward(const FeatureMap& x) {
        FeatureMap y = x;
        y.data = forward(x.data);
        return y;
    }
    FeatureMap backward(const FeatureMap& gy) const {
        FeatureMap gx = gy;
        gx.data = backward(gy.data);
        return gx;
    }

private:
    Eigen::MatrixXd m_x;
};

struct TanhLayer {
    Eigen::MatrixXd forward(const Eigen::MatrixXd& x) {
        m_y = x.array().tanh().matrix();
        return m_y;
    }
    Eigen::MatrixXd backward(const Eigen::MatrixXd& gy) const {
        return (gy.array() * (1.0 - m_y.array().square())).matrix();
    }

private:
    Eigen::MatrixXd m_y;
};

// Normalizes each column (feature vector) to zero mean / unit variance.
struct LayerNorm {
    Param gamma;  // dim x 1
    Param beta;   // dim x 1
    double eps = 1e-5;

    void init(const std::string& name, int dim);
    Eigen::MatrixXd forward(const Eigen::MatrixXd& x);
    Eigen::MatrixXd backward(const Eigen::MatrixXd& gy);
    void collect(ParamRefs& out) {
        out.push_back(&gamma);
        out.push_back(&beta);
    }

private:
    Eigen::MatrixXd m_xhat;
    Eigen::ArrayXd m_inv_std;
};

// Single-head scaled dot-product attention with pre-norm and residual:
//   y = x + Wo * softmax((Wq LN(x))^T (Wk ctx) / sqrt(dh)) applied to (Wv ctx).
// backward() returns grad wrt x and accumulates grad wrt ctx, so conditioning
// gradients can flow into a separately owned context encoder.
struct Attention {
    int dim = 0, ctx_dim = 0, head_dim = 0;
    LayerNorm norm;
    Param wq, wk, wv, wo;

    void init(const std::string& name, int d, int d_ctx, int d_head, Rng& rng);
    Eigen::MatrixXd forward(const Eigen::MatrixXd& x, const Eigen::MatrixXd& ctx);
    Eigen::MatrixXd backward(const Eigen::MatrixXd& gy, Eigen::MatrixXd& gctx);
    void collect(ParamRefs& out);

private:
    Eigen::MatrixXd m_x, m_xn, m_ctx, m_q, m_k, m_v, m_attn, m_h;
};

struct Embedding {
    Param table;  // vocab x dim

    void init(const std::string& name, int vocab, int dim, Rng& rng);
    Eigen::MatrixXd forward(const std::vector<int>& tokens);  // dim x L
    void backward(const Eigen::MatrixXd& gy);
    void collect(ParamRefs& out) { out.push_back(&table); }

private:
    std::vector<int> m_tokens;
};

struct Upsample2x {
    FeatureMap forward(const FeatureMap& x);
    FeatureMap backward(const FeatureMap& gy) const;

private:
    int m_h = 0, m_w = 0;
};

// Sinusoidal position code: [sin(t w_0), ..., cos(t w_0), ...], values in [-1, 1].
Eigen::VectorXd timestep_embedding(int t, int dim);

FeatureMap concat_channels(const FeatureMap& a, const FeatureMap& b);
void split_channels(const FeatureMap& g, int top_channels, FeatureMap& ga, FeatureMap& gb);

// Max relative mismatch between analytic gradients and central finite
// differences of `loss_fn`. Gradients must already be accumulated.
double max_grad_rel_error(const ParamRefs& params, const std::function<double()>& loss_fn,
                          double h = 1e-5);

}  // namespace difftext::nn
