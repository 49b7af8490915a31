// Copyright (C) 2026 The difftext authors
// SPDX-License-Identifier: Apache-2.0

#include "difftext/nn.hpp"

#include <cmath>

#include "difftext/errors.hpp"

namespace difftext::nn {

void AdamW::step(const ParamRefs& params) {
    ++step_count;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
    for (Param* p : params) {
        if (p->m.size() == 0) {
            p->m = Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols());
            p->v = Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols());
        }
        p->m = beta1 * p->m + (1.0 - beta1) * p->grad;
        p->v = beta2 * p->v + (1.0 - beta2) * p->grad.cwiseProduct(p->grad);
        const Eigen::MatrixXd mhat = p->m / bc1;
        const Eigen::MatrixXd vhat = p->v / bc2;
        p->value -= lr * (mhat.array() / (vhat.array().sqrt() + eps)).matrix();
        if (weight_decay != 0.0) p->value -= lr * weight_decay * p->value;
    }
}

// ----------------------------------------------------------------- Conv2d --

void Conv2d::init(const std::string& name, int in_channels, int out_channels, int k, int s, int p,
                  Rng& rng, double scale_mult) {
    in_ch = in_channels;
    out_ch = out_channels;
    ksize = k;
    stride = s;
    pad = p;
    const double scale = scale_mult * std::sqrt(2.0 / (in_ch * ksize * ksize));
    weight.init_normal(name + ".weight", out_ch, static_cast<Eigen::Index>(in_ch) * ksize * ksize,
                       scale, rng);
    bias.init_zero(name + ".bias", out_ch, 1);
}

FeatureMap Conv2d::forward(const FeatureMap& x) {
    if (x.channels() != in_ch) {
        throw ShapeError("Conv2d " + weight.name + ": expected " + std::to_string(in_ch) +
                         " channels, got " + std::to_string(x.channels()));
    }
    m_in_h = x.height;
    m_in_w = x.width;
    m_out_h = (x.height + 2 * pad - ksize) / stride + 1;
    m_out_w = (x.width + 2 * pad - ksize) / stride + 1;

    m_cols.resize(static_cast<Eigen::Index>(in_ch) * ksize * ksize,
                  static_cast<Eigen::Index>(m_out_h) * m_out_w);
    m_cols.setZero();
    for (int c = 0; c < in_ch; ++c) {
        for (int ky = 0; ky < ksize; ++ky) {
            for (int kx = 0; kx < ksize; ++kx) {
                const Eigen::Index row = (static_cast<Eigen::Index>(c) * ksize + ky) * ksize + kx;
                for (int oy = 0; oy < m_out_h; ++oy) {
                    const int iy = oy * stride + ky - pad;
                    if (iy < 0 || iy >= m_in_h) continue;
                    for (int ox = 0; ox < m_out_w; ++ox) {
                        const int ix = ox * stride + kx - pad;
                        if (ix < 0 || ix >= m_in_w) continue;
                        m_cols(row, static_cast<Eigen::Index>(oy) * m_out_w + ox) =
                            x.data(c, static_cast<Eigen::Index>(iy) * m_in_w + ix);
                    }
                }
            }
        }
    }

    FeatureMap y(out_ch, m_out_h, m_out_w);
    y.data.noalias() = weight.value * m_cols;
    y.data.colwise() += bias.value.col(0);
    return y;
}

FeatureMap Conv2d::backward(const FeatureMap& gy) {
    weight.grad.noalias() += gy.data * m_cols.transpose();
    bias.grad.col(0) += gy.data.rowwise().sum();

    const Eigen::MatrixXd gcols = weight.value.transpose() * gy.data;
    FeatureMap gx(in_ch, m_in_h, m_in_w);
    for (int c = 0; c < in_ch; ++c) {
        for (int ky = 0; ky < ksize; ++ky) {
            for (int kx = 0; kx < ksize; ++kx) {
                const Eigen::Index row = (static_cast<Eigen::Index>(c) * ksize + ky) * ksize + kx;
                for (int oy = 0; oy < m_out_h; ++oy) {
                    const int iy = oy * stride + ky - pad;
                    if (iy < 0 || iy >= m_in_h) continue;
                    for (int ox = 0; ox < m_out_w; ++ox) {
                        const int ix = ox * stride + kx - pad;
                        if (ix < 0 || ix >= m_in_w) continue;
                        gx.data(c, static_cast<Eigen::Index>(iy) * m_in_w + ix) +=
                            gcols(row, static_cast<Eigen::Index>(oy) * m_out_w + ox);
                    }
                }
            }
        }
    }
    return gx;
}

// ----------------------------------------------------------------- Linear --

void Linear::init(const std::string& name, int in_dim, int out_dim, Rng& rng, double scale_mult) {
    const double scale = scale_mult * std::sqrt(2.0 / in_dim);
    weight.init_normal(name + ".weight", out_dim, in_dim, scale, rng);
    bias.init_zero(name + ".bias", out_dim, 1);
}

Eigen::MatrixXd Linear::forward(const Eigen::MatrixXd& x) {
    m_x = x;
    Eigen::MatrixXd y = weight.value * x;
    y.colwise() += bias.value.col(0);
    return y;
}

Eigen::MatrixXd Linear::backward(const Eigen::MatrixXd& gy) {
    weight.grad.noalias() += gy * m_x.transpose();
    bias.grad.col(0) += gy.rowwise().sum();
    return weight.value.transpose() * gy;
}

// ------------------------------------------------------------------- Silu --

Eigen::MatrixXd Silu::forward(const Eigen::MatrixXd& x) {
    m_x = x;
    return (x.array() / (1.0 + (-x.array()).exp())).matrix();
}

Eigen::MatrixXd Silu::backward(const Eigen::MatrixXd& gy) const {
    const Eigen::ArrayXXd sig = 1.0 / (1.0 + (-m_x.array()).exp());
    return (gy.array() * sig * (1.0 + m_x.array() * (1.0 - sig))).matrix();
}

// -------------------------------------------------------------- LayerNorm --

void LayerNorm::init(const std::string& name, int dim) {
    gamma.init_zero(name + ".gamma", dim, 1);
    gamma.value.setOnes();
    beta.init_zero(name + ".beta", dim, 1);
}

Eigen::MatrixXd LayerNorm::forward(const Eigen::MatrixXd& x) {
    const Eigen::Index dim = x.rows();
    const Eigen::RowVectorXd mean = x.colwise().mean();
    Eigen::MatrixXd centered = x.rowwise() - mean;
    const Eigen::ArrayXd var = centered.array().square().colwise().sum() / static_cast<double>(dim);
    m_inv_std = (var + eps).rsqrt();
    m_xhat = centered.array().rowwise() * m_inv_std.transpose();
    Eigen::MatrixXd y = m_xhat.array().colwise() * gamma.value.col(0).array();
    y.colwise() += beta.value.col(0);
    return y;
}

Eigen::MatrixXd LayerNorm::backward(const Eigen::MatrixXd& gy) {
    const double dim = static_cast<double>(gy.rows());
    gamma.grad.col(0) += (gy.array() * m_xhat.array()).rowwise().sum().matrix();
    beta.grad.col(0) += gy.rowwise().sum();

    const Eigen::MatrixXd gxhat = gy.array().colwise() * gamma.value.col(0).array();
    const Eigen::RowVectorXd mean_g = gxhat.colwise().sum() / dim;
    const Eigen::RowVectorXd mean_gx = (gxhat.array() * m_xhat.array()).colwise().sum() / dim;
    Eigen::MatrixXd gx = gxhat;
    gx.rowwise() -= mean_g;
    gx -= (m_xhat.array().rowwise() * mean_gx.array()).matrix();
    gx = gx.array().rowwise() * m_inv_std.transpose();
    return gx;
}

// -------------------------------------------------------------- Attention --

void Attention::init(const std::string& name, int d, int d_ctx, int d_head, Rng& rng) {
    dim = d;
    ctx_dim = d_ctx;
    head_dim = d_head;
    norm.init(name + ".norm", d);
    const double sq = std::sqrt(1.0 / d);
    const double sc = std::sqrt(1.0 / d_ctx);
    wq.init_normal(name + ".wq", d_head, d, sq, rng);
    wk.init_normal(name + ".wk", d_head, d_ctx, sc, rng);
    wv.init_normal(name + ".wv", d_head, d_ctx, sc, rng);
    wo.init_normal(name + ".wo", d, d_head, std::sqrt(1.0 / d_head), rng);
}

void Attention::collect(ParamRefs& out) {
    norm.collect(out);
    out.push_back(&wq);
    out.push_back(&wk);
    out.push_back(&wv);
    out.push_back(&wo);
}

Eigen::MatrixXd Attention::forward(const Eigen::MatrixXd& x, const Eigen::MatrixXd& ctx) {
    if (x.rows() != dim || ctx.rows() != ctx_dim) {
        throw ShapeError("Attention " + wq.name + ": bad input dims");
    }
    m_x = x;
    m_ctx = ctx;
    m_xn = norm.forward(x);
    m_q.noalias() = wq.value * m_xn;   // dh x N
    m_k.noalias() = wk.value * ctx;    // dh x L
    m_v.noalias() = wv.value * ctx;    // dh x L

    Eigen::MatrixXd scores = m_q.transpose() * m_k / std::sqrt(static_cast<double>(head_dim));
    // Row-wise softmax, shifted for stability.
    m_attn = scores;
    for (Eigen::Index r = 0; r < m_attn.rows(); ++r) {
        const double mx = m_attn.row(r).maxCoeff();
        m_attn.row(r) = (m_attn.row(r).array() - mx).exp();
        m_attn.row(r) /= m_attn.row(r).sum();
    }
    m_h.noalias() = m_v * m_attn.transpose();  // dh x N
    return m_x + wo.value * m_h;
}

Eigen::MatrixXd Attention::backward(const Eigen::MatrixXd& gy, Eigen::MatrixXd& gctx) {
    wo.grad.noalias() += gy * m_h.transpose();
    const Eigen::MatrixXd gh = wo.value.transpose() * gy;  // dh x N

    const Eigen::MatrixXd gv = gh * m_attn;                // dh x L
    Eigen::MatrixXd gattn = gh.transpose() * m_v;          // N x L
    Eigen::MatrixXd gscores(gattn.rows(), gattn.cols());
    for (Eigen::Index r = 0; r < gattn.rows(); ++r) {
        const double dot = gattn.row(r).dot(m_attn.row(r));
        gscores.row(r) = m_attn.row(r).array() * (gattn.row(r).array() - dot);
    }
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
    const Eigen::MatrixXd gq = m_k * gscores.transpose() * inv_scale;  // dh x N
    const Eigen::MatrixXd gk = m_q * gscores * inv_scale;              // dh x L

    wq.grad.noalias() += gq * m_xn.transpose();
    wk.grad.noalias() += gk * m_ctx.transpose();
    wv.grad.noalias() += gv * m_ctx.transpose();
    if (gctx.size() == 0) gctx = Eigen::MatrixXd::Zero(m_ctx.rows(), m_ctx.cols());
    gctx.noalias() += wk.value.transpose() * gk + wv.value.transpose() * gv;

    const Eigen::MatrixXd gxn = wq.value.transpose() * gq;
    return gy + norm.backward(gxn);
}

// -------------------------------------------------------------- Embedding --

void Embedding::init(const std::string& name, int vocab, int dim, Rng& rng) {
    table.init_normal(name + ".table", vocab, dim, 0.1, rng);
}

Eigen::MatrixXd Embedding::forward(const std::vector<int>& tokens) {
    m_tokens = tokens;
    Eigen::MatrixXd out(table.value.cols(), static_cast<Eigen::Index>(tokens.size()));
    for (size_t i = 0; i < tokens.size(); ++i) {
        const int id = tokens[i];
        if (id < 0 || id >= table.value.rows()) {
            throw VocabularyError("embedding id " + std::to_string(id) + " out of vocabulary");
        }
        out.col(static_cast<Eigen::Index>(i)) = table.value.row(id).transpose();
    }
    return out;
}

void Embedding::backward(const Eigen::MatrixXd& gy) {
    for (size_t i = 0; i < m_tokens.size(); ++i) {
        table.grad.row(m_tokens[i]) += gy.col(static_cast<Eigen::Index>(i)).transpose();
    }
}

// ------------------------------------------------------------- Upsample2x --

FeatureMap Upsample2x::forward(const FeatureMap& x) {
    m_h = x.height;
    m_w = x.width;
    FeatureMap y(x.channels(), x.height * 2, x.width * 2);
    for (int yy = 0; yy < y.height; ++yy) {
        for (int xx = 0; xx < y.width; ++xx) {
            y.data.col(static_cast<Eigen::Index>(yy) * y.width + xx) =
                x.data.col(static_cast<Eigen::Index>(yy / 2) * x.width + xx / 2);
        }
    }
    return y;
}

FeatureMap Upsample2x::backward(const FeatureMap& gy) const {
    FeatureMap gx(gy.channels(), m_h, m_w);
    for (int yy = 0; yy < gy.height; ++yy) {
        for (int xx = 0; xx < gy.width; ++xx) {
            gx.data.col(static_cast<Eigen::Index>(yy / 2) * m_w + xx / 2) +=
                gy.data.col(static_cast<Eigen::Index>(yy) * gy.width + xx);
        }
    }
    return gx;
}

// ---------------------------------------------------------------- helpers --

Eigen::VectorXd timestep_embedding(int t, int dim) {
    const int half = dim / 2;
    Eigen::VectorXd out = Eigen::VectorXd::Zero(dim);
    for (int i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(10000.0) * i / std::max(1, half));
        out(i) = std::sin(t * freq);
        out(half + i) = std::cos(t * freq);
    }
    if (dim % 2 == 1) out(dim - 1) = std::cos(static_cast<double>(t));
    return out;
}

FeatureMap concat_channels(const FeatureMap& a, const FeatureMap& b) {
    if (a.height != b.height || a.width != b.width) {
        throw ShapeError("concat_channels: spatial dims differ");
    }
    FeatureMap out(a.channels() + b.channels(), a.height, a.width);
    out.data.topRows(a.channels()) = a.data;
    out.data.bottomRows(b.channels()) = b.data;
    return out;
}

void split_channels(const FeatureMap& g, int top_channels, FeatureMap& ga, FeatureMap& gb) {
    ga = FeatureMap(top_channels, g.height, g.width);
    gb = FeatureMap(g.channels() - top_channels, g.height, g.width);
    ga.data = g.data.topRows(top_channels);
    gb.data = g.data.bottomRows(g.channels() - top_channels);
}

double max_grad_rel_error(const ParamRefs& params, const std::function<double()>& loss_fn,
                          double h) {
    double worst = 0.0;
    for (Param* p : params) {
        for (Eigen::Index r = 0; r < p->value.rows(); ++r) {
            for (Eigen::Index c = 0; c < p->value.cols(); ++c) {
                const double saved = p->value(r, c);
                p->value(r, c) = saved + h;
                const double lp = loss_fn();
                p->value(r, c) = saved - h;
                const double lm = loss_fn();
                p->value(r, c) = saved;
                const double fd = (lp - lm) / (2.0 * h);
                const double an = p->grad(r, c);
                const double denom = std::max({1e-6, std::abs(fd), std::abs(an)});
                worst = std::max(worst, std::abs(fd - an) / denom);
            }
        }
    }
    return worst;
}

}  // namespace difftext::nn
