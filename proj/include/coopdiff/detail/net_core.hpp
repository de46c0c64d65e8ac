#ifndef COOPDIFF_DETAIL_NET_CORE_HPP
#define COOPDIFF_DETAIL_NET_CORE_HPP

// Forward/backward for the conv-dense denoiser, templated on the scalar so
// the float training path and the double gradient-verification path share one
// implementation.

#include <cmath>
#include <cstring>
#include <vector>

#include <Eigen/Dense>

#include "coopdiff/denoiser.hpp"

namespace coopdiff::detail {

struct tensor_entry {
    size_t offset = 0;
    size_t size = 0;
    size_t fan_in = 0;
    enum class init_rule { fan_in_uniform, embedding, zero } rule = init_rule::fan_in_uniform;
};

// Fixed parameter order; offsets derived from the config alone so checkpoints
// are plain weight blobs.
struct param_layout {
    tensor_entry stem_w, stem_b;
    tensor_entry cond_table;
    tensor_entry tc_w, tc_b;
    tensor_entry in_w, in_b;
    struct block_entry {
        tensor_entry w1, b1, w2, b2;
    };
    std::vector<block_entry> blocks;
    tensor_entry out_w, out_b;
    tensor_entry head_w, head_b;
    size_t total = 0;

    explicit param_layout(const denoiser_config& cfg) {
        const int cin = cfg.input_shape.channels;
        const int cs = cfg.stem_channels;
        const int h = cfg.hidden;
        const int n0 = cfg.core_width();
        const int e_in = cfg.t_embed_dim + cfg.c_embed_dim;
        size_t at = 0;
        auto add = [&](size_t size, size_t fan_in,
                       tensor_entry::init_rule rule = tensor_entry::init_rule::fan_in_uniform) {
            tensor_entry e{at, size, fan_in, rule};
            at += size;
            return e;
        };
        stem_w = add(size_t(cs) * cin * 9, size_t(cin) * 9);
        stem_b = add(cs, 1, tensor_entry::init_rule::zero);
        cond_table = add(size_t(cfg.cond_vocab + 1) * cfg.c_embed_dim, 1,
                         tensor_entry::init_rule::embedding);
        tc_w = add(size_t(h) * e_in, e_in);
        tc_b = add(h, 1, tensor_entry::init_rule::zero);
        in_w = add(size_t(h) * n0, n0);
        in_b = add(h, 1, tensor_entry::init_rule::zero);
        blocks.resize(cfg.depth);
        for (auto& b : blocks) {
            b.w1 = add(size_t(h) * h, h);
            b.b1 = add(h, 1, tensor_entry::init_rule::zero);
            // Residual branches start at identity.
            b.w2 = add(size_t(h) * h, h, tensor_entry::init_rule::zero);
            b.b2 = add(h, 1, tensor_entry::init_rule::zero);
        }
        out_w = add(size_t(n0) * h, h);
        out_b = add(n0, 1, tensor_entry::init_rule::zero);
        head_w = add(size_t(cin) * cs * 9, size_t(cs) * 9);
        head_b = add(cs > 0 ? size_t(cin) : 0, 1, tensor_entry::init_rule::zero);
        total = at;
    }

    std::vector<tensor_entry> entries() const {
        std::vector<tensor_entry> out{stem_w, stem_b, cond_table, tc_w, tc_b, in_w, in_b};
        for (const auto& b : blocks) {
            out.push_back(b.w1);
            out.push_back(b.b1);
            out.push_back(b.w2);
            out.push_back(b.b2);
        }
        out.push_back(out_w);
        out.push_back(out_b);
        out.push_back(head_w);
        out.push_back(head_b);
        return out;
    }
};

template <class S>
using mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using mat_map = Eigen::Map<mat<S>>;
template <class S>
using cmat_map = Eigen::Map<const mat<S>>;
template <class S>
using row_map = Eigen::Map<Eigen::Matrix<S, 1, Eigen::Dynamic>>;
template <class S>
using crow_map = Eigen::Map<const Eigen::Matrix<S, 1, Eigen::Dynamic>>;

template <class S>
inline S sigmoid(S x) {
    return S(1) / (S(1) + std::exp(-x));
}

template <class S>
inline S silu(S x) {
    return x * sigmoid(x);
}

template <class S>
inline S silu_grad(S x) {
    S s = sigmoid(x);
    return s * (S(1) + x * (S(1) - s));
}

// Sinusoidal timestep features, sin/cos pairs over a geometric frequency
// ladder. dim must be even.
template <class S>
inline void sinusoidal_embed(int t, int dim, S* out) {
    const int half = dim / 2;
    for (int i = 0; i < half; ++i) {
        double freq = std::exp(-std::log(10000.0) * double(i) / double(half));
        double angle = double(t) * freq;
        out[2 * i] = S(std::sin(angle));
        out[2 * i + 1] = S(std::cos(angle));
    }
}

// One training/inference minibatch in network precision.
template <class S>
struct net_batch {
    int batch = 0;
    std::vector<S> x;        // [B][Cin*H*W]
    std::vector<int> t;      // [B]
    std::vector<int> cond;   // [B], null slot allowed
};

// Activations kept for the backward pass.
template <class S>
struct net_activations {
    int batch = 0;
    std::vector<S> stem_pre;  // [B][n0]
    std::vector<S> u;         // [B][n0]
    std::vector<S> tc;        // [B][Et+Ec]
    std::vector<S> e_pre;     // [B][H]
    std::vector<S> e;         // [B][H]
    std::vector<S> h;         // [D+1][B][H]
    std::vector<S> a_pre;     // [D][B][H]
    std::vector<S> a;         // [D][B][H]
    std::vector<S> g;         // [B][H]
    std::vector<S> v;         // [B][n0]
    std::vector<S> out;       // [B][Cin*H*W]
};

template <class S>
void net_forward(const denoiser_config& cfg, const param_layout& lay, const S* w,
                 const net_batch<S>& in, net_activations<S>& act) {
    const int B = in.batch;
    const int cin = cfg.input_shape.channels;
    const int ih = cfg.input_shape.height;
    const int iw = cfg.input_shape.width;
    const int oh = ih / 2, ow = iw / 2;
    const int cs = cfg.stem_channels;
    const int n0 = cfg.core_width();
    const int hdim = cfg.hidden;
    const int et = cfg.t_embed_dim, ec = cfg.c_embed_dim;
    const int e_in = et + ec;
    const int npix = cin * ih * iw;

    act.batch = B;
    act.stem_pre.assign(size_t(B) * n0, S(0));
    act.u.assign(size_t(B) * n0, S(0));
    act.tc.assign(size_t(B) * e_in, S(0));
    act.e_pre.assign(size_t(B) * hdim, S(0));
    act.e.assign(size_t(B) * hdim, S(0));
    act.h.assign(size_t(cfg.depth + 1) * B * hdim, S(0));
    act.a_pre.assign(size_t(cfg.depth) * B * hdim, S(0));
    act.a.assign(size_t(cfg.depth) * B * hdim, S(0));
    act.g.assign(size_t(B) * hdim, S(0));
    act.v.assign(size_t(B) * n0, S(0));
    act.out.assign(size_t(B) * npix, S(0));

    // Stem: 3x3 conv, stride 2, pad 1, then SiLU.
    const S* stem_w = w + lay.stem_w.offset;
    const S* stem_b = w + lay.stem_b.offset;
    for (int b = 0; b < B; ++b) {
        const S* img = in.x.data() + size_t(b) * npix;
        S* pre = act.stem_pre.data() + size_t(b) * n0;
        for (int co = 0; co < cs; ++co) {
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    S acc = stem_b[co];
                    for (int ci = 0; ci < cin; ++ci) {
                        for (int ky = 0; ky < 3; ++ky) {
                            int y = 2 * oy + ky - 1;
                            if (y < 0 || y >= ih) continue;
                            for (int kx = 0; kx < 3; ++kx) {
                                int x = 2 * ox + kx - 1;
                                if (x < 0 || x >= iw) continue;
                                acc += stem_w[((size_t(co) * cin + ci) * 3 + ky) * 3 + kx] *
                                       img[(size_t(ci) * ih + y) * iw + x];
                            }
                        }
                    }
                    pre[(size_t(co) * oh + oy) * ow + ox] = acc;
                }
            }
        }
        S* uu = act.u.data() + size_t(b) * n0;
        for (int i = 0; i < n0; ++i) uu[i] = silu(pre[i]);
    }

    // Condition vector: sinusoidal timestep features next to the embedding row.
    const S* table = w + lay.cond_table.offset;
    for (int b = 0; b < B; ++b) {
        S* tc = act.tc.data() + size_t(b) * e_in;
        sinusoidal_embed(in.t[b], et, tc);
        const S* row = table + size_t(in.cond[b]) * ec;
        std::memcpy(tc + et, row, sizeof(S) * ec);
    }

    cmat_map<S> Wtc(w + lay.tc_w.offset, hdim, e_in);
    crow_map<S> btc(w + lay.tc_b.offset, lay.tc_b.size);
    cmat_map<S> TC(act.tc.data(), B, e_in);
    mat_map<S> Epre(act.e_pre.data(), B, hdim);
    Epre.noalias() = TC * Wtc.transpose();
    Epre.rowwise() += btc;
    mat_map<S> E(act.e.data(), B, hdim);
    E = Epre.unaryExpr([](S x) { return silu(x); });

    cmat_map<S> Win(w + lay.in_w.offset, hdim, n0);
    crow_map<S> bin(w + lay.in_b.offset, lay.in_b.size);
    cmat_map<S> U(act.u.data(), B, n0);
    mat_map<S> H0(act.h.data(), B, hdim);
    H0.noalias() = U * Win.transpose();
    H0.rowwise() += bin;

    for (int d = 0; d < cfg.depth; ++d) {
        const auto& blk = lay.blocks[d];
        cmat_map<S> W1(w + blk.w1.offset, hdim, hdim);
        crow_map<S> b1(w + blk.b1.offset, hdim);
        cmat_map<S> W2(w + blk.w2.offset, hdim, hdim);
        crow_map<S> b2(w + blk.b2.offset, hdim);
        cmat_map<S> Hd(act.h.data() + size_t(d) * B * hdim, B, hdim);
        mat_map<S> Apre(act.a_pre.data() + size_t(d) * B * hdim, B, hdim);
        mat_map<S> A(act.a.data() + size_t(d) * B * hdim, B, hdim);
        mat_map<S> Hn(act.h.data() + size_t(d + 1) * B * hdim, B, hdim);
        Apre.noalias() = Hd * W1.transpose();
        Apre.rowwise() += b1;
        Apre += E;
        A = Apre.unaryExpr([](S x) { return silu(x); });
        Hn.noalias() = A * W2.transpose();
        Hn.rowwise() += b2;
        Hn += Hd;
    }

    cmat_map<S> Hd(act.h.data() + size_t(cfg.depth) * B * hdim, B, hdim);
    mat_map<S> G(act.g.data(), B, hdim);
    G = Hd.unaryExpr([](S x) { return silu(x); });
    cmat_map<S> Wout(w + lay.out_w.offset, n0, hdim);
    crow_map<S> bout(w + lay.out_b.offset, n0);
    mat_map<S> V(act.v.data(), B, n0);
    V.noalias() = G * Wout.transpose();
    V.rowwise() += bout;

    // Head: nearest-neighbor x2 upsample of the core output, 3x3 conv to the
    // input channel count.
    const S* head_w = w + lay.head_w.offset;
    const S* head_b = w + lay.head_b.offset;
    for (int b = 0; b < B; ++b) {
        const S* vv = act.v.data() + size_t(b) * n0;
        S* oo = act.out.data() + size_t(b) * npix;
        for (int co = 0; co < cin; ++co) {
            for (int y = 0; y < ih; ++y) {
                for (int x = 0; x < iw; ++x) {
                    S acc = head_b[co];
                    for (int ci = 0; ci < cs; ++ci) {
                        for (int ky = 0; ky < 3; ++ky) {
                            int yy = y + ky - 1;
                            if (yy < 0 || yy >= ih) continue;
                            for (int kx = 0; kx < 3; ++kx) {
                                int xx = x + kx - 1;
                                if (xx < 0 || xx >= iw) continue;
                                // up[ci][yy][xx] = v[ci][yy/2][xx/2]
                                acc += head_w[((size_t(co) * cs + ci) * 3 + ky) * 3 + kx] *
                                       vv[(size_t(ci) * oh + yy / 2) * ow + xx / 2];
                            }
                        }
                    }
                    oo[(size_t(co) * ih + y) * iw + x] = acc;
                }
            }
        }
    }
}

// Backpropagates d_out (gradient w.r.t. the network output) into grad, which
// is accumulated (callers zero it first). d_out is clobbered as scratch.
template <class S>
void net_backward(const denoiser_config& cfg, const param_layout& lay, const S* w,
                  const net_batch<S>& in, const net_activations<S>& act, std::vector<S>& d_out,
                  S* grad) {
    const int B = in.batch;
    const int cin = cfg.input_shape.channels;
    const int ih = cfg.input_shape.height;
    const int iw = cfg.input_shape.width;
    const int oh = ih / 2, ow = iw / 2;
    const int cs = cfg.stem_channels;
    const int n0 = cfg.core_width();
    const int hdim = cfg.hidden;
    const int et = cfg.t_embed_dim, ec = cfg.c_embed_dim;
    const int e_in = et + ec;
    const int npix = cin * ih * iw;

    // Head backward.
    std::vector<S> d_v(size_t(B) * n0, S(0));
    const S* head_w = w + lay.head_w.offset;
    S* d_head_w = grad + lay.head_w.offset;
    S* d_head_b = grad + lay.head_b.offset;
    for (int b = 0; b < B; ++b) {
        const S* vv = act.v.data() + size_t(b) * n0;
        const S* doo = d_out.data() + size_t(b) * npix;
        S* dvv = d_v.data() + size_t(b) * n0;
        for (int co = 0; co < cin; ++co) {
            for (int y = 0; y < ih; ++y) {
                for (int x = 0; x < iw; ++x) {
                    S go = doo[(size_t(co) * ih + y) * iw + x];
                    d_head_b[co] += go;
                    for (int ci = 0; ci < cs; ++ci) {
                        for (int ky = 0; ky < 3; ++ky) {
                            int yy = y + ky - 1;
                            if (yy < 0 || yy >= ih) continue;
                            for (int kx = 0; kx < 3; ++kx) {
                                int xx = x + kx - 1;
                                if (xx < 0 || xx >= iw) continue;
                                size_t wi = ((size_t(co) * cs + ci) * 3 + ky) * 3 + kx;
                                size_t vi = (size_t(ci) * oh + yy / 2) * ow + xx / 2;
                                d_head_w[wi] += go * vv[vi];
                                dvv[vi] += go * head_w[wi];
                            }
                        }
                    }
                }
            }
        }
    }

    // Dense core backward.
    mat_map<S> dV(d_v.data(), B, n0);
    cmat_map<S> G(act.g.data(), B, hdim);
    cmat_map<S> Wout(w + lay.out_w.offset, n0, hdim);
    mat_map<S> dWout(grad + lay.out_w.offset, n0, hdim);
    row_map<S> dbout(grad + lay.out_b.offset, n0);
    dWout.noalias() += dV.transpose() * G;
    dbout += dV.colwise().sum();

    std::vector<S> d_h(size_t(B) * hdim);
    mat_map<S> dH(d_h.data(), B, hdim);
    cmat_map<S> HD(act.h.data() + size_t(cfg.depth) * B * hdim, B, hdim);
    dH.noalias() = dV * Wout;
    dH.array() *= HD.unaryExpr([](S x) { return silu_grad(x); }).array();

    std::vector<S> d_e(size_t(B) * hdim, S(0));
    mat_map<S> dE(d_e.data(), B, hdim);
    std::vector<S> d_a(size_t(B) * hdim);

    for (int d = cfg.depth - 1; d >= 0; --d) {
        const auto& blk = lay.blocks[d];
        cmat_map<S> W1(w + blk.w1.offset, hdim, hdim);
        cmat_map<S> W2(w + blk.w2.offset, hdim, hdim);
        cmat_map<S> Hd(act.h.data() + size_t(d) * B * hdim, B, hdim);
        cmat_map<S> Apre(act.a_pre.data() + size_t(d) * B * hdim, B, hdim);
        cmat_map<S> A(act.a.data() + size_t(d) * B * hdim, B, hdim);
        mat_map<S> dW1(grad + blk.w1.offset, hdim, hdim);
        row_map<S> db1(grad + blk.b1.offset, hdim);
        mat_map<S> dW2(grad + blk.w2.offset, hdim, hdim);
        row_map<S> db2(grad + blk.b2.offset, hdim);

        // h_next = h + A * W2^T + b2
        dW2.noalias() += dH.transpose() * A;
        db2 += dH.colwise().sum();
        mat_map<S> dA(d_a.data(), B, hdim);
        dA.noalias() = dH * W2;
        dA.array() *= Apre.unaryExpr([](S x) { return silu_grad(x); }).array();
        // a_pre = h * W1^T + b1 + e
        dE += dA;
        dW1.noalias() += dA.transpose() * Hd;
        db1 += dA.colwise().sum();
        dH.noalias() += dA * W1;  // residual skip already in dH
    }

    cmat_map<S> U(act.u.data(), B, n0);
    cmat_map<S> Win(w + lay.in_w.offset, hdim, n0);
    mat_map<S> dWin(grad + lay.in_w.offset, hdim, n0);
    row_map<S> dbin(grad + lay.in_b.offset, hdim);
    dWin.noalias() += dH.transpose() * U;
    dbin += dH.colwise().sum();
    std::vector<S> d_u(size_t(B) * n0);
    mat_map<S> dU(d_u.data(), B, n0);
    dU.noalias() = dH * Win;

    // Conditioning backward.
    cmat_map<S> Epre(act.e_pre.data(), B, hdim);
    dE.array() *= Epre.unaryExpr([](S x) { return silu_grad(x); }).array();
    cmat_map<S> TC(act.tc.data(), B, e_in);
    cmat_map<S> Wtc(w + lay.tc_w.offset, hdim, e_in);
    mat_map<S> dWtc(grad + lay.tc_w.offset, hdim, e_in);
    row_map<S> dbtc(grad + lay.tc_b.offset, hdim);
    dWtc.noalias() += dE.transpose() * TC;
    dbtc += dE.colwise().sum();
    std::vector<S> d_tc(size_t(B) * e_in);
    mat_map<S> dTC(d_tc.data(), B, e_in);
    dTC.noalias() = dE * Wtc;
    S* d_table = grad + lay.cond_table.offset;
    for (int b = 0; b < B; ++b) {
        const S* src = d_tc.data() + size_t(b) * e_in + et;
        S* dst = d_table + size_t(in.cond[b]) * ec;
        for (int i = 0; i < ec; ++i) dst[i] += src[i];
    }

    // Stem backward (input gradient not needed).
    S* d_stem_w = grad + lay.stem_w.offset;
    S* d_stem_b = grad + lay.stem_b.offset;
    for (int b = 0; b < B; ++b) {
        const S* img = in.x.data() + size_t(b) * npix;
        const S* pre = act.stem_pre.data() + size_t(b) * n0;
        const S* duu = d_u.data() + size_t(b) * n0;
        for (int co = 0; co < cs; ++co) {
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    size_t oi = (size_t(co) * oh + oy) * ow + ox;
                    S gp = duu[oi] * silu_grad(pre[oi]);
                    d_stem_b[co] += gp;
                    for (int ci = 0; ci < cin; ++ci) {
                        for (int ky = 0; ky < 3; ++ky) {
                            int y = 2 * oy + ky - 1;
                            if (y < 0 || y >= ih) continue;
                            for (int kx = 0; kx < 3; ++kx) {
                                int x = 2 * ox + kx - 1;
                                if (x < 0 || x >= iw) continue;
                                d_stem_w[((size_t(co) * cin + ci) * 3 + ky) * 3 + kx] +=
                                    gp * img[(size_t(ci) * ih + y) * iw + x];
                            }
                        }
                    }
                }
            }
        }
    }
}

// Mean-squared error against target noise; fills grad (accumulating) when
// non-null. Returns the loss.
template <class S>
S net_loss(const denoiser_config& cfg, const param_layout& lay, const S* w,
           const net_batch<S>& in, const std::vector<S>& target, S* grad,
           net_activations<S>& act) {
    const int npix = cfg.input_shape.channels * cfg.input_shape.height * cfg.input_shape.width;
    net_forward(cfg, lay, w, in, act);
    const size_t n = size_t(in.batch) * npix;
    S loss = S(0);
    for (size_t i = 0; i < n; ++i) {
        S diff = act.out[i] - target[i];
        loss += diff * diff;
    }
    loss /= S(n);
    if (grad) {
        std::vector<S> d_out(n);
        S scale = S(2) / S(n);
        for (size_t i = 0; i < n; ++i) d_out[i] = scale * (act.out[i] - target[i]);
        net_backward(cfg, lay, w, in, act, d_out, grad);
    }
    return loss;
}

}  // namespace coopdiff::detail

#endif
