#include "iscat/net.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "iscat/forward.hpp"
#include "iscat/metrics.hpp"
#include "iscat/rng.hpp"

namespace iscat {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ConvSpec {
    int in_c, out_c, k;
    bool bn;
};

std::vector<ConvSpec> conv_schedule(const NetConfig& cfg) {
    std::vector<ConvSpec> sched;
    const bool bn = cfg.use_batchnorm;
    auto ch = [&](int level) { return cfg.base_channels << level; };

    int in_c = cfg.input_channels;
    for (int l = 0; l < cfg.depth; ++l) {
        sched.push_back({in_c, ch(l), 3, bn});
        sched.push_back({ch(l), ch(l), 3, bn});
        in_c = ch(l);
    }
    sched.push_back({ch(cfg.depth - 1), ch(cfg.depth), 3, bn});
    sched.push_back({ch(cfg.depth), ch(cfg.depth), 3, bn});
    for (int l = cfg.depth - 1; l >= 0; --l) {
        sched.push_back({ch(l + 1), ch(l), 3, bn});      // up-convolution
        sched.push_back({2 * ch(l), ch(l), 3, bn});      // after skip concat
        sched.push_back({ch(l), ch(l), 3, bn});
    }
    sched.push_back({ch(0), cfg.output_channels, 1, false});  // head
    return sched;
}

void validate_config(const NetConfig& cfg) {
    if (cfg.depth < 1) throw std::invalid_argument("net: depth must be >= 1");
    if (cfg.base_channels < 1) throw std::invalid_argument("net: base_channels must be >= 1");
    if (cfg.input_channels < 1 || cfg.output_channels < 1)
        throw std::invalid_argument("net: channel counts must be >= 1");
}

// im2col for 'same' padding (k=3) or 1x1 (k=0 pad); column j = (b*h + y)*w + x
RowMat im2col(const Tensor& in, int k) {
    const int pad = k / 2;
    const int rows = in.c * k * k;
    const std::size_t cols = static_cast<std::size_t>(in.b) * in.h * in.w;
    RowMat col(rows, cols);
    for (int ci = 0; ci < in.c; ++ci)
        for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
                const int r = (ci * k + ky) * k + kx;
                for (int bi = 0; bi < in.b; ++bi)
                    for (int y = 0; y < in.h; ++y) {
                        const int sy = y + ky - pad;
                        double* dst = col.row(r).data() +
                                      (static_cast<std::size_t>(bi) * in.h + y) * in.w;
                        if (sy < 0 || sy >= in.h) {
                            std::fill(dst, dst + in.w, 0.0);
                            continue;
                        }
                        for (int x = 0; x < in.w; ++x) {
                            const int sx = x + kx - pad;
                            dst[x] = (sx < 0 || sx >= in.w) ? 0.0 : in.at(bi, ci, sy, sx);
                        }
                    }
            }
    return col;
}

Tensor conv_forward(const ConvParam& p, const Tensor& in) {
    const RowMat col = im2col(in, p.k);
    const Eigen::Map<const RowMat> w(p.w.data(), p.out_c, p.in_c * p.k * p.k);
    RowMat out_mat = w * col;
    Tensor out = Tensor::zeros(in.b, p.out_c, in.h, in.w);
    const std::size_t plane = static_cast<std::size_t>(in.h) * in.w;
    for (int co = 0; co < p.out_c; ++co) {
        const double bias = p.b[co];
        const double* src = out_mat.row(co).data();
        for (int bi = 0; bi < in.b; ++bi) {
            double* dst = &out.at(bi, co, 0, 0);
            const double* s = src + bi * plane;
            for (std::size_t i = 0; i < plane; ++i) dst[i] = s[i] + bias;
        }
    }
    return out;
}

Tensor conv_backward(const ConvParam& p, const Tensor& in, const Tensor& dout,
                     std::vector<double>& dw, std::vector<double>& db) {
    const int k = p.k, pad = k / 2;
    const std::size_t plane = static_cast<std::size_t>(in.h) * in.w;
    const std::size_t cols = static_cast<std::size_t>(in.b) * plane;

    RowMat dout_mat(p.out_c, cols);
    for (int co = 0; co < p.out_c; ++co)
        for (int bi = 0; bi < in.b; ++bi)
            std::copy_n(&dout.at(bi, co, 0, 0), plane, dout_mat.row(co).data() + bi * plane);

    const RowMat col = im2col(in, k);
    const Eigen::Map<const RowMat> w(p.w.data(), p.out_c, p.in_c * k * k);

    Eigen::Map<RowMat>(dw.data(), p.out_c, p.in_c * k * k) = dout_mat * col.transpose();
    for (int co = 0; co < p.out_c; ++co) db[co] = dout_mat.row(co).sum();

    const RowMat dcol = w.transpose() * dout_mat;

    Tensor din = Tensor::zeros(in.b, in.c, in.h, in.w);
    for (int ci = 0; ci < in.c; ++ci)
        for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
                const int r = (ci * k + ky) * k + kx;
                const double* src = dcol.row(r).data();
                for (int bi = 0; bi < in.b; ++bi)
                    for (int y = 0; y < in.h; ++y) {
                        const int sy = y + ky - pad;
                        if (sy < 0 || sy >= in.h) continue;
                        const double* s = src + (static_cast<std::size_t>(bi) * in.h + y) * in.w;
                        for (int x = 0; x < in.w; ++x) {
                            const int sx = x + kx - pad;
                            if (sx >= 0 && sx < in.w) din.at(bi, ci, sy, sx) += s[x];
                        }
                    }
            }
    return din;
}

}  // namespace

struct NetCache {
    NetMode mode = NetMode::train;
    const NetParams* owner = nullptr;
    // each entry maps dOut -> dIn and accumulates parameter gradients
    std::vector<std::function<Tensor(const Tensor&, const NetParams&, NetGrads&)>> tape;
    std::vector<Tensor> skip_grad;
};

NetParams net_init(const NetConfig& cfg) {
    validate_config(cfg);
    NetParams params;
    params.cfg = cfg;
    Rng rng(cfg.rng_seed);
    for (const ConvSpec& spec : conv_schedule(cfg)) {
        ConvParam cp;
        cp.in_c = spec.in_c;
        cp.out_c = spec.out_c;
        cp.k = spec.k;
        const int fan_in = spec.in_c * spec.k * spec.k;
        const double scale = std::sqrt(2.0 / fan_in);
        cp.w.resize(static_cast<std::size_t>(spec.out_c) * fan_in);
        for (double& v : cp.w) v = rng.normal() * scale;
        cp.b.assign(spec.out_c, 0.0);
        params.convs.push_back(std::move(cp));

        BnParam bp;
        if (spec.bn) {
            bp.c = spec.out_c;
            bp.gamma.assign(spec.out_c, 1.0);
            bp.beta.assign(spec.out_c, 0.0);
            bp.run_mean.assign(spec.out_c, 0.0);
            bp.run_var.assign(spec.out_c, 1.0);
        }
        params.bns.push_back(std::move(bp));
    }
    return params;
}

namespace {

Tensor bn_forward(BnParam& p, const Tensor& in, NetMode mode, NetCache* cache, int conv_idx) {
    const std::size_t m = static_cast<std::size_t>(in.b) * in.h * in.w;  // per-channel count
    Tensor out = Tensor::zeros(in.b, in.c, in.h, in.w);
    Tensor xhat = Tensor::zeros(in.b, in.c, in.h, in.w);
    std::vector<double> invstd(in.c, 0.0);

    for (int ci = 0; ci < in.c; ++ci) {
        double mean = 0.0, var = 0.0;
        if (mode == NetMode::train) {
            for (int bi = 0; bi < in.b; ++bi)
                for (int y = 0; y < in.h; ++y)
                    for (int x = 0; x < in.w; ++x) mean += in.at(bi, ci, y, x);
            mean /= static_cast<double>(m);
            for (int bi = 0; bi < in.b; ++bi)
                for (int y = 0; y < in.h; ++y)
                    for (int x = 0; x < in.w; ++x) {
                        const double d = in.at(bi, ci, y, x) - mean;
                        var += d * d;
                    }
            var /= static_cast<double>(m);
            const double unbiased = m > 1 ? var * static_cast<double>(m) / (m - 1.0) : var;
            p.run_mean[ci] = (1.0 - p.momentum) * p.run_mean[ci] + p.momentum * mean;
            p.run_var[ci] = (1.0 - p.momentum) * p.run_var[ci] + p.momentum * unbiased;
        } else {
            mean = p.run_mean[ci];
            var = p.run_var[ci];
        }
        const double is = 1.0 / std::sqrt(var + p.eps);
        invstd[ci] = is;
        const double g = p.gamma[ci], b = p.beta[ci];
        for (int bi = 0; bi < in.b; ++bi)
            for (int y = 0; y < in.h; ++y)
                for (int x = 0; x < in.w; ++x) {
                    const double xh = (in.at(bi, ci, y, x) - mean) * is;
                    xhat.at(bi, ci, y, x) = xh;
                    out.at(bi, ci, y, x) = g * xh + b;
                }
    }

    if (cache) {
        const NetMode mode_used = mode;
        cache->tape.push_back([conv_idx, xhat, invstd, mode_used, m](
                                  const Tensor& dout, const NetParams& params,
                                  NetGrads& grads) -> Tensor {
            const BnParam& bp = params.bns[conv_idx];
            Tensor din = Tensor::zeros(dout.b, dout.c, dout.h, dout.w);
            for (int ci = 0; ci < dout.c; ++ci) {
                double dgamma = 0.0, dbeta = 0.0;
                for (int bi = 0; bi < dout.b; ++bi)
                    for (int y = 0; y < dout.h; ++y)
                        for (int x = 0; x < dout.w; ++x) {
                            const double dy = dout.at(bi, ci, y, x);
                            dgamma += dy * xhat.at(bi, ci, y, x);
                            dbeta += dy;
                        }
                grads.bn_gamma[conv_idx][ci] += dgamma;
                grads.bn_beta[conv_idx][ci] += dbeta;

                const double g = bp.gamma[ci], is = invstd[ci];
                if (mode_used == NetMode::eval) {
                    for (int bi = 0; bi < dout.b; ++bi)
                        for (int y = 0; y < dout.h; ++y)
                            for (int x = 0; x < dout.w; ++x)
                                din.at(bi, ci, y, x) = dout.at(bi, ci, y, x) * g * is;
                    continue;
                }
                const double inv_m = 1.0 / static_cast<double>(m);
                // dxhat = dy * gamma; dx = is/m (m dxhat - sum dxhat - xhat sum(dxhat xhat))
                const double sum_dxhat = dbeta * g;
                const double sum_dxhat_xhat = dgamma * g;
                for (int bi = 0; bi < dout.b; ++bi)
                    for (int y = 0; y < dout.h; ++y)
                        for (int x = 0; x < dout.w; ++x) {
                            const double dxhat = dout.at(bi, ci, y, x) * g;
                            din.at(bi, ci, y, x) =
                                is * (dxhat - inv_m * sum_dxhat -
                                      xhat.at(bi, ci, y, x) * inv_m * sum_dxhat_xhat);
                        }
            }
            return din;
        });
    }
    return out;
}

Tensor relu_forward(const Tensor& in, NetCache* cache) {
    Tensor out = in;
    for (double& v : out.v) v = v > 0.0 ? v : 0.0;
    if (cache) {
        std::vector<bool> mask(in.size());
        for (std::size_t i = 0; i < in.size(); ++i) mask[i] = in.v[i] > 0.0;
        cache->tape.push_back(
            [mask](const Tensor& dout, const NetParams&, NetGrads&) -> Tensor {
                Tensor din = dout;
                for (std::size_t i = 0; i < din.size(); ++i)
                    if (!mask[i]) din.v[i] = 0.0;
                return din;
            });
    }
    return out;
}

Tensor maxpool_forward(const Tensor& in, NetCache* cache) {
    if (in.h % 2 != 0 || in.w % 2 != 0)
        throw std::invalid_argument("net: spatial size not divisible for pooling");
    Tensor out = Tensor::zeros(in.b, in.c, in.h / 2, in.w / 2);
    std::vector<std::uint8_t> arg(out.size());
    std::size_t o = 0;
    for (int bi = 0; bi < in.b; ++bi)
        for (int ci = 0; ci < in.c; ++ci)
            for (int y = 0; y < out.h; ++y)
                for (int x = 0; x < out.w; ++x, ++o) {
                    double best = in.at(bi, ci, 2 * y, 2 * x);
                    int best_k = 0;
                    for (int k = 1; k < 4; ++k) {
                        const double v = in.at(bi, ci, 2 * y + k / 2, 2 * x + k % 2);
                        if (v > best) {
                            best = v;
                            best_k = k;
                        }
                    }
                    out.v[o] = best;
                    arg[o] = static_cast<std::uint8_t>(best_k);
                }
    if (cache) {
        const int ih = in.h, iw = in.w;
        cache->tape.push_back(
            [arg, ih, iw](const Tensor& dout, const NetParams&, NetGrads&) -> Tensor {
                Tensor din = Tensor::zeros(dout.b, dout.c, ih, iw);
                std::size_t o = 0;
                for (int bi = 0; bi < dout.b; ++bi)
                    for (int ci = 0; ci < dout.c; ++ci)
                        for (int y = 0; y < dout.h; ++y)
                            for (int x = 0; x < dout.w; ++x, ++o) {
                                const int k = arg[o];
                                din.at(bi, ci, 2 * y + k / 2, 2 * x + k % 2) = dout.v[o];
                            }
                return din;
            });
    }
    return out;
}

Tensor upsample_forward(const Tensor& in, NetCache* cache) {
    Tensor out = Tensor::zeros(in.b, in.c, in.h * 2, in.w * 2);
    for (int bi = 0; bi < in.b; ++bi)
        for (int ci = 0; ci < in.c; ++ci)
            for (int y = 0; y < out.h; ++y)
                for (int x = 0; x < out.w; ++x)
                    out.at(bi, ci, y, x) = in.at(bi, ci, y / 2, x / 2);
    if (cache) {
        cache->tape.push_back([](const Tensor& dout, const NetParams&, NetGrads&) -> Tensor {
            Tensor din = Tensor::zeros(dout.b, dout.c, dout.h / 2, dout.w / 2);
            for (int bi = 0; bi < dout.b; ++bi)
                for (int ci = 0; ci < dout.c; ++ci)
                    for (int y = 0; y < dout.h; ++y)
                        for (int x = 0; x < dout.w; ++x)
                            din.at(bi, ci, y / 2, x / 2) += dout.at(bi, ci, y, x);
            return din;
        });
    }
    return out;
}

Tensor concat_forward(const Tensor& a, const Tensor& skip, int level, NetCache* cache) {
    if (a.b != skip.b || a.h != skip.h || a.w != skip.w)
        throw std::invalid_argument("net: concat shape mismatch");
    Tensor out = Tensor::zeros(a.b, a.c + skip.c, a.h, a.w);
    for (int bi = 0; bi < a.b; ++bi) {
        for (int ci = 0; ci < a.c; ++ci)
            for (int y = 0; y < a.h; ++y)
                for (int x = 0; x < a.w; ++x) out.at(bi, ci, y, x) = a.at(bi, ci, y, x);
        for (int ci = 0; ci < skip.c; ++ci)
            for (int y = 0; y < a.h; ++y)
                for (int x = 0; x < a.w; ++x)
                    out.at(bi, a.c + ci, y, x) = skip.at(bi, ci, y, x);
    }
    if (cache) {
        NetCache* c = cache;
        const int ac = a.c, sc = skip.c;
        cache->tape.push_back(
            [c, ac, sc, level](const Tensor& dout, const NetParams&, NetGrads&) -> Tensor {
                Tensor din = Tensor::zeros(dout.b, ac, dout.h, dout.w);
                Tensor dskip = Tensor::zeros(dout.b, sc, dout.h, dout.w);
                for (int bi = 0; bi < dout.b; ++bi) {
                    for (int ci = 0; ci < ac; ++ci)
                        for (int y = 0; y < dout.h; ++y)
                            for (int x = 0; x < dout.w; ++x)
                                din.at(bi, ci, y, x) = dout.at(bi, ci, y, x);
                    for (int ci = 0; ci < sc; ++ci)
                        for (int y = 0; y < dout.h; ++y)
                            for (int x = 0; x < dout.w; ++x)
                                dskip.at(bi, ci, y, x) = dout.at(bi, ac + ci, y, x);
                }
                c->skip_grad[level] = std::move(dskip);
                return din;
            });
    }
    return out;
}

// identity marker where the encoder activation branches off as a skip
Tensor skip_save_forward(const Tensor& in, int level, NetCache* cache) {
    if (cache) {
        NetCache* c = cache;
        cache->tape.push_back(
            [c, level](const Tensor& dout, const NetParams&, NetGrads&) -> Tensor {
                Tensor din = dout;
                const Tensor& extra = c->skip_grad[level];
                if (!extra.v.empty())
                    for (std::size_t i = 0; i < din.size(); ++i) din.v[i] += extra.v[i];
                return din;
            });
    }
    return in;
}

Tensor conv_block(NetParams& params, int conv_idx, const Tensor& in, NetCache* cache) {
    const ConvParam& cp = params.convs[conv_idx];
    if (in.c != cp.in_c) throw std::invalid_argument("net: channel mismatch in conv");
    Tensor out = conv_forward(cp, in);
    if (cache) {
        Tensor in_copy = in;
        cache->tape.push_back([conv_idx, in_copy](const Tensor& dout, const NetParams& p,
                                                  NetGrads& grads) -> Tensor {
            return conv_backward(p.convs[conv_idx], in_copy, dout, grads.conv_w[conv_idx],
                                 grads.conv_b[conv_idx]);
        });
    }
    return out;
}

// conv -> batchnorm -> relu
Tensor cbr(NetParams& params, int conv_idx, const Tensor& in, NetMode mode, NetCache* cache) {
    Tensor x = conv_block(params, conv_idx, in, cache);
    if (params.bns[conv_idx].c > 0) x = bn_forward(params.bns[conv_idx], x, mode, cache, conv_idx);
    return relu_forward(x, cache);
}

}  // namespace

Tensor net_forward(NetParams& params, const Tensor& input, NetMode mode,
                   std::unique_ptr<NetCache>* cache_out) {
    const NetConfig& cfg = params.cfg;
    validate_config(cfg);
    if (input.c != cfg.input_channels)
        throw std::invalid_argument("net_forward: wrong input channel count");
    const int div = 1 << cfg.depth;
    if (input.h % div != 0 || input.w % div != 0)
        throw std::invalid_argument("net_forward: spatial size not divisible by 2^depth");

    NetCache* cache = nullptr;
    if (cache_out) {
        *cache_out = std::make_unique<NetCache>();
        cache = cache_out->get();
        cache->mode = mode;
        cache->owner = &params;
        cache->skip_grad.resize(cfg.depth);
    }

    int ci = 0;
    Tensor x = input;
    std::vector<Tensor> skips(cfg.depth);
    for (int l = 0; l < cfg.depth; ++l) {
        x = cbr(params, ci++, x, mode, cache);
        x = cbr(params, ci++, x, mode, cache);
        x = skip_save_forward(x, l, cache);
        skips[l] = x;
        x = maxpool_forward(x, cache);
    }
    x = cbr(params, ci++, x, mode, cache);
    x = cbr(params, ci++, x, mode, cache);
    for (int l = cfg.depth - 1; l >= 0; --l) {
        x = upsample_forward(x, cache);
        x = cbr(params, ci++, x, mode, cache);
        x = concat_forward(x, skips[l], l, cache);
        x = cbr(params, ci++, x, mode, cache);
        x = cbr(params, ci++, x, mode, cache);
    }
    x = conv_block(params, ci++, x, cache);  // 1x1 head, identity activation
    return x;
}

NetGrads net_backward(const NetParams& params, const NetCache& cache, const Tensor& dloss_dout,
                      Tensor* dloss_dinput) {
    if (cache.owner != &params)
        throw std::invalid_argument("net_backward: cache does not belong to these parameters");
    NetGrads g;
    g.conv_w.resize(params.convs.size());
    g.conv_b.resize(params.convs.size());
    g.bn_gamma.resize(params.bns.size());
    g.bn_beta.resize(params.bns.size());
    for (std::size_t i = 0; i < params.convs.size(); ++i) {
        g.conv_w[i].assign(params.convs[i].w.size(), 0.0);
        g.conv_b[i].assign(params.convs[i].b.size(), 0.0);
        g.bn_gamma[i].assign(params.bns[i].gamma.size(), 0.0);
        g.bn_beta[i].assign(params.bns[i].beta.size(), 0.0);
    }
    Tensor d = dloss_dout;
    auto& skip_grad = const_cast<NetCache&>(cache).skip_grad;
    for (auto& t : skip_grad) t = Tensor{};
    for (auto it = cache.tape.rbegin(); it != cache.tape.rend(); ++it) d = (*it)(d, params, g);
    if (dloss_dinput) *dloss_dinput = std::move(d);
    return g;
}

OptState opt_state_init(const NetParams& params, const TrainConfig& cfg) {
    OptState s;
    s.epoch = 0;
    s.lr = cfg.lr0;
    for (const ConvParam& c : params.convs) {
        s.vel_conv_w.emplace_back(c.w.size(), 0.0);
        s.vel_conv_b.emplace_back(c.b.size(), 0.0);
    }
    for (const BnParam& b : params.bns) {
        s.vel_bn_gamma.emplace_back(b.gamma.size(), 0.0);
        s.vel_bn_beta.emplace_back(b.beta.size(), 0.0);
    }
    return s;
}

double lr_at_epoch(double lr0, int epoch, int halving_period) {
    if (epoch < 0) throw std::invalid_argument("lr_at_epoch: epoch must be >= 0");
    if (halving_period < 1) throw std::invalid_argument("lr_at_epoch: period must be >= 1");
    return lr0 * std::pow(0.5, epoch / halving_period);
}

namespace {

void sgd_update(std::vector<double>& p, const std::vector<double>& g, std::vector<double>& v,
                double momentum, double lr, const char* what) {
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (!std::isfinite(g[i]))
            throw NumericError(std::string("sgd_momentum_step: non-finite gradient in ") + what);
        v[i] = momentum * v[i] - lr * g[i];
        p[i] += v[i];
    }
}

}  // namespace

void sgd_momentum_step(NetParams& params, const NetGrads& grads, OptState& state,
                       double momentum) {
    if (momentum < 0.0 || momentum >= 1.0)
        throw std::invalid_argument("sgd_momentum_step: momentum must be in [0,1)");
    for (std::size_t i = 0; i < params.convs.size(); ++i) {
        sgd_update(params.convs[i].w, grads.conv_w[i], state.vel_conv_w[i], momentum, state.lr,
                   "conv weights");
        sgd_update(params.convs[i].b, grads.conv_b[i], state.vel_conv_b[i], momentum, state.lr,
                   "conv bias");
        sgd_update(params.bns[i].gamma, grads.bn_gamma[i], state.vel_bn_gamma[i], momentum,
                   state.lr, "bn gamma");
        sgd_update(params.bns[i].beta, grads.bn_beta[i], state.vel_bn_beta[i], momentum, state.lr,
                   "bn beta");
    }
}

Tensor input_from_samples(const std::vector<const TrainingSample*>& batch) {
    if (batch.empty()) throw std::invalid_argument("input_from_samples: empty batch");
    const GridSpec& g = batch.front()->chi_bp.grid;
    Tensor t = Tensor::zeros(static_cast<int>(batch.size()), 2, g.ny, g.nx);
    for (std::size_t bi = 0; bi < batch.size(); ++bi) {
        const Eigen::VectorXcd& chi = batch[bi]->chi_bp.chi;
        for (int y = 0; y < g.ny; ++y)
            for (int x = 0; x < g.nx; ++x) {
                const Complex v = chi[g.index(x, y)];
                t.at(static_cast<int>(bi), 0, y, x) = v.real();
                t.at(static_cast<int>(bi), 1, y, x) = v.imag();
            }
    }
    return t;
}

Eigen::VectorXcd chi_from_output(const Tensor& out, int batch_index) {
    Eigen::VectorXcd chi(static_cast<Eigen::Index>(out.h) * out.w);
    for (int y = 0; y < out.h; ++y)
        for (int x = 0; x < out.w; ++x)
            chi[x + static_cast<Eigen::Index>(out.w) * y] =
                Complex(out.at(batch_index, 0, y, x), out.at(batch_index, 1, y, x));
    return chi;
}

Eigen::VectorXcd predict(NetParams& params, const ContrastMap& chi_bp) {
    TrainingSample s;
    s.chi_bp = chi_bp;
    const std::vector<const TrainingSample*> batch{&s};
    const Tensor out = net_forward(params, input_from_samples(batch), NetMode::eval);
    return chi_from_output(out, 0);
}

namespace {

std::vector<int> shuffled_indices(int n, Rng& rng) {
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    for (int i = n - 1; i > 0; --i) {
        const int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
        std::swap(idx[i], idx[j]);
    }
    return idx;
}

}  // namespace

TrainResult train(const std::vector<TrainingSample>& dataset, const NetConfig& net_cfg,
                  const TrainConfig& train_cfg, const GreensOperators* ops,
                  const NetParams* start_params, const OptState* start_opt,
                  const EpochCallback& per_epoch) {
    if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
    if (train_cfg.loss_kind == LossKind::field && !ops)
        throw std::invalid_argument("train: field loss requires Green's operators");
    if (train_cfg.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
    if (!(train_cfg.lr0 > 0.0)) throw std::invalid_argument("train: lr0 must be > 0");

    const int n_total = static_cast<int>(dataset.size());
    const int n_val = std::clamp(static_cast<int>(train_cfg.val_fraction * n_total), 0, n_total - 1);
    const int n_train = n_total - n_val;
    const GridSpec& grid = dataset.front().chi_bp.grid;
    const bool ssim_ok = grid.nx >= 11 && grid.ny >= 11;

    TrainResult result;
    result.params = start_params ? *start_params : net_init(net_cfg);
    result.opt = start_opt ? *start_opt : opt_state_init(result.params, train_cfg);

    NetParams snapshot = result.params;
    OptState snapshot_opt = result.opt;

    for (int epoch = result.opt.epoch; epoch < train_cfg.epochs_max; ++epoch) {
        result.opt.lr = lr_at_epoch(train_cfg.lr0, epoch, train_cfg.lr_halving_period);
        Rng rng(derive_seed(train_cfg.rng_seed, static_cast<std::uint64_t>(epoch)));
        const std::vector<int> order = shuffled_indices(n_train, rng);

        double loss_sum = 0.0;
        bool finite = true;
        for (int start = 0; start < n_train && finite; start += train_cfg.batch_size) {
            const int bsz = std::min(train_cfg.batch_size, n_train - start);
            std::vector<const TrainingSample*> batch(bsz);
            for (int i = 0; i < bsz; ++i) batch[i] = &dataset[order[start + i]];

            double beta = 0.0;
            if (train_cfg.loss_kind == LossKind::current)
                beta = batch_beta(BetaKind::current, std::span<const TrainingSample* const>(batch));
            else if (train_cfg.loss_kind == LossKind::field)
                beta = batch_beta(BetaKind::field, std::span<const TrainingSample* const>(batch));

            std::unique_ptr<NetCache> cache;
            const Tensor out = net_forward(result.params, input_from_samples(batch),
                                           NetMode::train, &cache);
            Tensor dout = Tensor::zeros(out.b, out.c, out.h, out.w);
            double batch_loss = 0.0;
            for (int i = 0; i < bsz; ++i) {
                const Eigen::VectorXcd chi_hat = chi_from_output(out, i);
                LossEval le;
                switch (train_cfg.loss_kind) {
                    case LossKind::contrast:
                        le = loss_contrast(chi_hat, batch[i]->chi_true.chi);
                        break;
                    case LossKind::current:
                        le = loss_current(chi_hat, *batch[i], beta);
                        break;
                    case LossKind::field:
                        le = loss_field(chi_hat, *batch[i], *ops, beta);
                        break;
                }
                batch_loss += le.value;
                const double inv_b = 1.0 / bsz;
                for (int y = 0; y < out.h; ++y)
                    for (int x = 0; x < out.w; ++x) {
                        const Eigen::Index pix = x + static_cast<Eigen::Index>(out.w) * y;
                        dout.at(i, 0, y, x) = le.grad_re[pix] * inv_b;
                        dout.at(i, 1, y, x) = le.grad_im[pix] * inv_b;
                    }
            }
            batch_loss /= bsz;
            if (!std::isfinite(batch_loss)) {
                finite = false;
                break;
            }
            loss_sum += batch_loss * bsz;
            try {
                const NetGrads grads = net_backward(result.params, *cache, dout);
                sgd_momentum_step(result.params, grads, result.opt, train_cfg.momentum);
            } catch (const NumericError&) {
                finite = false;
            }
        }

        if (!finite) {
            result.params = snapshot;
            result.opt = snapshot_opt;
            result.aborted = true;
            break;
        }

        EpochLogRow row;
        row.epoch = epoch;
        row.lr = result.opt.lr;
        row.train_loss = loss_sum / n_train;
        if (n_val > 0) {
            double mse_sum = 0.0, ssim_sum = 0.0;
            for (int i = n_train; i < n_total; ++i) {
                const Eigen::VectorXcd pred = predict(result.params, dataset[i].chi_bp);
                mse_sum += mse(pred, dataset[i].chi_true.chi);
                if (ssim_ok)
                    ssim_sum += ssim(dataset[i].chi_true.chi.real(), pred.real(), grid.nx,
                                     grid.ny, 4.0);
            }
            row.val_mse = mse_sum / n_val;
            row.val_ssim = ssim_ok ? ssim_sum / n_val : std::numeric_limits<double>::quiet_NaN();
        }
        result.log.push_back(row);
        result.opt.epoch = epoch + 1;
        result.epochs_run = epoch + 1;
        snapshot = result.params;
        snapshot_opt = result.opt;
        if (per_epoch) per_epoch(result);
    }
    return result;
}

}  // namespace iscat
