#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "hfl/rng.hpp"
#include "hfl/tensor.hpp"

namespace hfl {

// The fixed CNN family: 4 x [Conv3x3(pad 1) -> Scaler -> BatchNorm -> ReLU ->
// MaxPool2x2], the last block replaces the pool with a global average pool,
// then Flatten -> Dense(classes). Conv widths are (u, 2u, 4u, 8u).
struct ModelSpec {
    int image_channels = 3;
    int classes = 10;
    std::vector<int> conv_widths;  // one entry per conv block

    static ModelSpec from_u(int u, int image_channels, int classes) {
        if (u < 1) throw std::invalid_argument("model spec: u must be >= 1");
        if (image_channels < 1) throw std::invalid_argument("model spec: image_channels must be >= 1");
        if (classes < 2) throw std::invalid_argument("model spec: classes must be >= 2");
        ModelSpec s;
        s.image_channels = image_channels;
        s.classes = classes;
        s.conv_widths = {u, 2 * u, 4 * u, 8 * u};
        return s;
    }

    int num_blocks() const { return static_cast<int>(conv_widths.size()); }
    int dense_in() const { return conv_widths.back(); }
};

enum class Mode { train, eval };

template <typename T>
struct ConvBlockParams {
    Tensor<T> w;        // (N, M, 3, 3)
    Tensor<T> b;        // (N)
    Tensor<T> bn_gain;  // (N)
    Tensor<T> bn_bias;  // (N)
    Tensor<T> bn_mean;  // (N) running, not trainable
    Tensor<T> bn_var;   // (N) running, not trainable
};

template <typename T>
struct ModelParams {
    int image_channels = 0;
    int classes = 0;
    std::vector<ConvBlockParams<T>> blocks;
    Tensor<T> dense_w;  // (classes, last width)
    Tensor<T> dense_b;  // (classes)

    std::vector<int> conv_widths() const {
        std::vector<int> w;
        for (const auto& blk : blocks) w.push_back(blk.b.shape()[0]);
        return w;
    }

    template <typename U>
    ModelParams<U> cast() const {
        ModelParams<U> out;
        out.image_channels = image_channels;
        out.classes = classes;
        for (const auto& blk : blocks)
            out.blocks.push_back({blk.w.template cast<U>(), blk.b.template cast<U>(),
                                  blk.bn_gain.template cast<U>(), blk.bn_bias.template cast<U>(),
                                  blk.bn_mean.template cast<U>(), blk.bn_var.template cast<U>()});
        out.dense_w = dense_w.template cast<U>();
        out.dense_b = dense_b.template cast<U>();
        return out;
    }
};

// Trainable tensors in a fixed order (running stats excluded).
template <typename T>
std::vector<Tensor<T>*> trainable_tensors(ModelParams<T>& p) {
    std::vector<Tensor<T>*> out;
    for (auto& blk : p.blocks) {
        out.push_back(&blk.w);
        out.push_back(&blk.b);
        out.push_back(&blk.bn_gain);
        out.push_back(&blk.bn_bias);
    }
    out.push_back(&p.dense_w);
    out.push_back(&p.dense_b);
    return out;
}

template <typename T>
std::vector<const Tensor<T>*> trainable_tensors(const ModelParams<T>& p) {
    std::vector<const Tensor<T>*> out;
    for (auto& blk : p.blocks) {
        out.push_back(&blk.w);
        out.push_back(&blk.b);
        out.push_back(&blk.bn_gain);
        out.push_back(&blk.bn_bias);
    }
    out.push_back(&p.dense_w);
    out.push_back(&p.dense_b);
    return out;
}

// All tensors including BatchNorm running stats, used by model integration.
template <typename T>
std::vector<Tensor<T>*> all_tensors(ModelParams<T>& p) {
    std::vector<Tensor<T>*> out;
    for (auto& blk : p.blocks) {
        out.push_back(&blk.w);
        out.push_back(&blk.b);
        out.push_back(&blk.bn_gain);
        out.push_back(&blk.bn_bias);
        out.push_back(&blk.bn_mean);
        out.push_back(&blk.bn_var);
    }
    out.push_back(&p.dense_w);
    out.push_back(&p.dense_b);
    return out;
}

template <typename T>
std::size_t param_count(const ModelParams<T>& p) {
    std::size_t n = 0;
    for (auto* t : trainable_tensors(p)) n += t->size();
    return n;
}

inline std::size_t param_count(int u, int image_channels = 3, int classes = 10) {
    ModelSpec spec = ModelSpec::from_u(u, image_channels, classes);
    std::size_t n = 0;
    int in = spec.image_channels;
    for (int w : spec.conv_widths) {
        n += static_cast<std::size_t>(w) * in * 9 + w;  // conv weight + bias
        n += 2 * static_cast<std::size_t>(w);           // bn gain + bias
        in = w;
    }
    n += static_cast<std::size_t>(spec.classes) * spec.dense_in() + spec.classes;
    return n;
}

// He fan-in normal init for conv/dense, BatchNorm gain=1 bias=0.
template <typename T = float>
ModelParams<T> build_model(const ModelSpec& spec, std::uint64_t seed) {
    ModelParams<T> p;
    p.image_channels = spec.image_channels;
    p.classes = spec.classes;
    Rng rng = make_rng(seed, 0x6d6f64656cULL);
    int in = spec.image_channels;
    for (int w : spec.conv_widths) {
        ConvBlockParams<T> blk;
        blk.w = Tensor<T>({w, in, 3, 3});
        T std_w = static_cast<T>(std::sqrt(2.0 / (in * 9.0)));
        for (std::size_t i = 0; i < blk.w.size(); ++i) blk.w[i] = static_cast<T>(normal(rng)) * std_w;
        blk.b = Tensor<T>({w});
        blk.bn_gain = Tensor<T>({w});
        blk.bn_gain.fill(T(1));
        blk.bn_bias = Tensor<T>({w});
        blk.bn_mean = Tensor<T>({w});
        blk.bn_var = Tensor<T>({w});
        blk.bn_var.fill(T(1));
        p.blocks.push_back(std::move(blk));
        in = w;
    }
    p.dense_w = Tensor<T>({spec.classes, spec.dense_in()});
    T std_d = static_cast<T>(std::sqrt(2.0 / spec.dense_in()));
    for (std::size_t i = 0; i < p.dense_w.size(); ++i) p.dense_w[i] = static_cast<T>(normal(rng)) * std_d;
    p.dense_b = Tensor<T>({spec.classes});
    return p;
}

template <typename T = float>
ModelParams<T> build_model(int u, int image_channels, int classes, std::uint64_t seed) {
    return build_model<T>(ModelSpec::from_u(u, image_channels, classes), seed);
}

template <typename T>
ModelParams<T> zeros_like(const ModelParams<T>& p) {
    ModelParams<T> z = p;
    for (auto* t : all_tensors(z)) t->fill(T(0));
    return z;
}

// ---------------------------------------------------------------------------
// Layer kernels. All convs are 3x3 pad 1 stride 1; pools are 2x2 stride 2.
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    const int B = x.shape()[0], C = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
    const int N = w.shape()[0];
    if (w.shape()[1] != C)
        throw std::runtime_error("conv2d: input channels " + std::to_string(C) +
                                 " do not match weight " + shape_str(w.shape()));
    Tensor<T> y({B, N, H, W});
    for (int bi = 0; bi < B; ++bi)
        for (int n = 0; n < N; ++n) {
            T* yp = &y.at4(bi, n, 0, 0);
            for (int i = 0; i < H * W; ++i) yp[i] = b[n];
            for (int c = 0; c < C; ++c) {
                const T* xp = &x.at4(bi, c, 0, 0);
                const T* wp = &w.at4(n, c, 0, 0);
                for (int kh = 0; kh < 3; ++kh)
                    for (int kw = 0; kw < 3; ++kw) {
                        const T wv = wp[kh * 3 + kw];
                        if (wv == T(0)) continue;
                        const int dy0 = kh - 1, dx0 = kw - 1;
                        const int h0 = std::max(0, -dy0), h1 = std::min(H, H - dy0);
                        const int w0 = std::max(0, -dx0), w1 = std::min(W, W - dx0);
                        for (int h = h0; h < h1; ++h) {
                            const T* xr = xp + (h + dy0) * W + dx0;
                            T* yr = yp + h * W;
                            for (int ww = w0; ww < w1; ++ww) yr[ww] += wv * xr[ww];
                        }
                    }
            }
        }
    return y;
}

template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy,
                     Tensor<T>& dx, Tensor<T>& dw, Tensor<T>& db) {
    const int B = x.shape()[0], C = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
    const int N = w.shape()[0];
    dx = Tensor<T>(x.shape());
    dw = Tensor<T>(w.shape());
    db = Tensor<T>(w.shape()[0] > 0 ? std::vector<int>{N} : std::vector<int>{0});
    for (int bi = 0; bi < B; ++bi)
        for (int n = 0; n < N; ++n) {
            const T* dyp = &dy.at4(bi, n, 0, 0);
            T acc = 0;
            for (int i = 0; i < H * W; ++i) acc += dyp[i];
            db[n] += acc;
            for (int c = 0; c < C; ++c) {
                const T* xp = &x.at4(bi, c, 0, 0);
                T* dxp = &dx.at4(bi, c, 0, 0);
                T* dwp = &dw.at4(n, c, 0, 0);
                const T* wp = &w.at4(n, c, 0, 0);
                for (int kh = 0; kh < 3; ++kh)
                    for (int kw = 0; kw < 3; ++kw) {
                        const int dy0 = kh - 1, dx0 = kw - 1;
                        const int h0 = std::max(0, -dy0), h1 = std::min(H, H - dy0);
                        const int w0 = std::max(0, -dx0), w1 = std::min(W, W - dx0);
                        T wgrad = 0;
                        const T wv = wp[kh * 3 + kw];
                        for (int h = h0; h < h1; ++h) {
                            const T* xr = xp + (h + dy0) * W + dx0;
                            T* dxr = dxp + (h + dy0) * W + dx0;
                            const T* dyr = dyp + h * W;
                            for (int ww = w0; ww < w1; ++ww) {
                                wgrad += xr[ww] * dyr[ww];
                                dxr[ww] += wv * dyr[ww];
                            }
                        }
                        dwp[kh * 3 + kw] += wgrad;
                    }
            }
        }
}

template <typename T>
struct BnCache {
    Tensor<T> xhat;
    std::vector<T> invstd;  // per channel
};

struct BnConfig {
    double momentum = 0.1;
    double eps = 1e-5;
};

template <typename T>
Tensor<T> batchnorm_forward(const Tensor<T>& x, ConvBlockParams<T>& blk, Mode mode,
                            BnCache<T>* cache, const BnConfig& cfg = {}) {
    const int B = x.shape()[0], C = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
    const std::size_t m = static_cast<std::size_t>(B) * H * W;
    Tensor<T> y(x.shape());
    if (cache) {
        cache->xhat = Tensor<T>(x.shape());
        cache->invstd.assign(C, T(0));
    }
    for (int c = 0; c < C; ++c) {
        T mean, invstd;
        if (mode == Mode::train) {
            double sum = 0, sq = 0;
            for (int bi = 0; bi < B; ++bi) {
                const T* xp = &x.at4(bi, c, 0, 0);
                for (int i = 0; i < H * W; ++i) {
                    sum += xp[i];
                    sq += double(xp[i]) * xp[i];
                }
            }
            const double mu = sum / double(m);
            const double var = std::max(0.0, sq / double(m) - mu * mu);
            mean = static_cast<T>(mu);
            invstd = static_cast<T>(1.0 / std::sqrt(var + cfg.eps));
            blk.bn_mean[c] = static_cast<T>((1.0 - cfg.momentum) * blk.bn_mean[c] + cfg.momentum * mu);
            blk.bn_var[c] = static_cast<T>((1.0 - cfg.momentum) * blk.bn_var[c] + cfg.momentum * var);
        } else {
            mean = blk.bn_mean[c];
            invstd = static_cast<T>(1.0 / std::sqrt(double(blk.bn_var[c]) + cfg.eps));
        }
        const T g = blk.bn_gain[c], bb = blk.bn_bias[c];
        for (int bi = 0; bi < B; ++bi) {
            const T* xp = &x.at4(bi, c, 0, 0);
            T* yp = &y.at4(bi, c, 0, 0);
            T* xh = cache ? &cache->xhat.at4(bi, c, 0, 0) : nullptr;
            for (int i = 0; i < H * W; ++i) {
                const T xhat = (xp[i] - mean) * invstd;
                if (xh) xh[i] = xhat;
                yp[i] = g * xhat + bb;
            }
        }
        if (cache) cache->invstd[c] = invstd;
    }
    return y;
}

template <typename T>
Tensor<T> batchnorm_backward(const Tensor<T>& dy, const BnCache<T>& cache,
                             const ConvBlockParams<T>& blk, Tensor<T>& dgain, Tensor<T>& dbias) {
    const int B = dy.shape()[0], C = dy.shape()[1], H = dy.shape()[2], W = dy.shape()[3];
    const double m = static_cast<double>(B) * H * W;
    Tensor<T> dx(dy.shape());
    dgain = Tensor<T>({C});
    dbias = Tensor<T>({C});
    for (int c = 0; c < C; ++c) {
        double sum_dy = 0, sum_dy_xhat = 0;
        for (int bi = 0; bi < B; ++bi) {
            const T* dyp = &dy.at4(bi, c, 0, 0);
            const T* xh = &cache.xhat.at4(bi, c, 0, 0);
            for (int i = 0; i < H * W; ++i) {
                sum_dy += dyp[i];
                sum_dy_xhat += double(dyp[i]) * xh[i];
            }
        }
        dgain[c] = static_cast<T>(sum_dy_xhat);
        dbias[c] = static_cast<T>(sum_dy);
        const double k = double(blk.bn_gain[c]) * cache.invstd[c];
        const double mean_dy = sum_dy / m, mean_dy_xhat = sum_dy_xhat / m;
        for (int bi = 0; bi < B; ++bi) {
            const T* dyp = &dy.at4(bi, c, 0, 0);
            const T* xh = &cache.xhat.at4(bi, c, 0, 0);
            T* dxp = &dx.at4(bi, c, 0, 0);
            for (int i = 0; i < H * W; ++i)
                dxp[i] = static_cast<T>(k * (dyp[i] - mean_dy - xh[i] * mean_dy_xhat));
        }
    }
    return dx;
}

template <typename T>
Tensor<T> maxpool2_forward(const Tensor<T>& x, std::vector<int>& argmax) {
    const int B = x.shape()[0], C = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
    if (H % 2 || W % 2) throw std::runtime_error("maxpool: odd spatial size " + shape_str(x.shape()));
    Tensor<T> y({B, C, H / 2, W / 2});
    argmax.assign(y.size(), 0);
    std::size_t o = 0;
    for (int bi = 0; bi < B; ++bi)
        for (int c = 0; c < C; ++c) {
            const T* xp = &x.at4(bi, c, 0, 0);
            for (int h = 0; h < H; h += 2)
                for (int w = 0; w < W; w += 2) {
                    int best = h * W + w;
                    const int cand[3] = {h * W + w + 1, (h + 1) * W + w, (h + 1) * W + w + 1};
                    for (int k = 0; k < 3; ++k)
                        if (xp[cand[k]] > xp[best]) best = cand[k];
                    y[o] = xp[best];
                    argmax[o] = best;
                    ++o;
                }
        }
    return y;
}

template <typename T>
Tensor<T> maxpool2_backward(const Tensor<T>& dy, const std::vector<int>& argmax,
                            const std::vector<int>& in_shape) {
    Tensor<T> dx(in_shape);
    const int B = dy.shape()[0], C = dy.shape()[1];
    const int HW = in_shape[2] * in_shape[3];
    const int oHW = dy.shape()[2] * dy.shape()[3];
    std::size_t o = 0;
    for (int bi = 0; bi < B; ++bi)
        for (int c = 0; c < C; ++c) {
            T* dxp = dx.data() + (static_cast<std::size_t>(bi) * C + c) * HW;
            for (int i = 0; i < oHW; ++i, ++o) dxp[argmax[o]] += dy[o];
        }
    return dx;
}

// ---------------------------------------------------------------------------
// Whole-model forward / backward
// ---------------------------------------------------------------------------

template <typename T>
struct BlockCache {
    Tensor<T> x;       // block input
    Tensor<T> scaled;  // conv output after Scaler (BatchNorm input)
    BnCache<T> bn;
    Tensor<T> relu_out;
    std::vector<int> pool_argmax;
    std::vector<int> relu_shape;
};

template <typename T>
struct ForwardCache {
    Mode mode = Mode::train;
    T scale = T(1);  // 1 / r_c
    std::vector<BlockCache<T>> blocks;
    Tensor<T> gap_in;     // last block relu output
    Tensor<T> dense_in;   // (B, C) after global average pool
    Tensor<T> logits;     // (B, classes)
    Tensor<T> probs;      // softmax(logits)
};

// Scaler rate r_c = N_c / N; the Scaler multiplies activations by 1 / r_c.
template <typename T>
Tensor<T> forward(ModelParams<T>& params, const Tensor<T>& images, double r_c, Mode mode,
                  ForwardCache<T>* cache = nullptr, const BnConfig& bn_cfg = {}) {
    if (r_c <= 0.0 || r_c > 1.0) throw std::invalid_argument("forward: scaler rate must be in (0,1]");
    if (images.shape().size() != 4 || images.shape()[1] != params.image_channels)
        throw std::runtime_error("forward: bad input shape " + shape_str(images.shape()));
    const T scale = static_cast<T>(1.0 / r_c);
    if (cache) {
        cache->mode = mode;
        cache->scale = scale;
        cache->blocks.assign(params.blocks.size(), {});
    }
    Tensor<T> x = images;
    const int last = static_cast<int>(params.blocks.size()) - 1;
    for (int b = 0; b <= last; ++b) {
        auto& blk = params.blocks[b];
        BlockCache<T>* bc = cache ? &cache->blocks[b] : nullptr;
        if (bc) bc->x = x;
        Tensor<T> y = conv2d_forward(x, blk.w, blk.b);
        if (scale != T(1))
            for (std::size_t i = 0; i < y.size(); ++i) y[i] *= scale;
        if (bc) bc->scaled = y;
        y = batchnorm_forward(y, blk, mode, bc ? &bc->bn : nullptr, bn_cfg);
        for (std::size_t i = 0; i < y.size(); ++i)
            if (y[i] < T(0)) y[i] = T(0);
        if (bc) {
            bc->relu_out = y;
            bc->relu_shape = y.shape();
        }
        if (b < last) {
            std::vector<int> argmax;
            y = maxpool2_forward(y, argmax);
            if (bc) bc->pool_argmax = std::move(argmax);
        }
        x = std::move(y);
    }
    if (cache) cache->gap_in = x;
    // global average pool
    const int B = x.shape()[0], C = x.shape()[1], HW = x.shape()[2] * x.shape()[3];
    Tensor<T> flat({B, C});
    for (int bi = 0; bi < B; ++bi)
        for (int c = 0; c < C; ++c) {
            const T* xp = &x.at4(bi, c, 0, 0);
            T acc = 0;
            for (int i = 0; i < HW; ++i) acc += xp[i];
            flat.at2(bi, c) = acc / static_cast<T>(HW);
        }
    if (cache) cache->dense_in = flat;
    if (params.dense_w.shape()[1] != C)
        throw std::runtime_error("forward: dense input mismatch");
    Tensor<T> logits({B, params.classes});
    for (int bi = 0; bi < B; ++bi)
        for (int k = 0; k < params.classes; ++k) {
            T acc = params.dense_b[k];
            const T* wp = &params.dense_w.at2(k, 0);
            const T* fp = &flat.at2(bi, 0);
            for (int c = 0; c < C; ++c) acc += wp[c] * fp[c];
            logits.at2(bi, k) = acc;
        }
    if (cache) cache->logits = logits;
    return logits;
}

template <typename T>
double cross_entropy(const Tensor<T>& logits, const std::vector<int>& labels,
                     Tensor<T>* probs_out = nullptr) {
    const int B = logits.shape()[0], C = logits.shape()[1];
    if (static_cast<int>(labels.size()) != B) throw std::runtime_error("loss: label count mismatch");
    Tensor<T> probs(logits.shape());
    double loss = 0;
    for (int bi = 0; bi < B; ++bi) {
        if (labels[bi] < 0 || labels[bi] >= C)
            throw std::runtime_error("loss: label " + std::to_string(labels[bi]) + " out of range");
        const T* lp = &logits.at2(bi, 0);
        T mx = lp[0];
        for (int k = 1; k < C; ++k) mx = std::max(mx, lp[k]);
        double z = 0;
        for (int k = 0; k < C; ++k) z += std::exp(double(lp[k] - mx));
        for (int k = 0; k < C; ++k) probs.at2(bi, k) = static_cast<T>(std::exp(double(lp[k] - mx)) / z);
        loss -= double(lp[labels[bi]] - mx) - std::log(z);
    }
    if (probs_out) *probs_out = std::move(probs);
    return loss / B;
}

// Backward pass from an upstream logits gradient; used by both the
// cross-entropy loss and the distillation loss.
template <typename T>
void backward_from_dlogits(ModelParams<T>& params, ForwardCache<T>& cache,
                           const Tensor<T>& dlogits, ModelParams<T>& grads) {
    if (cache.mode != Mode::train) throw std::runtime_error("backward: cache must come from a train-mode forward");
    const int B = cache.logits.shape()[0], C = cache.logits.shape()[1];
    grads = zeros_like(params);
    // dense
    const int F = params.dense_w.shape()[1];
    Tensor<T> dflat({B, F});
    for (int bi = 0; bi < B; ++bi)
        for (int k = 0; k < C; ++k) {
            const T d = dlogits.at2(bi, k);
            grads.dense_b[k] += d;
            T* gw = &grads.dense_w.at2(k, 0);
            const T* fp = &cache.dense_in.at2(bi, 0);
            T* dfp = &dflat.at2(bi, 0);
            const T* wp = &params.dense_w.at2(k, 0);
            for (int c = 0; c < F; ++c) {
                gw[c] += d * fp[c];
                dfp[c] += d * wp[c];
            }
        }
    // global average pool
    const auto& gin = cache.gap_in;
    const int HW = gin.shape()[2] * gin.shape()[3];
    Tensor<T> dy(gin.shape());
    for (int bi = 0; bi < B; ++bi)
        for (int c = 0; c < F; ++c) {
            const T d = dflat.at2(bi, c) / static_cast<T>(HW);
            T* dp = &dy.at4(bi, c, 0, 0);
            for (int i = 0; i < HW; ++i) dp[i] = d;
        }
    // conv blocks in reverse
    const int last = static_cast<int>(params.blocks.size()) - 1;
    for (int b = last; b >= 0; --b) {
        auto& bc = cache.blocks[b];
        auto& blk = params.blocks[b];
        auto& gblk = grads.blocks[b];
        if (b < last) dy = maxpool2_backward(dy, bc.pool_argmax, bc.relu_shape);
        for (std::size_t i = 0; i < dy.size(); ++i)
            if (bc.relu_out[i] <= T(0)) dy[i] = T(0);
        dy = batchnorm_backward(dy, bc.bn, blk, gblk.bn_gain, gblk.bn_bias);
        if (cache.scale != T(1))
            for (std::size_t i = 0; i < dy.size(); ++i) dy[i] *= cache.scale;
        Tensor<T> dx;
        conv2d_backward(bc.x, blk.w, dy, dx, gblk.w, gblk.b);
        dy = std::move(dx);
    }
}

// Mean cross-entropy over the batch plus full backward pass through the cache.
template <typename T>
double loss_and_backward(ModelParams<T>& params, ForwardCache<T>& cache,
                         const std::vector<int>& labels, ModelParams<T>& grads) {
    const int B = cache.logits.shape()[0], C = cache.logits.shape()[1];
    const double loss = cross_entropy(cache.logits, labels, &cache.probs);
    Tensor<T> dlogits(cache.logits.shape());
    for (int bi = 0; bi < B; ++bi)
        for (int k = 0; k < C; ++k)
            dlogits.at2(bi, k) = (cache.probs.at2(bi, k) - (labels[bi] == k ? T(1) : T(0))) / static_cast<T>(B);
    backward_from_dlogits(params, cache, dlogits, grads);
    return loss;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <typename T>
struct AdamState {
    ModelParams<T> m;
    ModelParams<T> v;
    long t = 0;

    static AdamState init(const ModelParams<T>& p) { return {zeros_like(p), zeros_like(p), 0}; }
    bool shapes_match(const ModelParams<T>& p) const {
        auto a = trainable_tensors(m), b = trainable_tensors(p);
        if (a.size() != b.size()) return false;
        for (std::size_t i = 0; i < a.size(); ++i)
            if (a[i]->shape() != b[i]->shape()) return false;
        return true;
    }
};

template <typename T>
void adam_step(ModelParams<T>& params, const ModelParams<T>& grads, AdamState<T>& state,
               const AdamConfig& cfg = {}) {
    state.t += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    auto ps = trainable_tensors(params);
    auto gs = trainable_tensors(grads);
    auto ms = trainable_tensors(state.m);
    auto vs = trainable_tensors(state.v);
    for (std::size_t ti = 0; ti < ps.size(); ++ti) {
        Tensor<T>& p = *ps[ti];
        const Tensor<T>& g = *gs[ti];
        Tensor<T>& m = *ms[ti];
        Tensor<T>& v = *vs[ti];
        if (!p.same_shape(g) || !p.same_shape(m))
            throw std::runtime_error("adam: shape mismatch at tensor " + std::to_string(ti));
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double gi = g[i];
            if (!std::isfinite(gi))
                throw std::runtime_error("adam: non-finite gradient at tensor " + std::to_string(ti) +
                                         " index " + std::to_string(i));
            m[i] = static_cast<T>(cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi);
            v[i] = static_cast<T>(cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi);
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p[i] = static_cast<T>(p[i] - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
        }
    }
}

}  // namespace hfl
