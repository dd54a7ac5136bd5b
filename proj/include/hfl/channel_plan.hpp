#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "hfl/nn.hpp"
#include "hfl/rng.hpp"

namespace hfl {

// Taxonomy axes: coverage (One group / Groups / Unique), dynamics
// (Fixed / reSampled), policy (subMatrix / Random). FULL means the client
// model has the server's size.
enum class StrategyKind { OFM, OFR, OSM, OSR, GFM, GFR, GSR, UFR, USR, FULL };

inline const char* to_string(StrategyKind k) {
    switch (k) {
        case StrategyKind::OFM: return "OFM";
        case StrategyKind::OFR: return "OFR";
        case StrategyKind::OSM: return "OSM";
        case StrategyKind::OSR: return "OSR";
        case StrategyKind::GFM: return "GFM";
        case StrategyKind::GFR: return "GFR";
        case StrategyKind::GSR: return "GSR";
        case StrategyKind::UFR: return "UFR";
        case StrategyKind::USR: return "USR";
        case StrategyKind::FULL: return "FULL";
    }
    return "?";
}

inline StrategyKind strategy_from_string(const std::string& s) {
    for (StrategyKind k : {StrategyKind::OFM, StrategyKind::OFR, StrategyKind::OSM, StrategyKind::OSR,
                           StrategyKind::GFM, StrategyKind::GFR, StrategyKind::GSR, StrategyKind::UFR,
                           StrategyKind::USR, StrategyKind::FULL})
        if (s == to_string(k)) return k;
    throw std::invalid_argument("unknown strategy kind: " + s);
}

inline bool is_fixed(StrategyKind k) {
    return k == StrategyKind::OFM || k == StrategyKind::OFR || k == StrategyKind::GFM ||
           k == StrategyKind::GFR || k == StrategyKind::UFR || k == StrategyKind::FULL;
}

inline bool is_group_kind(StrategyKind k) {
    return k == StrategyKind::GFM || k == StrategyKind::GFR || k == StrategyKind::GSR;
}

inline bool is_submatrix(StrategyKind k) {
    return k == StrategyKind::OFM || k == StrategyKind::OSM || k == StrategyKind::GFM;
}

struct StrategySpec {
    StrategyKind kind = StrategyKind::FULL;
    int group_count = 4;
    std::uint64_t seed = 0;
    bool layerwise = true;     // false: independent per-layer selection (ablation mode)
    bool osm_cycle = true;     // OSM: cycle the per-round group (default) or sample it
};

// Per-client, per-round channel selection. out[b] indexes into the server's
// output channels of conv block b; in[b] equals out[b-1] under layer-wise
// coupling (block 0 always takes all image channels). The dense layer keeps
// all classes and takes out.back() as input columns.
struct ChannelPlan {
    std::vector<std::vector<int>> out;
    std::vector<std::vector<int>> in;

    const std::vector<int>& dense_in() const { return out.back(); }

    bool operator==(const ChannelPlan& o) const { return out == o.out && in == o.in; }
};

// Federation-side context for plan construction.
struct PlanContext {
    ModelSpec server;
    int client_u = 0;       // client complexity factor
    int server_u = 0;
    int client_index = 0;   // index among small clients (group/UFR schedules)
    int num_clients = 1;    // federation size (UFR set count)
    int group = 0;          // group id in {0..group_count-1} for G-kinds
};

namespace detail {

inline std::vector<int> range_vec(int lo, int hi) {  // [lo, hi)
    std::vector<int> v(hi - lo);
    for (int i = lo; i < hi; ++i) v[i - lo] = i;
    return v;
}

// Half-selection per group with odd/even block alternation. Group O always
// takes the first half, R the second; P and Q alternate so that the output
// half of block b matches the required input half of block b+1.
inline bool group_takes_second_half(int group, int block) {
    const bool odd_block = (block % 2 == 0);  // blocks are 0-based; block 0 is "layer 1"
    switch (group) {
        case 0: return false;                 // O
        case 1: return !odd_block;            // P: first half on odd layers
        case 2: return odd_block;             // Q
        case 3: return true;                  // R
    }
    throw std::invalid_argument("group id out of range");
}

// Sorted channel ids of one half of a (possibly permuted) channel ordering.
inline std::vector<int> half_of(const std::vector<int>& order, bool second) {
    const int h = static_cast<int>(order.size()) / 2;
    std::vector<int> v(order.begin() + (second ? h : 0), order.begin() + (second ? 2 * h : h));
    std::sort(v.begin(), v.end());
    return v;
}

}  // namespace detail

inline double binomial(int n, int k) {
    double r = 1;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

// Expected number of rounds between identical plans for a client.
inline double repeat_frequency(const StrategySpec& strategy, int server_width, int client_width,
                               int num_clients = 1) {
    if (client_width > server_width) throw std::invalid_argument("repeat_frequency: client wider than server");
    switch (strategy.kind) {
        case StrategyKind::OFM:
        case StrategyKind::OFR:
        case StrategyKind::GFM:
        case StrategyKind::GFR:
        case StrategyKind::FULL:
            return 1.0;
        case StrategyKind::UFR:
            return static_cast<double>(num_clients);
        case StrategyKind::OSM:
            return static_cast<double>(strategy.group_count);
        case StrategyKind::OSR:
        case StrategyKind::GSR:
        case StrategyKind::USR:
            return binomial(server_width, client_width);
    }
    return 1.0;
}

inline ChannelPlan make_plan(const StrategySpec& strategy, int client_id, long round_t,
                             const PlanContext& ctx) {
    const auto& widths = ctx.server.conv_widths;
    const int blocks = static_cast<int>(widths.size());
    ChannelPlan plan;
    plan.out.resize(blocks);
    plan.in.resize(blocks);

    if (strategy.kind == StrategyKind::FULL || ctx.client_u == ctx.server_u) {
        for (int b = 0; b < blocks; ++b) plan.out[b] = detail::range_vec(0, widths[b]);
    } else {
        if (ctx.client_u > ctx.server_u)
            throw std::invalid_argument("make_plan: client_u exceeds server_u");
        const bool needs_half = is_group_kind(strategy.kind) || strategy.kind == StrategyKind::OSM ||
                                strategy.kind == StrategyKind::OFM;
        if (needs_half && ctx.client_u * 2 != ctx.server_u)
            throw std::invalid_argument("make_plan: submatrix/group kinds require client_u = server_u/2");

        for (int b = 0; b < blocks; ++b) {
            const int N = widths[b];
            const int Nc = (N / ctx.server_u) * ctx.client_u;
            switch (strategy.kind) {
                case StrategyKind::OFM:
                    plan.out[b] = detail::range_vec(0, Nc);
                    break;
                case StrategyKind::OFR: {
                    Rng rng = make_rng(strategy.seed, 1, b);
                    plan.out[b] = sample_sorted_subset(rng, N, Nc);
                    break;
                }
                case StrategyKind::OSR: {
                    Rng rng = make_rng(strategy.seed, 2, static_cast<std::uint64_t>(round_t), b);
                    plan.out[b] = sample_sorted_subset(rng, N, Nc);
                    break;
                }
                case StrategyKind::OSM: {
                    int g;
                    if (strategy.osm_cycle) {
                        g = static_cast<int>(round_t % strategy.group_count);
                    } else {
                        Rng rng = make_rng(strategy.seed, 3, static_cast<std::uint64_t>(round_t));
                        g = uniform_int(rng, 0, strategy.group_count - 1);
                    }
                    const bool second = detail::group_takes_second_half(g, b);
                    plan.out[b] = detail::range_vec(second ? N - Nc : 0, second ? N : Nc);
                    break;
                }
                case StrategyKind::GFM: {
                    const bool second = detail::group_takes_second_half(ctx.group, b);
                    plan.out[b] = detail::range_vec(second ? N - Nc : 0, second ? N : Nc);
                    break;
                }
                case StrategyKind::GFR:
                case StrategyKind::GSR: {
                    // random half-partition of the channels, shared by the 4 groups
                    Rng rng = strategy.kind == StrategyKind::GFR
                                  ? make_rng(strategy.seed, 4, b)
                                  : make_rng(strategy.seed, 5, static_cast<std::uint64_t>(round_t), b);
                    const auto order = shuffled_range(rng, N);
                    plan.out[b] = detail::half_of(order, detail::group_takes_second_half(ctx.group, b));
                    break;
                }
                case StrategyKind::USR: {
                    Rng rng = make_rng(strategy.seed, 6, static_cast<std::uint64_t>(round_t), client_id, b);
                    plan.out[b] = sample_sorted_subset(rng, N, Nc);
                    break;
                }
                case StrategyKind::UFR: {
                    // C fixed channel-set families, cyclically shifted over rounds
                    const int family = static_cast<int>((ctx.client_index + round_t) % ctx.num_clients);
                    Rng rng = make_rng(strategy.seed, 7, family, b);
                    plan.out[b] = sample_sorted_subset(rng, N, Nc);
                    break;
                }
                case StrategyKind::FULL:
                    break;  // handled above
            }
        }
    }

    plan.in[0] = detail::range_vec(0, ctx.server.image_channels);
    for (int b = 1; b < blocks; ++b) plan.in[b] = plan.out[b - 1];
    if (!strategy.layerwise) {
        // ablation mode: draw input channels independently of the previous block
        for (int b = 1; b < blocks; ++b) {
            const int M = widths[b - 1];
            const int Mc = static_cast<int>(plan.out[b - 1].size());
            Rng rng = make_rng(strategy.seed, 8, static_cast<std::uint64_t>(round_t), client_id, b);
            plan.in[b] = sample_sorted_subset(rng, M, Mc);
        }
    }
    return plan;
}

inline void validate_plan(const ChannelPlan& plan, const ModelSpec& server) {
    const auto& widths = server.conv_widths;
    if (plan.out.size() != widths.size() || plan.in.size() != widths.size())
        throw std::runtime_error("plan: wrong block count");
    for (std::size_t b = 0; b < widths.size(); ++b) {
        const auto check = [&](const std::vector<int>& idx, int limit, const char* what) {
            if (idx.empty()) throw std::runtime_error(std::string("plan: empty ") + what);
            for (std::size_t i = 0; i < idx.size(); ++i) {
                if (idx[i] < 0 || idx[i] >= limit)
                    throw std::runtime_error(std::string("plan: ") + what + " index out of range");
                if (i && idx[i] <= idx[i - 1])
                    throw std::runtime_error(std::string("plan: ") + what + " not strictly increasing");
            }
        };
        check(plan.out[b], widths[b], "out");
        check(plan.in[b], b == 0 ? server.image_channels : widths[b - 1], "in");
    }
}

// Copies the selected server cells into a client-sized model: client cell
// (i_c, j_c) maps to server cell (out[i_c], in[j_c]).
template <typename T>
ModelParams<T> extract_submodel(const ModelParams<T>& server, const ChannelPlan& plan) {
    ModelParams<T> client;
    client.image_channels = server.image_channels;
    client.classes = server.classes;
    for (std::size_t b = 0; b < server.blocks.size(); ++b) {
        const auto& sb = server.blocks[b];
        const auto& out = plan.out[b];
        const auto& in = plan.in[b];
        const int N = sb.w.shape()[0], M = sb.w.shape()[1];
        for (int i : out)
            if (i >= N) throw std::runtime_error("extract: out index exceeds server width");
        for (int j : in)
            if (j >= M) throw std::runtime_error("extract: in index exceeds server width");
        ConvBlockParams<T> cb;
        cb.w = Tensor<T>({static_cast<int>(out.size()), static_cast<int>(in.size()), 3, 3});
        for (std::size_t i = 0; i < out.size(); ++i)
            for (std::size_t j = 0; j < in.size(); ++j)
                for (int k = 0; k < 9; ++k)
                    cb.w.at4(static_cast<int>(i), static_cast<int>(j), k / 3, k % 3) =
                        sb.w.at4(out[i], in[j], k / 3, k % 3);
        const auto slice = [&](const Tensor<T>& v) {
            Tensor<T> r({static_cast<int>(out.size())});
            for (std::size_t i = 0; i < out.size(); ++i) r[i] = v[out[i]];
            return r;
        };
        cb.b = slice(sb.b);
        cb.bn_gain = slice(sb.bn_gain);
        cb.bn_bias = slice(sb.bn_bias);
        cb.bn_mean = slice(sb.bn_mean);
        cb.bn_var = slice(sb.bn_var);
        client.blocks.push_back(std::move(cb));
    }
    const auto& din = plan.dense_in();
    client.dense_w = Tensor<T>({server.classes, static_cast<int>(din.size())});
    for (int k = 0; k < server.classes; ++k)
        for (std::size_t j = 0; j < din.size(); ++j)
            client.dense_w.at2(k, static_cast<int>(j)) = server.dense_w.at2(k, din[j]);
    client.dense_b = server.dense_b;
    return client;
}

template <typename T>
struct ClientUpdate {
    ChannelPlan plan;
    ModelParams<T> params;
    double weight = 1.0;
};

// Coverage-aware weighted averaging: every server cell covered by at least
// one client becomes the weighted mean of the covering clients' values;
// uncovered cells keep their previous value. With all-FULL plans and equal
// weights this is exactly FedAvg parameter averaging.
template <typename T>
ModelParams<T> integrate(const ModelParams<T>& server, const std::vector<ClientUpdate<T>>& updates,
                         bool* warned_empty = nullptr) {
    if (updates.empty()) {
        if (warned_empty) *warned_empty = true;
        return server;
    }
    ModelParams<T> acc = zeros_like(server);
    ModelParams<double> wsum_d;  // weight accumulator with the server's shapes
    {
        ModelParams<T> z = zeros_like(server);
        wsum_d = z.template cast<double>();
    }
    ModelParams<double> vsum = wsum_d;  // value*weight accumulator
    for (const auto& upd : updates) {
        const double w = upd.weight;
        if (w < 0) throw std::runtime_error("integrate: negative weight");
        for (std::size_t b = 0; b < server.blocks.size(); ++b) {
            const auto& out = upd.plan.out[b];
            const auto& in = upd.plan.in[b];
            const auto& cb = upd.params.blocks[b];
            if (cb.w.shape()[0] != static_cast<int>(out.size()) ||
                cb.w.shape()[1] != static_cast<int>(in.size()))
                throw std::runtime_error("integrate: update shape inconsistent with its plan");
            auto& vw = vsum.blocks[b];
            auto& ww = wsum_d.blocks[b];
            for (std::size_t i = 0; i < out.size(); ++i) {
                for (std::size_t j = 0; j < in.size(); ++j)
                    for (int k = 0; k < 9; ++k) {
                        vw.w.at4(out[i], in[j], k / 3, k % 3) +=
                            w * cb.w.at4(static_cast<int>(i), static_cast<int>(j), k / 3, k % 3);
                        ww.w.at4(out[i], in[j], k / 3, k % 3) += w;
                    }
                const int oi = out[i];
                vw.b[oi] += w * cb.b[i];
                ww.b[oi] += w;
                vw.bn_gain[oi] += w * cb.bn_gain[i];
                ww.bn_gain[oi] += w;
                vw.bn_bias[oi] += w * cb.bn_bias[i];
                ww.bn_bias[oi] += w;
                vw.bn_mean[oi] += w * cb.bn_mean[i];
                ww.bn_mean[oi] += w;
                vw.bn_var[oi] += w * cb.bn_var[i];
                ww.bn_var[oi] += w;
            }
        }
        const auto& din = upd.plan.dense_in();
        for (int k = 0; k < server.classes; ++k) {
            for (std::size_t j = 0; j < din.size(); ++j) {
                vsum.dense_w.at2(k, din[j]) += w * upd.params.dense_w.at2(k, static_cast<int>(j));
                wsum_d.dense_w.at2(k, din[j]) += w;
            }
            vsum.dense_b[k] += w * upd.params.dense_b[k];
            wsum_d.dense_b[k] += w;
        }
    }
    ModelParams<T> result = server;
    auto rt = all_tensors(result);
    auto vt = all_tensors(vsum);
    auto wt = all_tensors(wsum_d);
    for (std::size_t ti = 0; ti < rt.size(); ++ti)
        for (std::size_t i = 0; i < rt[ti]->size(); ++i)
            if ((*wt[ti])[i] > 0) (*rt[ti])[i] = static_cast<T>((*vt[ti])[i] / (*wt[ti])[i]);
    return result;
}

}  // namespace hfl
