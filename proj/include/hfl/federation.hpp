#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hfl/channel_plan.hpp"
#include "hfl/data.hpp"
#include "hfl/nn.hpp"

namespace hfl {

enum class AggWeighting { dataset_size, uniform };

struct FederationConfig {
    int num_clients = 10;
    int num_large_clients = 2;   // clients holding server-sized models
    int server_u = 4;
    int small_u = 2;
    int rounds = 20;
    int local_epochs = 1;
    int batch_size = 32;
    double lr = 1e-3;
    StrategySpec strategy;
    AggWeighting weighting = AggWeighting::dataset_size;
    bool use_augmentation = false;
    bool reset_optimizer_each_round = false;
    bool eval_every_round = false;   // per-round test accuracy logging (slower)
    std::uint64_t seed = 0;
};

struct ClientState {
    std::vector<int> shard;        // indices into the training set
    int u = 0;                     // complexity level
    bool large = false;
    int small_index = 0;           // index among small clients (plan context)
    int group = 0;                 // GFM-style group id
    std::optional<AdamState<float>> opt;
};

struct RoundMetrics {
    int round = 0;
    double mean_train_loss = 0;
    double server_acc = -1;
    double mean_client_acc = -1;
    std::vector<double> client_acc;
};

struct ArchivedUpdate {
    ModelParams<float> params;  // the client's final local update
    ChannelPlan plan;
    double r_c = 1.0;
};

struct FederationState {
    ModelSpec spec;
    ModelParams<float> server;
    std::vector<ClientState> clients;
    long round = 0;
    std::vector<RoundMetrics> history;
    std::vector<ArchivedUpdate> archive;  // one entry per client after run_federation
};

inline double evaluate(ModelParams<float>& params, double r_c, const Dataset& testset,
                       int batch_size = 128) {
    if (testset.count() == 0) throw std::invalid_argument("evaluate: empty testset");
    int correct = 0;
    for (int start = 0; start < testset.count(); start += batch_size) {
        const int end = std::min(testset.count(), start + batch_size);
        std::vector<int> idx(end - start);
        std::iota(idx.begin(), idx.end(), start);
        Dataset batch = testset.subset(idx);
        Tensor<float> logits = forward(params, batch.images, r_c, Mode::eval);
        for (int i = 0; i < end - start; ++i) {
            int best = 0;
            for (int k = 1; k < logits.shape()[1]; ++k)
                if (logits.at2(i, k) > logits.at2(i, best)) best = k;
            if (best == batch.labels[i]) ++correct;
        }
    }
    return 100.0 * correct / testset.count();
}

// One local-epoch pass with Adam over a shard, batched in shuffled order.
inline double train_local(ModelParams<float>& params, AdamState<float>& opt, double r_c,
                          const Dataset& train, const std::vector<int>& shard, int epochs,
                          int batch_size, double lr, bool augment_batches, Rng& rng) {
    AdamConfig adam;
    adam.lr = lr;
    double loss_sum = 0;
    long batches = 0;
    for (int e = 0; e < epochs; ++e) {
        std::vector<int> order = shard;
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            const std::size_t end = std::min(order.size(), start + batch_size);
            Dataset batch = train.subset({order.begin() + start, order.begin() + end});
            if (augment_batches) batch.images = augment(batch.images, rng);
            ForwardCache<float> cache;
            forward(params, batch.images, r_c, Mode::train, &cache);
            ModelParams<float> grads;
            const double loss = loss_and_backward(params, cache, batch.labels, grads);
            if (!std::isfinite(loss)) throw std::runtime_error("local training produced non-finite loss");
            adam_step(params, grads, opt, adam);
            loss_sum += loss;
            ++batches;
        }
    }
    return batches ? loss_sum / batches : 0.0;
}

inline FederationState init_federation(const FederationConfig& cfg, const Partition& part,
                                       const ModelSpec& spec) {
    if (static_cast<int>(part.shards.size()) != cfg.num_clients)
        throw std::invalid_argument("init_federation: partition size mismatch");
    FederationState st;
    st.spec = spec;
    st.server = build_model<float>(spec, stream_seed(cfg.seed, 0x736572766572ULL));
    st.clients.resize(cfg.num_clients);
    for (int c = 0; c < cfg.num_clients; ++c) st.clients[c].shard = part.shards[c];

    // clients with the smallest shards get the small model first
    std::vector<int> order(cfg.num_clients);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return part.shards[a].size() < part.shards[b].size();
    });
    const int num_small = cfg.num_clients - cfg.num_large_clients;
    for (int i = 0; i < cfg.num_clients; ++i) {
        ClientState& cs = st.clients[order[i]];
        cs.large = i >= num_small;
        cs.u = cs.large ? cfg.server_u : cfg.small_u;
        if (!cs.large) {
            cs.small_index = i;
            cs.group = i % cfg.strategy.group_count;
        }
    }
    return st;
}

inline PlanContext plan_context(const FederationConfig& cfg, const FederationState& st, int c) {
    PlanContext ctx;
    ctx.server = st.spec;
    ctx.server_u = cfg.server_u;
    ctx.client_u = st.clients[c].u;
    ctx.client_index = st.clients[c].small_index;
    ctx.num_clients = cfg.num_clients;
    ctx.group = st.clients[c].group;
    return ctx;
}

inline void run_round(FederationState& st, const FederationConfig& cfg, const Dataset& train,
                      const Dataset* test = nullptr) {
    std::vector<ClientUpdate<float>> updates;
    RoundMetrics rm;
    rm.round = static_cast<int>(st.round);
    double loss_sum = 0;
    st.archive.assign(cfg.num_clients, {});
    for (int c = 0; c < cfg.num_clients; ++c) {
        ClientState& cs = st.clients[c];
        StrategySpec strat = cs.large ? StrategySpec{StrategyKind::FULL, 4, cfg.strategy.seed}
                                      : cfg.strategy;
        ChannelPlan plan = make_plan(strat, c, st.round, plan_context(cfg, st, c));
        validate_plan(plan, st.spec);
        ModelParams<float> local = extract_submodel(st.server, plan);
        const double r_c = static_cast<double>(plan.out[0].size()) / st.spec.conv_widths[0];

        if (cfg.reset_optimizer_each_round || !cs.opt || !cs.opt->shapes_match(local))
            cs.opt = AdamState<float>::init(local);
        Rng rng = make_rng(cfg.seed, 0x636c69656e74ULL, c, static_cast<std::uint64_t>(st.round));
        loss_sum += train_local(local, *cs.opt, r_c, train, cs.shard, cfg.local_epochs,
                                cfg.batch_size, cfg.lr, cfg.use_augmentation, rng);

        const double w = cfg.weighting == AggWeighting::dataset_size
                             ? static_cast<double>(cs.shard.size())
                             : 1.0;
        st.archive[c] = {local, plan, r_c};
        updates.push_back({std::move(plan), std::move(local), w});
    }
    st.server = integrate(st.server, updates);
    st.round += 1;
    rm.mean_train_loss = loss_sum / cfg.num_clients;
    if (test && cfg.eval_every_round) {
        rm.server_acc = evaluate(st.server, 1.0, *test);
        double acc_sum = 0;
        for (int c = 0; c < cfg.num_clients; ++c) {
            double a = evaluate(st.archive[c].params, st.archive[c].r_c, *test);
            rm.client_acc.push_back(a);
            acc_sum += a;
        }
        rm.mean_client_acc = acc_sum / cfg.num_clients;
    }
    st.history.push_back(std::move(rm));
}

inline FederationState run_federation(const FederationConfig& cfg, const Partition& part,
                                      const Dataset& train, const Dataset* test = nullptr) {
    ModelSpec spec = ModelSpec::from_u(cfg.server_u, train.channels(), train.classes);
    FederationState st = init_federation(cfg, part, spec);
    for (int r = 0; r < cfg.rounds; ++r) run_round(st, cfg, train, test);
    return st;
}

}  // namespace hfl
