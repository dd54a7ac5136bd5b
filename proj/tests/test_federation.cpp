#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "hfl/federation.hpp"

using namespace hfl;

namespace {

TrainTest tiny_data(std::uint64_t seed = 21) {
    return synthetic_dataset(3, 40, 20, 8, 0.25, seed);
}

FederationConfig tiny_cfg(StrategyKind kind, int rounds = 1) {
    FederationConfig cfg;
    cfg.num_clients = 4;
    cfg.num_large_clients = 1;
    cfg.server_u = 4;
    cfg.small_u = 2;
    cfg.rounds = rounds;
    cfg.batch_size = 16;
    cfg.strategy.kind = kind;
    cfg.strategy.seed = 5;
    cfg.seed = 33;
    return cfg;
}

}  // namespace

TEST_CASE("evaluate scores the argmax against labels") {
    TrainTest tt = tiny_data();
    ModelParams<float> zero = build_model<float>(ModelSpec::from_u(1, 1, 3), 2);
    for (auto* t : all_tensors(zero)) t->fill(0);
    for (auto& b : zero.blocks) b.bn_var.fill(1);
    zero.dense_b[1] = 1.0f;  // constant prediction: class 1
    double expect = 0;
    for (int l : tt.test.labels)
        if (l == 1) expect += 1;
    expect = 100.0 * expect / tt.test.count();
    CHECK(evaluate(zero, 1.0, tt.test) == Catch::Approx(expect));
    Dataset empty;
    empty.images = Tensor<float>();
    CHECK_THROWS(evaluate(zero, 1.0, empty));
}

TEST_CASE("client sizing: smallest shards get the small model") {
    TrainTest tt = tiny_data();
    Partition part;
    part.shards = {{0, 1, 2, 3, 4, 5, 6, 7}, {8, 9}, {10, 11, 12}, {13, 14, 15, 16, 17, 18}};
    FederationConfig cfg = tiny_cfg(StrategyKind::USR);
    FederationState st = init_federation(cfg, part, ModelSpec::from_u(4, 1, 3));
    CHECK(st.clients[0].large);  // largest shard
    CHECK_FALSE(st.clients[1].large);
    CHECK(st.clients[1].u == 2);
    CHECK(st.clients[0].u == 4);
    // small clients get distinct indices 0..num_small-1
    std::set<int> idx;
    for (const auto& c : st.clients)
        if (!c.large) idx.insert(c.small_index);
    CHECK(idx == std::set<int>{0, 1, 2});
}

TEST_CASE("one round archives every client with the right geometry") {
    TrainTest tt = tiny_data();
    Partition part = dirichlet_partition(tt.train, 4, 0.85, 3);
    FederationConfig cfg = tiny_cfg(StrategyKind::OFM);
    FederationState st = run_federation(cfg, part, tt.train);
    REQUIRE(st.archive.size() == 4);
    int small = 0, large = 0;
    for (int c = 0; c < 4; ++c) {
        const auto& a = st.archive[c];
        if (st.clients[c].large) {
            CHECK(a.r_c == 1.0);
            CHECK(a.params.conv_widths() == std::vector<int>{4, 8, 16, 32});
            ++large;
        } else {
            CHECK(a.r_c == 0.5);
            CHECK(a.params.conv_widths() == std::vector<int>{2, 4, 8, 16});
            ++small;
        }
    }
    CHECK(large == 1);
    CHECK(small == 3);
    CHECK(st.history.size() == 1);
    CHECK(std::isfinite(st.history[0].mean_train_loss));
}

TEST_CASE("cells uncovered by OFM small clients change only via the large client") {
    TrainTest tt = tiny_data();
    Partition part = dirichlet_partition(tt.train, 4, 0.85, 3);
    FederationConfig cfg = tiny_cfg(StrategyKind::OFM);
    cfg.num_large_clients = 0;  // every client is an OFM prefix half
    ModelSpec spec = ModelSpec::from_u(4, 1, 3);
    FederationState st = init_federation(cfg, part, spec);
    ModelParams<float> before = st.server;
    run_round(st, cfg, tt.train);
    // channel 3 of block 0 lies outside every OFM plan: bias untouched
    CHECK(st.server.blocks[0].b[3] == before.blocks[0].b[3]);
    CHECK(st.server.blocks[0].bn_mean[3] == before.blocks[0].bn_mean[3]);
    // covered channel 0 was trained and integrated
    CHECK(st.server.blocks[0].b[0] != before.blocks[0].b[0]);
}

TEST_CASE("zero rounds returns the freshly built server") {
    TrainTest tt = tiny_data();
    Partition part = dirichlet_partition(tt.train, 4, 0.85, 3);
    FederationConfig cfg = tiny_cfg(StrategyKind::USR, 0);
    FederationState st = run_federation(cfg, part, tt.train);
    CHECK(st.round == 0);
    CHECK(st.history.empty());
    CHECK(st.archive.empty());
    ModelParams<float> fresh = build_model<float>(st.spec, stream_seed(cfg.seed, 0x736572766572ULL));
    auto a = all_tensors(st.server), b = all_tensors(fresh);
    for (std::size_t ti = 0; ti < a.size(); ++ti)
        for (std::size_t i = 0; i < a[ti]->size(); ++i) CHECK((*a[ti])[i] == (*b[ti])[i]);
}

TEST_CASE("federation runs are bit-deterministic in the seed") {
    TrainTest tt = tiny_data();
    Partition part = dirichlet_partition(tt.train, 4, 0.85, 3);
    FederationConfig cfg = tiny_cfg(StrategyKind::GSR, 2);
    FederationState s1 = run_federation(cfg, part, tt.train);
    FederationState s2 = run_federation(cfg, part, tt.train);
    auto a = all_tensors(s1.server), b = all_tensors(s2.server);
    for (std::size_t ti = 0; ti < a.size(); ++ti)
        for (std::size_t i = 0; i < a[ti]->size(); ++i) CHECK((*a[ti])[i] == (*b[ti])[i]);
    cfg.seed += 1;
    FederationState s3 = run_federation(cfg, part, tt.train);
    bool differs = false;
    auto c = all_tensors(s3.server);
    for (std::size_t ti = 0; ti < a.size(); ++ti)
        for (std::size_t i = 0; i < a[ti]->size(); ++i)
            if ((*a[ti])[i] != (*c[ti])[i]) differs = true;
    CHECK(differs);
}

TEST_CASE("single-client FULL federation degenerates to local training") {
    TrainTest tt = tiny_data();
    Partition part;
    part.shards = {std::vector<int>(tt.train.count())};
    std::iota(part.shards[0].begin(), part.shards[0].end(), 0);
    FederationConfig cfg = tiny_cfg(StrategyKind::FULL, 2);
    cfg.num_clients = 1;
    cfg.num_large_clients = 1;
    FederationState st = run_federation(cfg, part, tt.train);
    // with one FULL client the integrated server is exactly the client update
    auto a = all_tensors(st.server), b = all_tensors(st.archive[0].params);
    for (std::size_t ti = 0; ti < a.size(); ++ti)
        for (std::size_t i = 0; i < a[ti]->size(); ++i)
            CHECK((*a[ti])[i] == Catch::Approx((*b[ti])[i]).margin(1e-7));
}

TEST_CASE("training reduces loss on a learnable dataset") {
    TrainTest tt = synthetic_dataset(3, 60, 30, 8, 0.15, 9);
    Partition part = dirichlet_partition(tt.train, 4, 0.85, 3);
    FederationConfig cfg = tiny_cfg(StrategyKind::FULL, 6);
    cfg.num_large_clients = 4;
    cfg.lr = 2e-3;
    FederationState st = run_federation(cfg, part, tt.train, &tt.test);
    CHECK(st.history.back().mean_train_loss < st.history.front().mean_train_loss);
    CHECK(evaluate(st.server, 1.0, tt.test) > 100.0 / 3.0 + 5.0);  // better than chance
}
