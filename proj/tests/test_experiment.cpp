#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "hfl/experiment.hpp"

using namespace hfl;

namespace {

struct TempDir {
    fs::path path;
    TempDir() : path(fs::temp_directory_path() / ("hfl_test_" + std::to_string(::getpid()))) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

ExperimentConfig quick_config() {
    json j = {
        {"dataset", {{"type", "synthetic"}, {"classes", 3}, {"per_class_train", 40},
                     {"per_class_test", 30}, {"image_size", 8}, {"noise", 0.3}}},
        {"federation", {{"num_clients", 4}, {"server_u", 4}, {"small_u", 2}, {"rounds", 1},
                        {"batch_size", 16}}},
        {"strategies", {"OFM"}},
        {"mixes", {1}},
        {"repeats", 1},
        {"attacks", {{"enabled", false}}},
        {"seed", 99},
    };
    return parse_experiment_config(j);
}

}  // namespace

TEST_CASE("fixed-precision formatting is stable") {
    CHECK(fmt(0.1) == "0.100000");
    CHECK(fmt(61.5625) == "61.562500");
    CHECK(fmt(-3.25, 2) == "-3.25");
    CHECK(fmt(0.0) == "0.000000");
}

TEST_CASE("config parsing round-trips through json") {
    ExperimentConfig a = quick_config();
    ExperimentConfig b = parse_experiment_config(config_to_json(a));
    CHECK(a.dataset.classes == b.dataset.classes);
    CHECK(a.federation.num_clients == b.federation.num_clients);
    CHECK(a.federation.rounds == b.federation.rounds);
    CHECK(a.strategies == b.strategies);
    CHECK(a.mixes == b.mixes);
    CHECK(a.master_seed == b.master_seed);
    CHECK(a.attacks_enabled == b.attacks_enabled);
}

TEST_CASE("config validation") {
    CHECK_THROWS(parse_experiment_config(json{{"strategies", json::array()}}));
    CHECK_THROWS(parse_experiment_config(json{{"repeats", 0}}));
    CHECK_THROWS(load_experiment_config("no_such_config.json"));
    // defaults apply when sections are missing
    ExperimentConfig c = parse_experiment_config(json::object());
    CHECK(c.strategies == std::vector<std::string>{"FULL"});
    CHECK(c.repeats == 3);
}

TEST_CASE("cell seeds depend only on the cell identity") {
    const std::uint64_t a = cell_seed(1, "OFM", 2, 0);
    CHECK(a == cell_seed(1, "OFM", 2, 0));
    CHECK(a != cell_seed(1, "OFM", 2, 1));
    CHECK(a != cell_seed(1, "OFM", 8, 0));
    CHECK(a != cell_seed(1, "OFR", 2, 0));
    CHECK(a != cell_seed(2, "OFM", 2, 0));
}

TEST_CASE("model archive round-trips bit-exactly") {
    TempDir tmp;
    TrainTest tt = synthetic_dataset(3, 30, 10, 8, 0.25, 5);
    Partition part = dirichlet_partition(tt.train, 3, 0.85, 1);
    FederationConfig fed;
    fed.num_clients = 3;
    fed.num_large_clients = 1;
    fed.server_u = 4;
    fed.small_u = 2;
    fed.rounds = 1;
    fed.batch_size = 16;
    fed.strategy.kind = StrategyKind::USR;
    fed.seed = 12;
    FederationState st = run_federation(fed, part, tt.train);
    const std::string prefix = (tmp.path / "archive").string();
    save_archive(prefix, st);
    LoadedArchive la = load_archive(prefix);
    CHECK(la.spec.conv_widths == st.spec.conv_widths);
    REQUIRE(la.clients.size() == st.archive.size());
    auto sv = all_tensors(st.server);
    auto lv = all_tensors(la.server);
    for (std::size_t ti = 0; ti < sv.size(); ++ti)
        for (std::size_t i = 0; i < sv[ti]->size(); ++i) CHECK((*sv[ti])[i] == (*lv[ti])[i]);
    for (std::size_t c = 0; c < la.clients.size(); ++c) {
        CHECK(la.clients[c].r_c == st.archive[c].r_c);
        CHECK(la.clients[c].plan == st.archive[c].plan);
        auto a = all_tensors(la.clients[c].params);
        auto b = all_tensors(st.archive[c].params);
        for (std::size_t ti = 0; ti < a.size(); ++ti)
            for (std::size_t i = 0; i < a[ti]->size(); ++i) CHECK((*a[ti])[i] == (*b[ti])[i]);
    }
    CHECK_THROWS(load_archive((tmp.path / "missing").string()));
}

TEST_CASE("dataset export writes a json header and raw float payload") {
    TempDir tmp;
    TrainTest tt = synthetic_dataset(2, 5, 2, 8, 0.2, 3);
    const std::string prefix = (tmp.path / "data").string();
    export_dataset(tt.train, prefix);
    std::ifstream hf(prefix + ".json");
    REQUIRE(hf.good());
    json header;
    hf >> header;
    CHECK(header["shape"] == json(tt.train.images.shape()));
    CHECK(header["classes"] == 2);
    CHECK(fs::file_size(prefix + ".f32") == tt.train.images.size() * sizeof(float));
}

TEST_CASE("run_experiment writes cells, summary, and is resumable") {
    TempDir tmp;
    ExperimentConfig cfg = quick_config();
    const std::string out = (tmp.path / "results").string();
    CHECK(run_experiment(cfg, out) == 0);
    const fs::path cell = fs::path(out) / "OFM_L1_r0";
    REQUIRE(fs::exists(cell / "results.csv"));
    CHECK(fs::exists(cell / "manifest.json"));
    CHECK(fs::exists(cell / "partition.json"));
    CHECK(fs::exists(cell / "archive.json"));
    CHECK(fs::exists(fs::path(out) / "summary.csv"));
    CHECK(fs::exists(fs::path(out) / "deltas.csv"));
    CHECK(fs::exists(fs::path(out) / "config.json"));

    // determinism: a rerun in a fresh directory is byte-identical
    const std::string out2 = (tmp.path / "results2").string();
    CHECK(run_experiment(cfg, out2) == 0);
    const auto slurp = [](const fs::path& p) {
        std::ifstream f(p, std::ios::binary);
        return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    };
    CHECK(slurp(cell / "results.csv") == slurp(fs::path(out2) / "OFM_L1_r0" / "results.csv"));

    // resumability: completed cells are skipped untouched
    const auto before = fs::last_write_time(cell / "results.csv");
    CHECK(run_experiment(cfg, out) == 0);
    CHECK(fs::last_write_time(cell / "results.csv") == before);

    // summarize reads back what run wrote
    const auto cells = read_results(out);
    REQUIRE(cells.size() == 1);
    CHECK(cells[0].strategy == "OFM");
    CHECK(cells[0].num_large == 1);
    const Summary s = summarize_results(cells);
    REQUIRE(s.rows.size() == 1);
    CHECK(s.rows[0].n == 1);
    CHECK(s.rows[0].server_acc_mean == Catch::Approx(cells[0].server_acc));
}

TEST_CASE("cell failures are reported per cell, not fatal") {
    TempDir tmp;
    ExperimentConfig cfg = quick_config();
    cfg.strategies = {"GFM"};
    cfg.federation.small_u = 1;  // GFM needs exactly half the server width
    const std::string out = (tmp.path / "bad").string();
    CHECK(run_experiment(cfg, out) == 1);
    CHECK(fs::exists(fs::path(out) / "GFM_L1_r0" / "error.txt"));
}

TEST_CASE("plan json round-trips") {
    ChannelPlan p;
    p.out = {{0, 1}, {1, 3}};
    p.in = {{0}, {0, 1}};
    CHECK(plan_from_json(plan_to_json(p)) == p);
}

TEST_CASE("summary groups by mix and strategy with sample stddev") {
    std::vector<CellResult> cells;
    for (int rep = 0; rep < 2; ++rep) {
        CellResult r;
        r.strategy = "OFM";
        r.num_large = 2;
        r.repeat = rep;
        r.repeat_label = "1";
        r.server_acc = 50 + 10 * rep;  // 50, 60
        r.mean_client_acc = 40;
        r.avg_auc = 0.5;
        cells.push_back(r);
    }
    CellResult other = cells[0];
    other.strategy = "USR";
    other.server_acc = 30;
    cells.push_back(other);
    Summary s = summarize_results(cells);
    REQUIRE(s.rows.size() == 2);
    const auto& ofm = s.rows[0].strategy == "OFM" ? s.rows[0] : s.rows[1];
    CHECK(ofm.n == 2);
    CHECK(ofm.server_acc_mean == Catch::Approx(55.0));
    CHECK(ofm.server_acc_std == Catch::Approx(std::sqrt(50.0)));
    REQUIRE(s.deltas.size() == 1);
    CHECK(s.deltas[0].d_server_acc == Catch::Approx(25.0));  // 55 - 30
}
