#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hfl/attacks.hpp"
#include "hfl/channel_plan.hpp"
#include "hfl/data.hpp"
#include "hfl/federation.hpp"
#include "hfl/metrics.hpp"

namespace hfl {

using nlohmann::json;
namespace fs = std::filesystem;

// fixed-precision float formatting so reruns emit byte-identical files
inline std::string fmt(double v, int prec = 6) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
    return buf;
}

struct DatasetSpec {
    std::string type = "synthetic";  // synthetic | cifar10
    std::string path;                // cifar10 batch dir
    int classes = 4;
    int per_class_train = 500;
    int per_class_test = 300;
    int image_size = 16;
    int channels = 1;
    double noise = 0.3;
};

struct ExperimentConfig {
    DatasetSpec dataset;
    FederationConfig federation;     // strategy/num_large/seed filled per cell
    std::vector<std::string> strategies;
    std::vector<int> mixes = {2};    // num_large_clients values
    int repeats = 3;
    double alpha = 0.85;
    bool attacks_enabled = true;
    AttackConfig attack;
    std::uint64_t master_seed = 1;
    std::string out_dir;
};

inline ExperimentConfig parse_experiment_config(const json& j) {
    ExperimentConfig c;
    if (j.contains("dataset")) {
        const auto& d = j.at("dataset");
        c.dataset.type = d.value("type", c.dataset.type);
        c.dataset.path = d.value("path", c.dataset.path);
        c.dataset.classes = d.value("classes", c.dataset.classes);
        c.dataset.per_class_train = d.value("per_class_train", c.dataset.per_class_train);
        c.dataset.per_class_test = d.value("per_class_test", c.dataset.per_class_test);
        c.dataset.image_size = d.value("image_size", c.dataset.image_size);
        c.dataset.channels = d.value("channels", c.dataset.channels);
        c.dataset.noise = d.value("noise", c.dataset.noise);
    }
    if (j.contains("federation")) {
        const auto& f = j.at("federation");
        c.federation.num_clients = f.value("num_clients", c.federation.num_clients);
        c.federation.server_u = f.value("server_u", c.federation.server_u);
        c.federation.small_u = f.value("small_u", c.federation.server_u / 2);
        c.federation.rounds = f.value("rounds", c.federation.rounds);
        c.federation.local_epochs = f.value("local_epochs", c.federation.local_epochs);
        c.federation.batch_size = f.value("batch_size", c.federation.batch_size);
        c.federation.lr = f.value("lr", c.federation.lr);
        c.federation.use_augmentation = f.value("augment", c.federation.use_augmentation);
        c.federation.eval_every_round = f.value("eval_every_round", c.federation.eval_every_round);
        c.federation.reset_optimizer_each_round =
            f.value("reset_optimizer_each_round", c.federation.reset_optimizer_each_round);
        const std::string w = f.value("weighting", std::string("dataset_size"));
        c.federation.weighting = w == "uniform" ? AggWeighting::uniform : AggWeighting::dataset_size;
    }
    c.strategies = j.value("strategies", std::vector<std::string>{"FULL"});
    if (c.strategies.empty()) throw std::invalid_argument("config: strategy list is empty");
    c.mixes = j.value("mixes", c.mixes);
    c.repeats = j.value("repeats", c.repeats);
    if (c.repeats < 1) throw std::invalid_argument("config: repeats must be >= 1");
    c.alpha = j.value("alpha", c.alpha);
    if (j.contains("attacks")) {
        const auto& a = j.at("attacks");
        c.attacks_enabled = a.value("enabled", true);
        c.attack.num_shadow = a.value("num_shadow", c.attack.num_shadow);
        c.attack.distill_epochs = a.value("distill_epochs", c.attack.distill_epochs);
        c.attack.shadow_epochs = a.value("shadow_epochs", c.attack.shadow_epochs);
        c.attack.shadow_train_size = a.value("shadow_train_size", c.attack.shadow_train_size);
        c.attack.eval_cap = a.value("eval_cap", c.attack.eval_cap);
        c.attack.yeom_min_knowledge = a.value("yeom_min_knowledge", c.attack.yeom_min_knowledge);
        c.attack.tmia_shadow_members = a.value("tmia_shadow_members", c.attack.tmia_shadow_members);
        c.attack.tmia_shadow_nonmembers =
            a.value("tmia_shadow_nonmembers", c.attack.tmia_shadow_nonmembers);
        c.attack.tmia_distill_size = a.value("tmia_distill_size", c.attack.tmia_distill_size);
        c.attack.mlp_epochs = a.value("mlp_epochs", c.attack.mlp_epochs);
    }
    c.master_seed = j.value("seed", std::uint64_t(1));
    c.out_dir = j.value("out", std::string());
    return c;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config " + path);
    json j;
    f >> j;
    return parse_experiment_config(j);
}

inline TrainTest load_dataset(const DatasetSpec& spec, std::uint64_t seed) {
    if (spec.type == "synthetic")
        return synthetic_dataset(spec.classes, spec.per_class_train, spec.per_class_test,
                                 spec.image_size, spec.noise, seed, spec.channels);
    if (spec.type == "cifar10") return load_cifar_binary(spec.path);
    throw std::invalid_argument("unknown dataset type " + spec.type);
}

inline std::uint64_t partition_hash(const Partition& p) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& shard : p.shards) {
        h = mix64(h ^ shard.size());
        for (int i : shard) h = mix64(h ^ static_cast<std::uint64_t>(i));
    }
    return h;
}

// Master seed -> per-cell seed; depends only on the cell identity so adding
// strategies or mixes never perturbs existing cells.
inline std::uint64_t cell_seed(std::uint64_t master, const std::string& strategy, int num_large,
                               int repeat) {
    std::uint64_t h = mix64(master);
    for (char ch : strategy) h = mix64(h ^ static_cast<std::uint64_t>(ch));
    return stream_seed(h, static_cast<std::uint64_t>(num_large), static_cast<std::uint64_t>(repeat));
}

// ---------------------------------------------------------------------------
// Model archive (raw little-endian float payload + JSON header)
// ---------------------------------------------------------------------------

inline json plan_to_json(const ChannelPlan& plan) {
    return json{{"out", plan.out}, {"in", plan.in}};
}

inline ChannelPlan plan_from_json(const json& j) {
    ChannelPlan p;
    p.out = j.at("out").get<std::vector<std::vector<int>>>();
    p.in = j.at("in").get<std::vector<std::vector<int>>>();
    return p;
}

inline void save_archive(const std::string& prefix, const FederationState& st) {
    json header;
    header["image_channels"] = st.spec.image_channels;
    header["classes"] = st.spec.classes;
    std::ofstream bin(prefix + ".bin", std::ios::binary);
    json clients = json::array();
    const auto dump_model = [&](const ModelParams<float>& m) {
        json shapes = json::array();
        ModelParams<float>& mm = const_cast<ModelParams<float>&>(m);
        for (auto* t : all_tensors(mm)) {
            shapes.push_back(t->shape());
            bin.write(reinterpret_cast<const char*>(t->data()),
                      static_cast<std::streamsize>(t->size() * sizeof(float)));
        }
        return shapes;
    };
    header["server_widths"] = st.spec.conv_widths;
    header["server_shapes"] = dump_model(st.server);
    for (std::size_t c = 0; c < st.archive.size(); ++c) {
        const auto& a = st.archive[c];
        json jc;
        jc["client"] = c;
        jc["r_c"] = a.r_c;
        jc["plan"] = plan_to_json(a.plan);
        jc["shapes"] = dump_model(a.params);
        clients.push_back(std::move(jc));
    }
    header["clients"] = clients;
    std::ofstream(prefix + ".json") << header.dump(1) << "\n";
}

inline ModelParams<float> read_model(std::ifstream& bin, const json& shapes, int image_channels,
                                     int classes) {
    ModelParams<float> m;
    m.image_channels = image_channels;
    m.classes = classes;
    const int blocks = (static_cast<int>(shapes.size()) - 2) / 6;
    auto read_tensor = [&](const json& shp) {
        Tensor<float> t(shp.get<std::vector<int>>());
        bin.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(float)));
        if (!bin) throw std::runtime_error("archive: truncated payload");
        return t;
    };
    int i = 0;
    for (int b = 0; b < blocks; ++b) {
        ConvBlockParams<float> cb;
        cb.w = read_tensor(shapes[i++]);
        cb.b = read_tensor(shapes[i++]);
        cb.bn_gain = read_tensor(shapes[i++]);
        cb.bn_bias = read_tensor(shapes[i++]);
        cb.bn_mean = read_tensor(shapes[i++]);
        cb.bn_var = read_tensor(shapes[i++]);
        m.blocks.push_back(std::move(cb));
    }
    m.dense_w = read_tensor(shapes[i++]);
    m.dense_b = read_tensor(shapes[i++]);
    return m;
}

struct LoadedArchive {
    ModelSpec spec;
    ModelParams<float> server;
    std::vector<ArchivedUpdate> clients;
};

inline LoadedArchive load_archive(const std::string& prefix) {
    std::ifstream hf(prefix + ".json");
    if (!hf) throw std::runtime_error("archive: cannot open " + prefix + ".json");
    json header;
    hf >> header;
    std::ifstream bin(prefix + ".bin", std::ios::binary);
    if (!bin) throw std::runtime_error("archive: cannot open " + prefix + ".bin");
    LoadedArchive la;
    la.spec.image_channels = header.at("image_channels");
    la.spec.classes = header.at("classes");
    la.spec.conv_widths = header.at("server_widths").get<std::vector<int>>();
    la.server = read_model(bin, header.at("server_shapes"), la.spec.image_channels, la.spec.classes);
    for (const auto& jc : header.at("clients")) {
        ArchivedUpdate a;
        a.r_c = jc.at("r_c");
        a.plan = plan_from_json(jc.at("plan"));
        a.params = read_model(bin, jc.at("shapes"), la.spec.image_channels, la.spec.classes);
        la.clients.push_back(std::move(a));
    }
    return la;
}

// dataset export: JSON header + raw little-endian float32 payload
inline void export_dataset(const Dataset& d, const std::string& prefix) {
    json header;
    header["shape"] = d.images.shape();
    header["classes"] = d.classes;
    header["split"] = d.split;
    header["labels"] = d.labels;
    std::ofstream(prefix + ".json") << header.dump(1) << "\n";
    std::ofstream bin(prefix + ".f32", std::ios::binary);
    bin.write(reinterpret_cast<const char*>(d.images.data()),
              static_cast<std::streamsize>(d.images.size() * sizeof(float)));
}

// ---------------------------------------------------------------------------
// Cell execution
// ---------------------------------------------------------------------------

struct CellResult {
    std::string strategy;
    int num_large = 0;
    int repeat = 0;
    double server_acc = 0;
    double mean_client_acc = 0;
    AttackMetrics yeom, lira, tmia;  // averaged over clients
    double avg_auc = 0;              // headline privacy metric
    std::vector<AttackReport> reports;
    std::vector<int> shard_sizes;
    std::string repeat_label;
};

inline std::string repeat_label(const StrategySpec& strat, const FederationConfig& fed,
                                const ModelSpec& spec) {
    const int n = spec.conv_widths[0];
    const int nc = (n / fed.server_u) * fed.small_u;
    const double f = repeat_frequency(strat, n, nc, fed.num_clients);
    if (f == 1.0) return "1";
    return "1/" + fmt(f, f == std::floor(f) ? 0 : 1);
}

// Run the attack suite against every archived client update of a federation.
inline std::vector<AttackReport> attack_all_clients(const ModelSpec& spec,
                                                    const std::vector<ArchivedUpdate>& archive,
                                                    const std::vector<std::vector<int>>& shards,
                                                    const Dataset& train, const Dataset& test,
                                                    const AttackConfig& cfg,
                                                    bool keep_scores = false) {
    const TestPools pools = split_test_pools(test.count(), cfg);
    // shared shadow machinery per distinct client model size
    std::map<int, std::vector<ShadowModel>> lira_by_width;
    std::map<int, TmiaShared> tmia_by_width;
    std::vector<AttackReport> reports;
    for (std::size_t c = 0; c < archive.size(); ++c) {
        const auto& upd = archive[c];
        ModelSpec cspec;
        cspec.image_channels = spec.image_channels;
        cspec.classes = spec.classes;
        cspec.conv_widths = upd.params.conv_widths();
        const int w0 = cspec.conv_widths[0];
        if (!lira_by_width.count(w0))
            lira_by_width[w0] = train_lira_shadows(cspec, upd.r_c, train, shards, cfg);
        if (!tmia_by_width.count(w0))
            tmia_by_width[w0] = build_tmia_shared(cspec, upd.r_c, train, test, pools, cfg);
        // clients whose shard is too small to form a balanced evaluation set
        // are skipped rather than failing the whole cell
        if (shards[c].size() < 8) continue;
        AttackTarget target = make_attack_target(static_cast<int>(c), upd, shards[c], train, test,
                                                 pools, cfg);
        reports.push_back(attack_suite(target, lira_by_width[w0], tmia_by_width[w0], cfg, keep_scores));
    }
    if (reports.empty()) throw std::runtime_error("attacks: no client had enough samples");
    return reports;
}

inline CellResult run_cell(const ExperimentConfig& cfg, const std::string& strategy_name,
                           int num_large, int repeat, const TrainTest& data,
                           FederationState* state_out = nullptr) {
    CellResult res;
    res.strategy = strategy_name;
    res.num_large = num_large;
    res.repeat = repeat;

    const std::uint64_t seed = cell_seed(cfg.master_seed, strategy_name, num_large, repeat);
    FederationConfig fed = cfg.federation;
    fed.num_large_clients = num_large;
    fed.seed = seed;
    fed.strategy.kind = strategy_from_string(strategy_name);
    fed.strategy.seed = stream_seed(seed, 0x73747261ULL);

    Partition part = dirichlet_partition(data.train, fed.num_clients, cfg.alpha,
                                         stream_seed(seed, 0x70617274ULL));
    res.shard_sizes = part.sizes();
    FederationState st = run_federation(fed, part, data.train, &data.test);
    res.server_acc = evaluate(st.server, 1.0, data.test);
    double acc_sum = 0;
    for (const auto& a : st.archive) {
        ModelParams<float> m = a.params;
        acc_sum += evaluate(m, a.r_c, data.test);
    }
    res.mean_client_acc = st.archive.empty() ? 0 : acc_sum / st.archive.size();
    res.repeat_label = repeat_label(fed.strategy, fed, st.spec);

    if (cfg.attacks_enabled) {
        AttackConfig acfg = cfg.attack;
        acfg.seed = stream_seed(seed, 0x6174746bULL);
        acfg.shadow_epochs = fed.rounds * fed.local_epochs;
        res.reports = attack_all_clients(st.spec, st.archive, part.shards, data.train, data.test, acfg);
        const auto avg = [&](auto pick) {
            double s = 0;
            for (const auto& r : res.reports) s += pick(r);
            return s / res.reports.size();
        };
        const auto avg_metrics = [&](AttackMetrics AttackReport::* m) {
            AttackMetrics out;
            out.auc = avg([&](const AttackReport& r) { return (r.*m).auc; });
            out.adv = avg([&](const AttackReport& r) { return (r.*m).adv; });
            out.tpr_fpr01 = avg([&](const AttackReport& r) { return (r.*m).tpr_fpr01; });
            out.tpr_fpr0001 = avg([&](const AttackReport& r) { return (r.*m).tpr_fpr0001; });
            return out;
        };
        res.yeom = avg_metrics(&AttackReport::yeom);
        res.lira = avg_metrics(&AttackReport::lira);
        res.tmia = avg_metrics(&AttackReport::tmia);
        res.avg_auc = avg([](const AttackReport& r) { return r.avg_auc; });
    }
    if (state_out) *state_out = std::move(st);
    return res;
}

// ---------------------------------------------------------------------------
// Result files
// ---------------------------------------------------------------------------

inline std::string cell_dir_name(const std::string& strategy, int num_large, int repeat) {
    return strategy + "_L" + std::to_string(num_large) + "_r" + std::to_string(repeat);
}

inline const char* kResultHeader =
    "strategy,num_large,repeat,repeat_freq,server_acc,mean_client_acc,"
    "yeom_auc,yeom_adv,yeom_tpr01,yeom_tpr0001,"
    "lira_auc,lira_adv,lira_tpr01,lira_tpr0001,"
    "tmia_auc,tmia_adv,tmia_tpr01,tmia_tpr0001,avg_auc\n";

inline std::string result_row(const CellResult& r) {
    std::string s = r.strategy + "," + std::to_string(r.num_large) + "," +
                    std::to_string(r.repeat) + "," + r.repeat_label + "," + fmt(r.server_acc) +
                    "," + fmt(r.mean_client_acc);
    for (const AttackMetrics* m : {&r.yeom, &r.lira, &r.tmia})
        s += "," + fmt(m->auc) + "," + fmt(m->adv) + "," + fmt(m->tpr_fpr01) + "," +
             fmt(m->tpr_fpr0001);
    s += "," + fmt(r.avg_auc) + "\n";
    return s;
}

inline void write_cell_outputs(const fs::path& dir, const ExperimentConfig& cfg,
                               const CellResult& res, const Partition& part) {
    fs::create_directories(dir);
    {
        std::ofstream f(dir / "results.csv");
        f << kResultHeader << result_row(res);
    }
    {
        json manifest;
        manifest["strategy"] = res.strategy;
        manifest["num_large"] = res.num_large;
        manifest["repeat"] = res.repeat;
        manifest["cell_seed"] = cell_seed(cfg.master_seed, res.strategy, res.num_large, res.repeat);
        manifest["master_seed"] = cfg.master_seed;
        manifest["partition_hash"] = partition_hash(part);
        manifest["rounds"] = cfg.federation.rounds;
        manifest["num_clients"] = cfg.federation.num_clients;
        manifest["server_u"] = cfg.federation.server_u;
        manifest["small_u"] = cfg.federation.small_u;
        manifest["alpha"] = cfg.alpha;
        manifest["dataset_type"] = cfg.dataset.type;
        std::ofstream(dir / "manifest.json") << manifest.dump(1) << "\n";
    }
    {
        json pj;
        for (std::size_t c = 0; c < part.shards.size(); ++c)
            pj[std::to_string(c)] = part.shards[c];
        std::ofstream(dir / "partition.json") << pj.dump() << "\n";
    }
    if (!res.reports.empty()) {
        std::ofstream f(dir / "attack_report.csv");
        f << "client,attack,auc,adv,tpr_at_fpr_0.1,tpr_at_fpr_0.001\n";
        for (const auto& rep : res.reports) {
            const auto row = [&](const char* name, const AttackMetrics& m) {
                f << rep.client << "," << name << "," << fmt(m.auc) << "," << fmt(m.adv) << ","
                  << fmt(m.tpr_fpr01) << "," << fmt(m.tpr_fpr0001) << "\n";
            };
            row("yeom", rep.yeom);
            row("lira", rep.lira);
            row("tmia", rep.tmia);
        }
    }
}

struct SummaryRow {
    std::string strategy;
    int num_large = 0;
    int n = 0;
    double server_acc_mean = 0, server_acc_std = 0;
    double client_acc_mean = 0, client_acc_std = 0;
    double avg_auc_mean = 0, avg_auc_std = 0;
    std::string repeat_label;
};

inline std::vector<CellResult> read_results(const std::string& results_dir) {
    std::vector<CellResult> out;
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(results_dir))
        if (e.is_regular_file() && e.path().filename() == "results.csv") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& p : files) {
        std::ifstream f(p);
        std::string line;
        std::getline(f, line);  // header
        while (std::getline(f, line)) {
            if (line.empty()) continue;
            std::vector<std::string> cols;
            std::size_t pos = 0;
            while (pos <= line.size()) {
                const std::size_t nxt = line.find(',', pos);
                cols.push_back(line.substr(pos, nxt == std::string::npos ? nxt : nxt - pos));
                if (nxt == std::string::npos) break;
                pos = nxt + 1;
            }
            if (cols.size() < 19) continue;
            CellResult r;
            r.strategy = cols[0];
            r.num_large = std::stoi(cols[1]);
            r.repeat = std::stoi(cols[2]);
            r.repeat_label = cols[3];
            r.server_acc = std::stod(cols[4]);
            r.mean_client_acc = std::stod(cols[5]);
            r.avg_auc = std::stod(cols[18]);
            out.push_back(std::move(r));
        }
    }
    return out;
}

struct DeltaRow {
    int num_large = 0;
    double d_server_acc = 0, d_client_acc = 0, d_avg_auc = 0;
};

struct Summary {
    std::vector<SummaryRow> rows;
    std::vector<DeltaRow> deltas;
};

inline Summary summarize_results(const std::vector<CellResult>& cells) {
    std::map<std::pair<int, std::string>, std::vector<const CellResult*>> groups;
    for (const auto& c : cells) groups[{c.num_large, c.strategy}].push_back(&c);
    Summary s;
    std::map<int, std::vector<const SummaryRow*>> by_mix;
    for (const auto& [key, members] : groups) {
        SummaryRow row;
        row.num_large = key.first;
        row.strategy = key.second;
        row.n = static_cast<int>(members.size());
        row.repeat_label = members.front()->repeat_label;
        const auto stat = [&](auto pick, double& mean, double& sd) {
            double sum = 0;
            for (auto* m : members) sum += pick(*m);
            mean = sum / members.size();
            double ss = 0;
            for (auto* m : members) ss += (pick(*m) - mean) * (pick(*m) - mean);
            sd = members.size() > 1 ? std::sqrt(ss / (members.size() - 1)) : 0.0;
        };
        stat([](const CellResult& c) { return c.server_acc; }, row.server_acc_mean, row.server_acc_std);
        stat([](const CellResult& c) { return c.mean_client_acc; }, row.client_acc_mean,
             row.client_acc_std);
        stat([](const CellResult& c) { return c.avg_auc; }, row.avg_auc_mean, row.avg_auc_std);
        s.rows.push_back(row);
    }
    // order by mix then by repeat frequency label then name (table grouping)
    std::sort(s.rows.begin(), s.rows.end(), [](const SummaryRow& a, const SummaryRow& b) {
        if (a.num_large != b.num_large) return a.num_large < b.num_large;
        if (a.repeat_label != b.repeat_label) return a.repeat_label < b.repeat_label;
        return a.strategy < b.strategy;
    });
    for (auto& row : s.rows) by_mix[row.num_large].push_back(&row);
    for (const auto& [mix, rows] : by_mix) {
        DeltaRow d;
        d.num_large = mix;
        const auto span = [&](auto pick) {
            double lo = pick(*rows.front()), hi = lo;
            for (auto* r : rows) {
                lo = std::min(lo, pick(*r));
                hi = std::max(hi, pick(*r));
            }
            return hi - lo;
        };
        d.d_server_acc = span([](const SummaryRow& r) { return r.server_acc_mean; });
        d.d_client_acc = span([](const SummaryRow& r) { return r.client_acc_mean; });
        d.d_avg_auc = span([](const SummaryRow& r) { return r.avg_auc_mean; });
        s.deltas.push_back(d);
    }
    return s;
}

inline void write_summary(const Summary& s, const fs::path& dir) {
    {
        std::ofstream f(dir / "summary.csv");
        f << "num_large,repeat_freq,strategy,n,server_acc_mean,server_acc_std,"
             "client_acc_mean,client_acc_std,avg_auc_mean,avg_auc_std\n";
        for (const auto& r : s.rows)
            f << r.num_large << "," << r.repeat_label << "," << r.strategy << "," << r.n << ","
              << fmt(r.server_acc_mean) << "," << fmt(r.server_acc_std) << ","
              << fmt(r.client_acc_mean) << "," << fmt(r.client_acc_std) << ","
              << fmt(r.avg_auc_mean) << "," << fmt(r.avg_auc_std) << "\n";
    }
    {
        std::ofstream f(dir / "deltas.csv");
        f << "num_large,delta_server_acc,delta_client_acc,delta_avg_auc\n";
        for (const auto& d : s.deltas)
            f << d.num_large << "," << fmt(d.d_server_acc) << "," << fmt(d.d_client_acc) << ","
              << fmt(d.d_avg_auc) << "\n";
    }
}

// Runs every (strategy x mix x repeat) cell, skipping cells whose results.csv
// already exists (resumability). Failures are recorded per cell.
inline json config_to_json(const ExperimentConfig& c) {
    json j;
    j["dataset"] = {{"type", c.dataset.type},           {"path", c.dataset.path},
                    {"classes", c.dataset.classes},     {"per_class_train", c.dataset.per_class_train},
                    {"per_class_test", c.dataset.per_class_test}, {"image_size", c.dataset.image_size},
                    {"channels", c.dataset.channels},   {"noise", c.dataset.noise}};
    j["federation"] = {
        {"num_clients", c.federation.num_clients},
        {"server_u", c.federation.server_u},
        {"small_u", c.federation.small_u},
        {"rounds", c.federation.rounds},
        {"local_epochs", c.federation.local_epochs},
        {"batch_size", c.federation.batch_size},
        {"lr", c.federation.lr},
        {"augment", c.federation.use_augmentation},
        {"eval_every_round", c.federation.eval_every_round},
        {"reset_optimizer_each_round", c.federation.reset_optimizer_each_round},
        {"weighting", c.federation.weighting == AggWeighting::uniform ? "uniform" : "dataset_size"}};
    j["strategies"] = c.strategies;
    j["mixes"] = c.mixes;
    j["repeats"] = c.repeats;
    j["alpha"] = c.alpha;
    j["attacks"] = {{"enabled", c.attacks_enabled},
                    {"num_shadow", c.attack.num_shadow},
                    {"distill_epochs", c.attack.distill_epochs},
                    {"shadow_epochs", c.attack.shadow_epochs},
                    {"shadow_train_size", c.attack.shadow_train_size},
                    {"eval_cap", c.attack.eval_cap},
                    {"yeom_min_knowledge", c.attack.yeom_min_knowledge},
                    {"tmia_shadow_members", c.attack.tmia_shadow_members},
                    {"tmia_shadow_nonmembers", c.attack.tmia_shadow_nonmembers},
                    {"tmia_distill_size", c.attack.tmia_distill_size},
                    {"mlp_epochs", c.attack.mlp_epochs}};
    j["seed"] = c.master_seed;
    j["out"] = c.out_dir;
    return j;
}

// Re-run the membership attacks for one cell directory from its saved archive.
inline void attack_cell(const fs::path& cell_dir) {
    std::ifstream mf(cell_dir / "manifest.json");
    if (!mf) throw std::runtime_error("attack: missing manifest.json in " + cell_dir.string());
    json manifest;
    mf >> manifest;
    std::ifstream cf(cell_dir.parent_path() / "config.json");
    if (!cf) throw std::runtime_error("attack: missing config.json next to the cell directory");
    json cj;
    cf >> cj;
    ExperimentConfig cfg = parse_experiment_config(cj);

    const TrainTest data = load_dataset(cfg.dataset, stream_seed(cfg.master_seed, 0x64617461ULL));
    const std::uint64_t seed = manifest.at("cell_seed");
    Partition part = dirichlet_partition(data.train, cfg.federation.num_clients, cfg.alpha,
                                         stream_seed(seed, 0x70617274ULL));
    if (manifest.contains("partition_hash") &&
        manifest.at("partition_hash").get<std::uint64_t>() != partition_hash(part))
        throw std::runtime_error("attack: rebuilt partition does not match the recorded run");
    LoadedArchive la = load_archive((cell_dir / "archive").string());
    AttackConfig acfg = cfg.attack;
    acfg.seed = stream_seed(seed, 0x6174746bULL);
    acfg.shadow_epochs = cfg.federation.rounds * cfg.federation.local_epochs;
    const auto reports =
        attack_all_clients(la.spec, la.clients, part.shards, data.train, data.test, acfg);
    std::ofstream f(cell_dir / "attack_report.csv");
    f << "client,attack,auc,adv,tpr_at_fpr_0.1,tpr_at_fpr_0.001\n";
    for (const auto& rep : reports) {
        const auto row = [&](const char* name, const AttackMetrics& m) {
            f << rep.client << "," << name << "," << fmt(m.auc) << "," << fmt(m.adv) << ","
              << fmt(m.tpr_fpr01) << "," << fmt(m.tpr_fpr0001) << "\n";
        };
        row("yeom", rep.yeom);
        row("lira", rep.lira);
        row("tmia", rep.tmia);
    }
}

inline int run_experiment(const ExperimentConfig& cfg, const std::string& out_dir,
                          bool save_archives = true) {
    fs::create_directories(out_dir);
    std::ofstream(fs::path(out_dir) / "config.json") << config_to_json(cfg).dump(1) << "\n";
    const TrainTest data = load_dataset(cfg.dataset, stream_seed(cfg.master_seed, 0x64617461ULL));
    int failures = 0;
    for (const auto& strategy : cfg.strategies)
        for (int mix : cfg.mixes)
            for (int rep = 0; rep < cfg.repeats; ++rep) {
                const fs::path dir = fs::path(out_dir) / cell_dir_name(strategy, mix, rep);
                if (fs::exists(dir / "results.csv")) continue;
                try {
                    // rebuild the partition here so the manifest can record it
                    const std::uint64_t seed = cell_seed(cfg.master_seed, strategy, mix, rep);
                    Partition part = dirichlet_partition(data.train, cfg.federation.num_clients,
                                                         cfg.alpha, stream_seed(seed, 0x70617274ULL));
                    FederationState st;
                    CellResult res = run_cell(cfg, strategy, mix, rep, data, &st);
                    write_cell_outputs(dir, cfg, res, part);
                    if (save_archives) save_archive((dir / "archive").string(), st);
                } catch (const std::exception& e) {
                    ++failures;
                    fs::create_directories(dir);
                    std::ofstream(dir / "error.txt") << e.what() << "\n";
                }
            }
    const Summary s = summarize_results(read_results(out_dir));
    write_summary(s, out_dir);
    return failures;
}

}  // namespace hfl
