#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "hfl/experiment.hpp"

namespace {

std::string default_out_root() {
    if (const char* env = std::getenv("HFLSIM_OUT")) return env;
    return "results";
}

int cmd_run(const std::string& config_path, std::string out, int jobs) {
    hfl::ExperimentConfig cfg = hfl::load_experiment_config(config_path);
    if (out.empty()) out = cfg.out_dir.empty() ? default_out_root() : cfg.out_dir;
    (void)jobs;  // cells run sequentially; the flag is accepted for compatibility
    const int failures = hfl::run_experiment(cfg, out);
    std::cout << "results written to " << out << "\n";
    if (failures) {
        std::cerr << failures << " cell(s) failed; see error.txt in the affected directories\n";
        return 1;
    }
    return 0;
}

int cmd_attack(const std::string& run_dir) {
    hfl::attack_cell(run_dir);
    std::cout << "attack report written to " << run_dir << "/attack_report.csv\n";
    return 0;
}

int cmd_summarize(const std::string& in_dir) {
    const auto cells = hfl::read_results(in_dir);
    if (cells.empty()) {
        std::cerr << "no results.csv files found under " << in_dir << "\n";
        return 1;
    }
    const hfl::Summary s = hfl::summarize_results(cells);
    hfl::write_summary(s, in_dir);
    std::cout << "num_large repeat strategy  n  server_acc      client_acc      avg_auc\n";
    for (const auto& r : s.rows)
        std::cout << r.num_large << "  " << r.repeat_label << "  " << r.strategy << "  " << r.n
                  << "  " << hfl::fmt(r.server_acc_mean, 2) << "+-" << hfl::fmt(r.server_acc_std, 2)
                  << "  " << hfl::fmt(r.client_acc_mean, 2) << "+-" << hfl::fmt(r.client_acc_std, 2)
                  << "  " << hfl::fmt(r.avg_auc_mean, 4) << "+-" << hfl::fmt(r.avg_auc_std, 4)
                  << "\n";
    for (const auto& d : s.deltas)
        std::cout << "mix " << d.num_large << " spread: server_acc " << hfl::fmt(d.d_server_acc, 2)
                  << " client_acc " << hfl::fmt(d.d_client_acc, 2) << " avg_auc "
                  << hfl::fmt(d.d_avg_auc, 4) << "\n";
    return 0;
}

int cmd_plan_dump(const std::string& strategy, int rounds, int num_clients, int server_u,
                  int small_u, std::uint64_t seed) {
    hfl::StrategySpec strat;
    strat.kind = hfl::strategy_from_string(strategy);
    strat.seed = seed;
    hfl::PlanContext ctx;
    ctx.server = hfl::ModelSpec::from_u(server_u, 3, 10);
    ctx.server_u = server_u;
    ctx.client_u = strat.kind == hfl::StrategyKind::FULL ? server_u : small_u;
    ctx.num_clients = num_clients;
    nlohmann::json records = nlohmann::json::array();
    for (long r = 0; r < rounds; ++r)
        for (int c = 0; c < num_clients; ++c) {
            ctx.client_index = c;
            ctx.group = c % strat.group_count;
            hfl::ChannelPlan plan = hfl::make_plan(strat, c, r, ctx);
            hfl::validate_plan(plan, ctx.server);
            nlohmann::json rec;
            rec["client"] = c;
            rec["round"] = r;
            for (std::size_t b = 0; b < plan.out.size(); ++b)
                rec["blocks"][std::to_string(b)] = plan.out[b];
            records.push_back(std::move(rec));
        }
    std::cout << records.dump(1) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"heterogeneous federated learning simulator"};
    app.require_subcommand(1);

    std::string config_path, out_dir, run_dir, in_dir, strategy;
    int jobs = 1, rounds = 1, num_clients = 10, server_u = 4, small_u = 2;
    std::uint64_t seed = 1;

    auto* run = app.add_subcommand("run", "run an experiment grid from a JSON config");
    run->add_option("--config", config_path, "JSON config file")->required();
    run->add_option("--out", out_dir, "output directory (default: config 'out' or $HFLSIM_OUT)");
    run->add_option("--jobs", jobs, "worker count (accepted, cells run sequentially)");

    auto* attack = app.add_subcommand("attack", "re-run membership attacks on a saved cell");
    attack->add_option("--run", run_dir, "cell directory with archive + manifest")->required();

    auto* summ = app.add_subcommand("summarize", "aggregate results.csv files under a directory");
    summ->add_option("--in", in_dir, "results directory")->required();

    auto* dump = app.add_subcommand("plan-dump", "print channel plans for a strategy as JSON");
    dump->add_option("--strategy", strategy, "strategy kind (OFM, OSR, GFM, UFR, ...)")->required();
    dump->add_option("--rounds", rounds, "rounds to dump")->required();
    dump->add_option("--clients", num_clients, "client count");
    dump->add_option("--server-u", server_u, "server width parameter");
    dump->add_option("--small-u", small_u, "client width parameter");
    dump->add_option("--seed", seed, "strategy seed");

    CLI11_PARSE(app, argc, argv);
    try {
        if (run->parsed()) return cmd_run(config_path, out_dir, jobs);
        if (attack->parsed()) return cmd_attack(run_dir);
        if (summ->parsed()) return cmd_summarize(in_dir);
        if (dump->parsed()) return cmd_plan_dump(strategy, rounds, num_clients, server_u, small_u, seed);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
