#include <iostream>
#include <map>
#include <string>
#include <CLI11.hpp>
#include <sfa/cli_io.hpp>
#include <sfa/error.hpp>

namespace {

int run(const sfa::RunConfig& cfg)
{
    using sfa::Command;
    switch (cfg.command) {
        case Command::Estimate: {
            const auto reports = sfa::run_estimate(cfg);
            std::cout << sfa::metadata_header(cfg);
            sfa::write_estimate_table(std::cout, reports);
            break;
        }
        case Command::MonteCarlo: {
            const auto out = sfa::run_montecarlo(cfg);
            std::cout << sfa::metadata_header(cfg);
            sfa::write_summary_csv(std::cout, out.summary);
            for (const auto& f : out.files) std::cerr << "wrote " << f << '\n';
            break;
        }
        case Command::Ortho: {
            const auto out = sfa::run_ortho(cfg);
            std::cout << sfa::metadata_header(cfg) << out.text;
            break;
        }
    }
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Stochastic frontier estimation, Monte Carlo designs and orthogonality checks"};
    std::string command = "estimate";
    std::string config_path, penalty, method, selector, out, input, schema;
    long long seed = -1;
    int reps = -1, workers = -1;
    bool cross_fit = false, compare = false;
    std::vector<std::string> sets;

    app.add_option("command", command, "estimate, montecarlo or ortho")
        ->check(CLI::IsMember({"estimate", "montecarlo", "ortho"}));
    app.add_option("--config", config_path, "key = value configuration file")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "base seed")->check(CLI::NonNegativeNumber);
    app.add_option("--reps", reps, "Monte Carlo replications")->check(CLI::PositiveNumber);
    app.add_option("--method", method, "second stage")->check(CLI::IsMember({"cols", "mle"}));
    app.add_option("--selector", selector, "Z selection")->check(CLI::IsMember({"none", "all", "psl", "pdl"}));
    app.add_option("--penalty", penalty, "cv1se, cvmin, plugin or fixed=<x>");
    app.add_flag("--cross-fit", cross_fit, "two-fold cross-fitting");
    app.add_flag("--compare", compare, "all selector and second-stage combinations");
    app.add_option("--workers", workers, "worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
    app.add_option("--out", out, "output directory");
    app.add_option("--input", input, "data file");
    app.add_option("--schema", schema, "column,role file");
    app.add_option("--set", sets, "extra key=value override (repeatable)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        std::map<std::string, std::string> entries;
        if (!config_path.empty()) entries = sfa::read_key_value_file(config_path);
        if (app.count("command") || !entries.count("command")) entries["command"] = command;
        for (const auto& kv : sets) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw sfa::Error(sfa::ErrorCode::InvalidConfig, "--set expects key=value, got '" + kv + "'");
            entries[kv.substr(0, eq)] = kv.substr(eq + 1);
        }
        if (seed >= 0) entries["seed"] = std::to_string(seed);
        if (reps >= 0) entries["reps"] = std::to_string(reps);
        if (workers >= 0) entries["workers"] = std::to_string(workers);
        if (!method.empty()) entries["method"] = method;
        if (!selector.empty()) entries["selector"] = selector;
        if (!penalty.empty()) entries["penalty"] = penalty;
        if (cross_fit) entries["cross_fit"] = "true";
        if (compare) entries["compare"] = "true";
        if (!out.empty()) entries["out"] = out;
        if (!input.empty()) entries["input"] = input;
        if (!schema.empty()) entries["schema"] = schema;
        return run(sfa::make_config(entries));
    } catch (const sfa::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return sfa::exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    }
}
