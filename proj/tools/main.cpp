#include "commands.hpp"

#include <tvp/common.hpp>

#include <CLI11.hpp>

#include <iostream>
#include <map>

namespace {

// Each subcommand accepts every config key as --key, applied after --config.
CLI::App* add_command(CLI::App& app, const std::string& name, const std::string& help,
                      std::map<std::string, std::string>& flags, std::string& config_path)
{
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "flat key = value config file");
    for (const auto& k : tvpcli::known_keys())
        sub->add_option("--" + k.name, flags[name + "/" + k.name], k.help);
    return sub;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Time-varying-parameter regression through ridge regression", "tvpridge"};
    app.set_version_flag("--version", std::string(TVP_VERSION));
    app.require_subcommand(1);
    std::map<std::string, std::string> flags;
    std::string config_path;
    const std::vector<std::pair<std::string, std::string>> commands = {
        {"estimate", "fit a TVP regression to a CSV panel"},
        {"simulate", "run the Monte Carlo study"},
        {"forecast", "pseudo-out-of-sample direct forecasts"},
        {"bench", "time estimators including cross-validation"},
    };
    std::map<std::string, CLI::App*> subs;
    for (const auto& [name, help] : commands) subs[name] = add_command(app, name, help, flags, config_path);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return tvpcli::kExitUsage;
    }

    try {
        for (const auto& [name, sub] : subs) {
            if (!sub->parsed()) continue;
            tvpcli::RunConfig cfg;
            if (!config_path.empty()) cfg.load_file(config_path);
            for (const auto& k : tvpcli::known_keys())
                if (sub->count("--" + k.name) > 0) cfg.set(k.name, flags[name + "/" + k.name]);
            if (name == "estimate") return tvpcli::cmd_estimate(cfg);
            if (name == "simulate") return tvpcli::cmd_simulate(cfg);
            if (name == "forecast") return tvpcli::cmd_forecast(cfg);
            if (name == "bench") return tvpcli::cmd_bench(cfg);
        }
    } catch (const tvpcli::ConfigError& e) {
        std::cerr << "tvpridge: " << e.what() << "\n";
        return tvpcli::kExitUsage;
    } catch (const tvp::NumericalError& e) {
        std::cerr << "tvpridge: numerical failure: " << e.what() << "\n";
        return tvpcli::kExitNumerical;
    } catch (const tvp::InvariantError& e) {
        std::cerr << "tvpridge: invariant breached: " << e.what() << "\n";
        return tvpcli::kExitNumerical;
    } catch (const tvp::Error& e) {
        std::cerr << "tvpridge: " << e.what() << "\n";
        return tvpcli::kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "tvpridge: unexpected error: " << e.what() << "\n";
        return 1;
    }
    return tvpcli::kExitUsage;
}
