// Command line front end: simulate days, train forecasters, summarise reports.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "evcs/evcs.hpp"

using namespace evcs;

namespace {

constexpr int kExitViolations = 2;

std::vector<Scheme> schemes_for(const std::string& name, Scheme fallback) {
    if (name.empty()) return {fallback};
    if (name == "all") return {Scheme::charge_only, Scheme::conventional, Scheme::proposed};
    return {parse_scheme(name)};
}

// checkpoints win; otherwise train on the history of the first seed
ForecastPair forecasters(const SimulationConfig& cfg, std::uint64_t seed) {
    const auto& fs = cfg.forecast;
    if (!fs.load_checkpoint.empty() || !fs.pv_checkpoint.empty()) {
        if (fs.load_checkpoint.empty() || fs.pv_checkpoint.empty()) {
            throw ConfigError("forecast.load_checkpoint and forecast.pv_checkpoint must be set together");
        }
        return ForecastPair{forecast::ForecastModel::load(fs.load_checkpoint),
                            forecast::ForecastModel::load(fs.pv_checkpoint)};
    }
    std::fprintf(stderr, "training forecasters (%d epochs)...\n", fs.train.epochs);
    auto pair = train_forecasters(make_profiles(cfg, seed), fs);
    std::fprintf(stderr, "validation RMSE: load %.3f kW, PV %.3f kW\n", pair.load_rmse_valid, pair.pv_rmse_valid);
    return pair;
}

int simulate(const std::string& config_path, const std::string& scheme_name, std::uint64_t seed, int seeds,
             const std::string& out, const std::string& lookahead_kind, bool append) {
    const auto cfg = config_path.empty() ? SimulationConfig{} : load_config_file(config_path);
    cfg.validate();
    const auto schemes = schemes_for(scheme_name, cfg.scheduler.scheme);
    const bool needs_forecast =
        std::find(schemes.begin(), schemes.end(), Scheme::proposed) != schemes.end() && lookahead_kind == "gru";
    std::optional<ForecastPair> models;
    if (needs_forecast) models = forecasters(cfg, seed);

    if (!append) {
        std::filesystem::remove(std::filesystem::path(out) / "summary.csv");
        for (Scheme sc : schemes) {
            for (const char* kind : {"dispatch_", "fleet_"}) {
                std::filesystem::remove(std::filesystem::path(out) / (kind + std::string(to_string(sc)) + ".csv"));
            }
        }
    }

    int violations = 0;
    for (int k = 0; k < seeds; ++k) {
        const std::uint64_t s = seed + static_cast<std::uint64_t>(k);
        const auto profiles = make_profiles(cfg, s);
        const auto fleet = make_fleet(cfg, s);
        Lookahead ahead;
        if (lookahead_kind == "perfect") {
            ahead = perfect_lookahead(profiles, cfg.scheduler.lookahead_k);
        } else if (models) {
            ahead = gru_lookahead(models->load, models->pv, profiles, cfg.scheduler.lookahead_k,
                                  cfg.scenario.pv_capacity);
        }
        for (Scheme sc : schemes) {
            const auto r = run_day(cfg, profiles, fleet, sc, s, ahead);
            emit_reports(r, out, true);
            std::printf("%-12s seed %-4llu cost %9.3f USD  at target %6.2f%%  discharge %7.2f kWh  violations %zu\n",
                        std::string(to_string(sc)).c_str(), static_cast<unsigned long long>(s), r.total_cost,
                        r.pct_at_target(), r.ev_discharge_kwh, r.violations.size());
            for (const auto& v : r.violations) std::fprintf(stderr, "violation: %s\n", v.c_str());
            violations += static_cast<int>(r.violations.size());
        }
    }
    return violations == 0 ? 0 : kExitViolations;
}

int train_forecast(const std::string& config_path, const std::string& series_path, const std::string& out,
                   std::optional<std::uint64_t> seed) {
    const auto cfg = config_path.empty() ? SimulationConfig{} : load_config_file(config_path);
    const auto series = forecast::read_series_csv(series_path);
    const auto r = forecast::train(series, cfg.forecast.shape, cfg.forecast.train, seed.value_or(cfg.forecast.seed));
    r.model.save(out);
    std::printf("validation RMSE %.4f (untrained %.4f), checkpoint %s\n", r.rmse_valid, r.rmse_valid_initial,
                out.c_str());
    return 0;
}

int report(const std::string& dir) {
    const auto rows = read_summary((std::filesystem::path(dir) / "summary.csv").string());
    struct Acc {
        int runs = 0;
        double cost = 0.0, target = 0.0, discharge = 0.0;
        int violations = 0;
    };
    std::map<Scheme, Acc> by;
    for (const auto& r : rows) {
        auto& a = by[r.scheme];
        ++a.runs;
        a.cost += r.total_cost;
        a.target += r.pct_at_target;
        a.discharge += r.ev_discharge_kwh;
        a.violations += r.violations;
    }
    std::printf("%-12s %5s %12s %12s %14s %10s\n", "scheme", "runs", "mean_cost", "at_target%", "discharge_kWh",
                "violations");
    int violations = 0;
    for (const auto& [s, a] : by) {
        std::printf("%-12s %5d %12.3f %12.2f %14.2f %10d\n", std::string(to_string(s)).c_str(), a.runs,
                    a.cost / a.runs, a.target / a.runs, a.discharge / a.runs, a.violations);
        violations += a.violations;
    }
    return violations == 0 ? 0 : kExitViolations;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"PV charging station simulator with GA scheduling"};
    app.require_subcommand(1);

    std::string config_path, scheme, out = "out", lookahead = "gru";
    std::uint64_t seed = 1;
    int seeds = 1;
    bool append = false;
    auto* sim = app.add_subcommand("simulate", "Simulate one or more days");
    sim->add_option("--config", config_path, "Key = value config file")->check(CLI::ExistingFile);
    sim->add_option("--scheme", scheme, "charge_only, conventional, proposed or all");
    sim->add_option("--seed", seed, "First seed");
    sim->add_option("--seeds", seeds, "Number of consecutive seeds")->check(CLI::Range(1, 100000));
    sim->add_option("--out", out, "Output directory");
    sim->add_option("--lookahead", lookahead, "Forecast source for the proposed scheme")
        ->check(CLI::IsMember({"gru", "perfect"}));
    sim->add_flag("--append", append, "Append to existing reports");

    std::string series, checkpoint;
    std::optional<std::uint64_t> train_seed;
    auto* tr = app.add_subcommand("train-forecast", "Train a forecaster on a value_kw series");
    tr->add_option("--config", config_path, "Key = value config file")->check(CLI::ExistingFile);
    tr->add_option("--series", series, "CSV with a value_kw column")->required()->check(CLI::ExistingFile);
    tr->add_option("--out", checkpoint, "Checkpoint path")->required();
    tr->add_option("--seed", train_seed, "Initialisation seed");

    std::string in;
    auto* rep = app.add_subcommand("report", "Summarise summary.csv per scheme");
    rep->add_option("--in", in, "Directory holding summary.csv")->required()->check(CLI::ExistingDirectory);

    CLI11_PARSE(app, argc, argv);
    try {
        if (*sim) return simulate(config_path, scheme, seed, seeds, out, lookahead, append);
        if (*tr) return train_forecast(config_path, series, checkpoint, train_seed);
        return report(in);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
