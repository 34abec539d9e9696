#pragma once

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "common.hpp"
#include "csv.hpp"
#include "fleet.hpp"
#include "forecast.hpp"
#include "plan.hpp"
#include "scheduler.hpp"
#include "tariff.hpp"

namespace evcs {

/// Flat `section.key = value` text. `#` starts a comment. Every key must be
/// consumed by the loader; leftovers are reported as typos.
class KeyValueConfig {
public:
    static KeyValueConfig parse(std::istream& in, std::string_view source = "config") {
        KeyValueConfig cfg;
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const auto t = csv::trim(line);
            if (t.empty()) continue;
            const auto eq = t.find('=');
            if (eq == std::string::npos) {
                throw ConfigError(std::string(source) + ":" + std::to_string(line_no) + ": expected key = value");
            }
            auto key = csv::trim(t.substr(0, eq));
            if (key.empty()) throw ConfigError(std::string(source) + ":" + std::to_string(line_no) + ": empty key");
            if (cfg.values_.count(key)) {
                throw ConfigError(std::string(source) + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
            }
            cfg.values_[key] = csv::trim(t.substr(eq + 1));
        }
        return cfg;
    }

    static KeyValueConfig parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config '" + path + "'");
        return parse(in, path);
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

    std::string get(const std::string& key, const std::string& fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        used_.insert(key);
        return it->second;
    }

    double get(const std::string& key, double fallback) const {
        return has(key) ? csv::to_double(get(key, std::string{}), key) : fallback;
    }

    int get(const std::string& key, int fallback) const {
        return has(key) ? static_cast<int>(csv::to_long(get(key, std::string{}), key)) : fallback;
    }

    std::uint64_t get(const std::string& key, std::uint64_t fallback) const {
        if (!has(key)) return fallback;
        const long v = csv::to_long(get(key, std::string{}), key);
        if (v < 0) throw ConfigError(key + ": must be non-negative");
        return static_cast<std::uint64_t>(v);
    }

    /// Throws if any key was never read.
    void require_all_used() const {
        std::string unknown;
        for (const auto& [k, v] : values_) {
            if (!used_.count(k)) unknown += (unknown.empty() ? "" : ", ") + k;
        }
        if (!unknown.empty()) throw ConfigError("unknown config keys: " + unknown);
    }

private:
    std::map<std::string, std::string> values_;
    mutable std::set<std::string> used_;
};

struct ForecastSettings {
    forecast::ModelShape shape;
    forecast::TrainConfig train;
    std::string load_checkpoint; // empty: train on history
    std::string pv_checkpoint;
    std::uint64_t seed = 7;
};

struct ScenarioConfig {
    int slots_per_day = kSlotsPerDay;
    double dt_hours = kSlotHours;
    double pv_capacity = 90.0; // kW
    std::string load_csv;      // empty: synthetic
    std::string pv_csv;        // direct kW
    std::string weather_csv;   // irradiance + temperature, used when pv_csv is empty
    double pv_temp_coeff = 0.004; // 1/degC
    int history_days = 14;        // synthetic days before the simulated one

    void validate() const {
        if (slots_per_day != kSlotsPerDay) throw ConfigError("scenario.slots_per_day must be 96");
        if (std::abs(slots_per_day * dt_hours - 24.0) > 1e-9) {
            throw ConfigError("scenario: slots_per_day * dt_hours must equal 24");
        }
        if (!(pv_capacity >= 0.0)) throw ConfigError("scenario.pv_capacity must be >= 0");
        if (history_days < 0) throw ConfigError("scenario.history_days must be >= 0");
    }
};

struct SimulationConfig {
    TariffSchedule tariff;
    FleetConfig fleet;
    std::string fleet_csv;
    ForecastSettings forecast;
    SchedulerConfig scheduler;
    PlanSettings plan;
    ScenarioConfig scenario;

    void validate() const {
        if (plan.restarts < 1) throw ConfigError("plan.restarts must be >= 1");
        if (!(plan.keep_bonus >= 0.0) || !(plan.jitter_sd >= 0.0)) {
            throw ConfigError("plan.keep_bonus and plan.jitter_sd must be >= 0");
        }
        fleet.validate();
        forecast.shape.validate();
        forecast.train.validate();
        scheduler.validate();
        scenario.validate();
        if (std::abs(fleet.dt_hours - scenario.dt_hours) > 1e-12) {
            throw ConfigError("fleet and scenario slot lengths differ");
        }
    }
};

inline std::array<double, 5> parse_weights(const std::string& text) {
    const auto parts = csv::split(text, ',');
    if (parts.size() != 5) throw ConfigError("scheduler.weights needs 5 comma-separated values");
    std::array<double, 5> w{};
    for (std::size_t i = 0; i < 5; ++i) w[i] = csv::to_double(parts[i], "scheduler.weights");
    return w;
}

/// Builds a validated configuration; unset keys keep their defaults.
inline SimulationConfig load_config(const KeyValueConfig& kv) {
    SimulationConfig c;

    // tariff
    {
        auto bands = kv.has("tariff.bands") ? parse_bands(kv.get("tariff.bands", std::string{})) : default_tou_bands();
        std::vector<double> smp{kDefaultSmp};
        if (kv.has("tariff.smp_csv") && kv.has("tariff.smp_const")) {
            throw ConfigError("set only one of tariff.smp_csv and tariff.smp_const");
        }
        if (kv.has("tariff.smp_csv")) smp = read_smp_csv(kv.get("tariff.smp_csv", std::string{}));
        if (kv.has("tariff.smp_const")) smp = {kv.get("tariff.smp_const", kDefaultSmp)};
        c.tariff = TariffSchedule(std::move(bands), std::move(smp), kv.get("tariff.rec_price", kDefaultRecPrice),
                                  kv.get("tariff.rec_weight", kDefaultRecWeight));
    }

    // fleet
    auto& f = c.fleet;
    f.n_evs = kv.get("fleet.n_evs", f.n_evs);
    f.capacity_kwh = kv.get("fleet.capacity_kwh", f.capacity_kwh);
    f.init_soc_mean = kv.get("fleet.init_soc_mean", f.init_soc_mean);
    f.init_soc_std = kv.get("fleet.init_soc_std", f.init_soc_std);
    f.target_soc = kv.get("fleet.target_soc", f.target_soc);
    f.soc_min = kv.get("fleet.soc_min", f.soc_min);
    f.eta_ch = kv.get("fleet.eta_ch", f.eta_ch);
    f.eta_dch = kv.get("fleet.eta_dch", f.eta_dch);
    f.margin_time = kv.get("fleet.margin_time", f.margin_time);
    f.n_max_switches = kv.get("fleet.n_max_switches", f.n_max_switches);
    f.v2g_min_park = kv.get("fleet.v2g_min_park", f.v2g_min_park);
    f.rng_seed = kv.get("fleet.rng_seed", f.rng_seed);
    f.work_arrival_mean_h = kv.get("fleet.work_arrival_mean_h", f.work_arrival_mean_h);
    f.work_arrival_sd_h = kv.get("fleet.work_arrival_sd_h", f.work_arrival_sd_h);
    f.home_arrival_mean_h = kv.get("fleet.home_arrival_mean_h", f.home_arrival_mean_h);
    f.home_arrival_sd_h = kv.get("fleet.home_arrival_sd_h", f.home_arrival_sd_h);
    c.fleet_csv = kv.get("fleet.csv", std::string{});

    // forecast
    auto& fc = c.forecast;
    const auto profile = kv.get("forecast.profile", std::string("desk"));
    if (profile == "full") {
        fc.train = forecast::TrainConfig::full();
    } else if (profile != "desk") {
        throw ConfigError("forecast.profile must be desk or full");
    }
    fc.train.epochs = kv.get("forecast.epochs", fc.train.epochs);
    fc.train.batch_size = kv.get("forecast.batch_size", fc.train.batch_size);
    fc.train.learning_rate = kv.get("forecast.learning_rate", fc.train.learning_rate);
    fc.train.grad_moving_avg = kv.get("forecast.grad_moving_avg", fc.train.grad_moving_avg);
    fc.train.dropout = kv.get("forecast.dropout", fc.train.dropout);
    fc.train.grad_clip = kv.get("forecast.grad_clip", fc.train.grad_clip);
    fc.shape.gru_layers = kv.get("forecast.gru_layers", fc.shape.gru_layers);
    fc.shape.hidden = kv.get("forecast.hidden_size", fc.shape.hidden);
    fc.shape.fc_hidden = kv.get("forecast.fc_hidden", fc.shape.fc_hidden);
    fc.load_checkpoint = kv.get("forecast.load_checkpoint", std::string{});
    fc.pv_checkpoint = kv.get("forecast.pv_checkpoint", std::string{});
    fc.seed = kv.get("forecast.seed", fc.seed);

    // scheduler
    auto& s = c.scheduler;
    s.pw_flag = kv.get("scheduler.pw_flag", s.pw_flag);
    s.dch_max_hi = kv.get("scheduler.dch_max_hi", s.dch_max_hi);
    s.dch_max_lo = kv.get("scheduler.dch_max_lo", s.dch_max_lo);
    s.pw_max = kv.get("scheduler.pw_max", s.pw_max);
    s.lookahead_k = kv.get("scheduler.lookahead_k", s.lookahead_k);
    const auto ga_profile = kv.get("scheduler.ga.profile", std::string("desk"));
    if (ga_profile == "full") {
        s.ga = ga::GaConfig::full();
    } else if (ga_profile != "desk") {
        throw ConfigError("scheduler.ga.profile must be desk or full");
    }
    s.ga.population = kv.get("scheduler.ga.population", s.ga.population);
    s.ga.generations = kv.get("scheduler.ga.generations", s.ga.generations);
    s.ga.crossover = kv.get("scheduler.ga.crossover", s.ga.crossover);
    s.ga.mutation = kv.get("scheduler.ga.mutation", s.ga.mutation);
    if (kv.has("scheduler.weights")) s.weights = parse_weights(kv.get("scheduler.weights", std::string{}));
    if (kv.has("scheduler.scheme")) s.scheme = parse_scheme(kv.get("scheduler.scheme", std::string{}));

    // day plan
    c.plan.restarts = kv.get("plan.restarts", c.plan.restarts);
    c.plan.keep_bonus = kv.get("plan.keep_bonus", c.plan.keep_bonus);
    c.plan.jitter_sd = kv.get("plan.jitter_sd", c.plan.jitter_sd);

    // scenario
    auto& sc = c.scenario;
    sc.slots_per_day = kv.get("scenario.slots_per_day", sc.slots_per_day);
    sc.dt_hours = kv.get("scenario.dt_hours", sc.dt_hours);
    sc.pv_capacity = kv.get("scenario.pv_capacity", sc.pv_capacity);
    sc.load_csv = kv.get("scenario.load_csv", std::string{});
    sc.pv_csv = kv.get("scenario.pv_csv", std::string{});
    sc.weather_csv = kv.get("scenario.weather_csv", std::string{});
    sc.pv_temp_coeff = kv.get("scenario.pv_temp_coeff", sc.pv_temp_coeff);
    sc.history_days = kv.get("scenario.history_days", sc.history_days);
    f.dt_hours = sc.dt_hours;

    kv.require_all_used();
    c.validate();
    return c;
}

inline SimulationConfig load_config_file(const std::string& path) {
    return load_config(KeyValueConfig::parse_file(path));
}

} // namespace evcs
