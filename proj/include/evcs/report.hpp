#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "csv.hpp"
#include "harness.hpp"

namespace evcs {

inline const std::vector<std::string>& dispatch_columns() {
    static const std::vector<std::string> cols{
        "seed",          "slot",          "load_kw",      "pv_kw",          "cap_kw",           "tou_usd_per_kwh",
        "sell_usd_per_kwh", "pv_load_kw", "pv_ev_kw",     "grid_load_kw",   "grid_ev_kw",       "ev_load_kw",
        "ev_ev_kw",      "ev_charge_kw",  "ev_discharge_kw", "pv_curtailed_kw", "n_parked",       "n_charging",
        "n_discharging", "cost_usd",      "fitness",      "feasible"};
    return cols;
}

inline const std::vector<std::string>& summary_columns() {
    static const std::vector<std::string> cols{
        "scheme",          "seed",         "total_cost_usd",  "grid_purchase_kwh", "pv_used_kwh",
        "ev_charge_kwh",   "ev_discharge_kwh", "pct_at_target", "grid_load_cost_usd", "forecast_fallbacks",
        "violations"};
    return cols;
}

namespace detail {

inline void write_row(std::ostream& os, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) os << (i ? "," : "") << fields[i];
    os << '\n';
}

inline std::ofstream open_out(const std::filesystem::path& path, bool append, const std::vector<std::string>& header) {
    const bool fresh = !append || !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
    std::ofstream os(path, append ? std::ios::app : std::ios::trunc);
    if (!os) throw ConfigError("cannot write '" + path.string() + "'");
    if (fresh) write_row(os, header);
    return os;
}

} // namespace detail

/// Writes dispatch_<scheme>.csv, fleet_<scheme>.csv and a summary.csv row
/// into `dir`. With `append` rows are added to existing files so several
/// seeds can share them.
inline void emit_reports(const DayResult& r, const std::filesystem::path& dir, bool append = false) {
    using csv::fmt;
    std::filesystem::create_directories(dir);
    const std::string scheme(to_string(r.scheme));
    const std::string seed = std::to_string(r.seed);

    {
        auto os = detail::open_out(dir / ("dispatch_" + scheme + ".csv"), append, dispatch_columns());
        for (const auto& s : r.slots) {
            const auto& d = s.dispatch;
            detail::write_row(os, {seed,
                                   std::to_string(s.t),
                                   fmt(s.load),
                                   fmt(s.pv),
                                   fmt(s.cap),
                                   fmt(s.tou),
                                   fmt(s.sell),
                                   fmt(d.pw_pv_load),
                                   fmt(d.pw_pv_ev),
                                   fmt(d.pw_grid_load),
                                   fmt(d.pw_grid_ev),
                                   fmt(d.pw_ev_load),
                                   fmt(d.pw_ev_ev),
                                   fmt(d.ev_charge_total),
                                   fmt(d.ev_discharge_total),
                                   fmt(d.pv_curtailed()),
                                   std::to_string(s.n_parked),
                                   std::to_string(s.n_charging),
                                   std::to_string(s.n_discharging),
                                   fmt(s.cost),
                                   fmt(s.fitness),
                                   s.feasible ? "1" : "0"});
        }
    }
    {
        auto os = detail::open_out(dir / ("fleet_" + scheme + ".csv"), append,
                                   {"seed", "ev_id", "mode", "arrival_slot", "departure_slot", "v2g_eligible",
                                    "initial_soc", "final_soc", "switch_events", "reached_target"});
        for (const auto& e : r.evs) {
            detail::write_row(os, {seed, std::to_string(e.id), std::string(to_string(e.mode)),
                                   std::to_string(e.arrival), std::to_string(e.departure),
                                   e.v2g_eligible ? "1" : "0", fmt(e.initial_soc), fmt(e.final_soc),
                                   std::to_string(e.switch_events), e.reached_target ? "1" : "0"});
        }
    }
    {
        auto os = detail::open_out(dir / "summary.csv", true, summary_columns());
        detail::write_row(os, {scheme, seed, fmt(r.total_cost), fmt(r.grid_purchase_kwh), fmt(r.pv_used_kwh),
                               fmt(r.ev_charge_kwh), fmt(r.ev_discharge_kwh), fmt(r.pct_at_target()),
                               fmt(r.grid_load_cost), std::to_string(r.forecast_fallbacks),
                               std::to_string(r.violations.size())});
    }
}

struct SummaryRow {
    Scheme scheme = Scheme::proposed;
    std::uint64_t seed = 0;
    double total_cost = 0.0;
    double grid_purchase_kwh = 0.0;
    double pv_used_kwh = 0.0;
    double ev_charge_kwh = 0.0;
    double ev_discharge_kwh = 0.0;
    double pct_at_target = 0.0;
    double grid_load_cost = 0.0;
    int forecast_fallbacks = 0;
    int violations = 0;
};

inline std::vector<SummaryRow> read_summary(const std::string& path) {
    const auto table = csv::read_file(path);
    std::vector<int> idx;
    for (const auto& c : summary_columns()) idx.push_back(table.require_column(c, path));
    std::vector<SummaryRow> out;
    for (const auto& row : table.rows) {
        const auto f = [&](int k) -> const std::string& { return row[static_cast<std::size_t>(idx[k])]; };
        SummaryRow s;
        s.scheme = parse_scheme(f(0));
        s.seed = static_cast<std::uint64_t>(csv::to_long(f(1), path));
        s.total_cost = csv::to_double(f(2), path);
        s.grid_purchase_kwh = csv::to_double(f(3), path);
        s.pv_used_kwh = csv::to_double(f(4), path);
        s.ev_charge_kwh = csv::to_double(f(5), path);
        s.ev_discharge_kwh = csv::to_double(f(6), path);
        s.pct_at_target = csv::to_double(f(7), path);
        s.grid_load_cost = csv::to_double(f(8), path);
        s.forecast_fallbacks = static_cast<int>(csv::to_long(f(9), path));
        s.violations = static_cast<int>(csv::to_long(f(10), path));
        out.push_back(s);
    }
    return out;
}

/// Per-seed slot costs read back from a dispatch file, summed per seed.
inline std::map<std::uint64_t, double> read_dispatch_costs(const std::string& path) {
    const auto table = csv::read_file(path);
    const int cs = table.require_column("seed", path);
    const int cc = table.require_column("cost_usd", path);
    std::map<std::uint64_t, double> out;
    for (const auto& row : table.rows) {
        out[static_cast<std::uint64_t>(csv::to_long(row[static_cast<std::size_t>(cs)], path))] +=
            csv::to_double(row[static_cast<std::size_t>(cc)], path);
    }
    return out;
}

} // namespace evcs
