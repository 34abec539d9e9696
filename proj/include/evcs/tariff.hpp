#pragma once

#include <array>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "common.hpp"
#include "csv.hpp"

namespace evcs {

/// Half-open band [start_slot, end_slot). start > end wraps midnight;
/// start == end is rejected rather than read as a full day.
struct TouBand {
    int start_slot = 0;
    int end_slot = 0;
    double price = 0.0; // USD/kWh
};

/// Parses "HH:MM-HH:MM=price". "24:00" is accepted as an end time.
inline TouBand parse_band(std::string_view text) {
    const auto fail = [&] { return ConfigError("bad TOU band '" + std::string(text) + "'"); };
    const auto eq = text.find('=');
    const auto dash = text.find('-');
    if (eq == std::string_view::npos || dash == std::string_view::npos || dash > eq) throw fail();

    const auto parse_clock = [&](std::string_view hhmm) {
        const auto s = csv::trim(hhmm);
        const auto colon = s.find(':');
        if (colon == std::string::npos) throw fail();
        long h = 0;
        long m = 0;
        try {
            h = csv::to_long(s.substr(0, colon), "tariff.bands");
            m = csv::to_long(s.substr(colon + 1), "tariff.bands");
        } catch (const ConfigError&) {
            throw fail();
        }
        if (h < 0 || h > 24 || m < 0 || m > 59 || (h == 24 && m != 0) || m % kMinutesPerSlot != 0) {
            throw fail();
        }
        return static_cast<int>((h * 60 + m) / kMinutesPerSlot);
    };

    TouBand band;
    band.start_slot = parse_clock(text.substr(0, dash)) % kSlotsPerDay;
    band.end_slot = parse_clock(text.substr(dash + 1, eq - dash - 1)) % kSlotsPerDay;
    try {
        band.price = csv::to_double(csv::trim(text.substr(eq + 1)), "tariff.bands");
    } catch (const ConfigError&) {
        throw fail();
    }
    return band;
}

inline std::vector<TouBand> parse_bands(std::string_view list) {
    std::vector<TouBand> bands;
    for (const auto& item : csv::split(list, ',')) {
        if (!item.empty()) bands.push_back(parse_band(item));
    }
    return bands;
}

/// Demand-response TOU table used by the station operator.
inline std::vector<TouBand> default_tou_bands() {
    return parse_bands("23:00-09:00=0.055, 09:00-10:00=0.108, 10:00-12:00=0.179,"
                       "12:00-13:00=0.108, 13:00-17:00=0.179, 17:00-23:00=0.108");
}

inline constexpr double kDefaultRecWeight = 1.2;
inline constexpr double kDefaultRecPrice = 0.05;
inline constexpr double kDefaultSmp = 0.10;

/// Purchase and selling prices per slot. Validated once on construction,
/// immutable afterwards.
class TariffSchedule {
public:
    TariffSchedule() : TariffSchedule(default_tou_bands(), std::vector<double>{kDefaultSmp}) {}

    /// `smp` is either a single constant or one sample per slot of the day
    /// (longer series are used as-is for multi-day horizons).
    TariffSchedule(std::vector<TouBand> bands, std::vector<double> smp,
                   double rec_price = kDefaultRecPrice, double rec_weight = kDefaultRecWeight)
        : bands_(std::move(bands)), smp_(std::move(smp)), rec_price_(rec_price), rec_weight_(rec_weight) {
        validate();
    }

    /// TOU price of the band containing slot t (t reduced mod 96).
    double purchase_price(int t) const { return tou_by_slot_[static_cast<std::size_t>(slot_of_day(t))]; }

    /// SMP(t) + w * REC.
    double selling_price(int t) const { return smp(t) + rec_weight_ * rec_price_; }

    double smp(int t) const {
        if (smp_.size() == 1) return smp_.front();
        if (t >= 0 && static_cast<std::size_t>(t) < smp_.size()) return smp_[static_cast<std::size_t>(t)];
        return smp_[static_cast<std::size_t>(slot_of_day(t))];
    }

    const std::vector<TouBand>& bands() const { return bands_; }
    double rec_price() const { return rec_price_; }
    double rec_weight() const { return rec_weight_; }

private:
    void validate() {
        if (bands_.empty()) throw ConfigError("tariff: no TOU bands");
        std::array<int, kSlotsPerDay> cover{};
        for (const auto& b : bands_) {
            if (b.start_slot < 0 || b.start_slot >= kSlotsPerDay || b.end_slot < 0 ||
                b.end_slot >= kSlotsPerDay) {
                throw ConfigError("tariff: band slot out of range");
            }
            if (b.start_slot == b.end_slot) throw ConfigError("tariff: empty or ambiguous band");
            if (!(b.price >= 0.0) || !std::isfinite(b.price)) throw ConfigError("tariff: negative band price");
            for (int s = b.start_slot; s != b.end_slot; s = (s + 1) % kSlotsPerDay) {
                ++cover[static_cast<std::size_t>(s)];
                tou_by_slot_[static_cast<std::size_t>(s)] = b.price;
            }
        }
        for (int s = 0; s < kSlotsPerDay; ++s) {
            const int c = cover[static_cast<std::size_t>(s)];
            if (c == 0) throw ConfigError("tariff: TOU bands leave slot " + std::to_string(s) + " uncovered");
            if (c > 1) throw ConfigError("tariff: TOU bands overlap at slot " + std::to_string(s));
        }
        if (smp_.empty()) throw ConfigError("tariff: no SMP samples");
        if (smp_.size() != 1 && smp_.size() < static_cast<std::size_t>(kSlotsPerDay)) {
            throw ConfigError("tariff: SMP series has " + std::to_string(smp_.size()) +
                              " samples, need 1 or >= 96");
        }
        for (double v : smp_) {
            if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("tariff: negative or non-finite SMP");
        }
        if (!(rec_price_ >= 0.0)) throw ConfigError("tariff: negative REC price");
        if (!(rec_weight_ > 0.0)) throw ConfigError("tariff: REC weight must be positive");
    }

    std::vector<TouBand> bands_;
    std::vector<double> smp_;
    double rec_price_;
    double rec_weight_;
    std::array<double, kSlotsPerDay> tou_by_slot_{};
};

/// Loads a `slot,smp_usd_per_kwh` file.
inline std::vector<double> read_smp_csv(const std::string& path) {
    return csv::read_series(path, "smp_usd_per_kwh");
}

} // namespace evcs
