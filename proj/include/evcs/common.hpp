#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace evcs {

/// One day is 96 slots of 15 minutes.
inline constexpr int kSlotsPerDay = 96;
inline constexpr double kSlotHours = 0.25;
inline constexpr int kMinutesPerSlot = 15;

/// Thrown when a configuration table, file, or parameter set is malformed.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Thrown when an API is called with arguments that break its precondition.
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Thrown when an internal invariant would be broken (caller bug).
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Per-slot operation assigned to a parked EV.
enum class Op : std::uint8_t { idle = 0, charge = 1, discharge = 2 };

inline constexpr std::string_view to_string(Op op) {
    switch (op) {
    case Op::idle: return "idle";
    case Op::charge: return "charge";
    case Op::discharge: return "discharge";
    }
    return "?";
}

/// Scheduling scheme under comparison.
enum class Scheme : std::uint8_t { charge_only, conventional, proposed };

inline constexpr std::string_view to_string(Scheme s) {
    switch (s) {
    case Scheme::charge_only: return "charge_only";
    case Scheme::conventional: return "conventional";
    case Scheme::proposed: return "proposed";
    }
    return "?";
}

inline Scheme parse_scheme(std::string_view name) {
    if (name == "charge_only") return Scheme::charge_only;
    if (name == "conventional") return Scheme::conventional;
    if (name == "proposed") return Scheme::proposed;
    throw ConfigError("unknown scheme '" + std::string(name) + "'");
}

/// Reduces any slot index (possibly multi-day or negative) into [0, 96).
inline constexpr int slot_of_day(int t) {
    const int r = t % kSlotsPerDay;
    return r < 0 ? r + kSlotsPerDay : r;
}

/// Slot index for a wall-clock time of day.
inline constexpr int slot_at(int hour, int minute = 0) {
    return (hour * 60 + minute) / kMinutesPerSlot;
}

} // namespace evcs
