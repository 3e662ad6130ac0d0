#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fedscope::telemetry {

enum class EventKind { compute, communication };

// One costed step of the experiment. Compute events carry total flops
// (forward plus backward); communication events carry payload bytes.
// `actor` is a client id, or -1 for the server.
struct EnergyEvent {
  int session = 0;
  int round = 0;
  int actor = 0;
  EventKind kind = EventKind::compute;
  double wall_seconds = 0.0;
  std::int64_t bytes = 0;
  std::int64_t flops = 0;
};

// Append-only cost record for one experiment. Events are kept in append
// order, which the engine fixes (sessions sequentially, clients ascending),
// so totals are reproducible.
class EnergyLedger {
 public:
  void add(const EnergyEvent& event);
  void append(const EnergyLedger& other);
  const std::vector<EnergyEvent>& events() const { return events_; }
  std::int64_t total_flops() const { return flops_; }
  std::int64_t total_bytes() const { return bytes_; }
  double total_wall_seconds() const { return wall_; }

 private:
  std::vector<EnergyEvent> events_;
  std::int64_t flops_ = 0;
  std::int64_t bytes_ = 0;
  double wall_ = 0.0;
};

enum class PowerMode { flop_proxy, wallclock };

// Converts ledger events into energy and time totals.
//
// flop_proxy derives both energy and duration from operation counts, so
// totals are bit-reproducible across machines and thread counts. wallclock
// prices measured durations instead, which mirrors how such totals are
// usually collected on hardware but is inherently machine-dependent; reports
// mark it as non-reproducible.
struct PowerModel {
  PowerMode mode = PowerMode::flop_proxy;
  double active_watts = 250.0;
  double idle_watts = 0.0;
  bool idle_gaps = false;        // wallclock only: price each actor's idle time
  double joules_per_flop = 1e-10;
  double joules_per_byte = 1e-7;
  double flops_per_second = 5e12;  // flop_proxy: synthesized compute duration
  double bytes_per_second = 1e9;   // flop_proxy: synthesized transfer duration

  void validate() const;
};

PowerMode parse_power_mode(const std::string& text);  // "flop-proxy" | "wallclock"
std::string power_mode_name(PowerMode mode);

struct EnergyTotals {
  double energy_wh = 0.0;
  double time_s = 0.0;
};

// flop_proxy: E = (flops * J/flop + bytes * J/byte) / 3600,
//             T = flops / flops_per_second + bytes / bytes_per_second.
// wallclock:  E = sum(active_watts * wall) / 3600 (+ idle gaps if enabled),
//             T = sum(wall) over the sequential timeline.
EnergyTotals energy_total(const EnergyLedger& ledger, const PowerModel& model);

}  // namespace fedscope::telemetry
