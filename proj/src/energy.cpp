#include "fedscope/energy.hpp"

#include <map>

#include "fedscope/errors.hpp"

namespace fedscope::telemetry {

void EnergyLedger::add(const EnergyEvent& event) {
  if (event.wall_seconds < 0.0) throw validation_error("energy event: negative duration");
  if (event.bytes < 0 || event.flops < 0)
    throw validation_error("energy event: negative operation count");
  events_.push_back(event);
  flops_ += event.flops;
  bytes_ += event.bytes;
  wall_ += event.wall_seconds;
}

void EnergyLedger::append(const EnergyLedger& other) {
  for (const EnergyEvent& e : other.events_) add(e);
}

void PowerModel::validate() const {
  if (active_watts < 0.0 || idle_watts < 0.0 || joules_per_flop < 0.0 || joules_per_byte < 0.0 ||
      flops_per_second < 0.0 || bytes_per_second < 0.0)
    throw validation_error("power model: coefficients must be non-negative");
  if (mode == PowerMode::flop_proxy && (flops_per_second <= 0.0 || bytes_per_second <= 0.0))
    throw validation_error("power model: flop-proxy mode needs positive throughput rates");
}

PowerMode parse_power_mode(const std::string& text) {
  if (text == "flop-proxy") return PowerMode::flop_proxy;
  if (text == "wallclock") return PowerMode::wallclock;
  throw validation_error("unknown energy mode '" + text + "' (expected flop-proxy or wallclock)");
}

std::string power_mode_name(PowerMode mode) {
  return mode == PowerMode::flop_proxy ? "flop-proxy" : "wallclock";
}

EnergyTotals energy_total(const EnergyLedger& ledger, const PowerModel& model) {
  model.validate();
  EnergyTotals totals;
  if (model.mode == PowerMode::flop_proxy) {
    // Integer aggregates first, so concatenating ledgers adds exactly.
    double flops = static_cast<double>(ledger.total_flops());
    double bytes = static_cast<double>(ledger.total_bytes());
    totals.energy_wh = (flops * model.joules_per_flop + bytes * model.joules_per_byte) / 3600.0;
    totals.time_s = flops / model.flops_per_second + bytes / model.bytes_per_second;
    return totals;
  }

  totals.time_s = ledger.total_wall_seconds();
  totals.energy_wh = model.active_watts * ledger.total_wall_seconds() / 3600.0;
  if (model.idle_gaps) {
    // Sequential timeline: while one actor works, every other known actor
    // idles. Gap per actor = total timeline minus its own busy time.
    std::map<int, double> busy;
    for (const EnergyEvent& e : ledger.events()) busy[e.actor] += e.wall_seconds;
    for (const auto& [actor, seconds] : busy)
      totals.energy_wh += model.idle_watts * (totals.time_s - seconds) / 3600.0;
  }
  return totals;
}

}  // namespace fedscope::telemetry
