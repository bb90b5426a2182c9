#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "gridlin/exact_powerflow.hpp"
#include "gridlin/linalg.hpp"
#include "gridlin/linearizer.hpp"
#include "gridlin/loads.hpp"
#include "gridlin/network.hpp"

namespace gridlin {

/// Load profiles sampled at a uniform resolution.
struct TimeSeries {
  double dt_seconds = 60.0;
  std::vector<LoadSet> loads;
  /// PV active power per phase-node (length m, zero where no PV) per step.
  /// Empty when the profile carries no PV records.
  std::vector<VectorXd> pv_p;

  std::size_t horizon() const { return loads.size(); }
};

/// Inclusive step range [start, end].
struct Window {
  int start = 0;
  int end = 0;

  bool contains(int t) const { return t >= start && t <= end; }
};

/// Bus subset; `all` overrides the explicit list.
struct BusScope {
  bool all = false;
  std::vector<int> buses;

  bool contains(int bus) const;
  bool empty() const { return !all && buses.empty(); }
};

struct MeasurementModel {
  double noise_sigma = 0.0;  // per-unit std of additive magnitude noise
  BusScope noisy_buses{true, {}};
  std::vector<Window> windows;  // empty: noise at every step
  std::uint64_t seed = 0;

  bool noisy_at(int bus, int t) const;
};

struct FailureModel {
  BusScope failed_buses;  // empty: no failures
  std::vector<Window> windows;

  bool failed_at(int bus, int t) const;
};

/// Validates windows (start <= end, non-overlapping, ascending) and sigma >= 0.
void validate(const MeasurementModel& mm);
void validate(const FailureModel& fm);

/// Last delivered measurement per bus plus the noise generator state.
struct MeasurementStore {
  std::vector<std::optional<VectorXcd>> voltage;
  std::vector<std::optional<BusLoad>> load;
  std::mt19937_64 rng;

  static MeasurementStore create(const Network& net, std::uint64_t seed);
};

/// Noisy / frozen view of the true voltages at step t. Noise is additive on
/// the magnitude (angle kept). Buses inside a failure window repeat the last
/// delivered value; delivered buses refresh the store.
VectorXcd apply_measurement(const Network& net, const VectorXcd& true_v, const MeasurementModel& mm,
                            const FailureModel& fm, MeasurementStore& store, int t);

/// Load readings are exact but follow the same freeze rule as voltages.
LoadSet apply_load_measurement(const Network& net, const LoadSet& true_loads, const FailureModel& fm,
                               MeasurementStore& store, int t);

/// (100 / n) sum |est - truth| / |truth|. Throws ZeroTruthEntry / DimensionMismatch.
double mape(const VectorXd& estimate, const VectorXd& truth);

/// MAPE restricted to entries with |truth| > threshold (flows on unloaded
/// circuits are exactly zero and have no percentage error). Returns 0 when no
/// entry qualifies.
double mape_nonzero(const VectorXd& estimate, const VectorXd& truth, double threshold = 1e-9);

struct ModelErrors {
  double v_mape = 0.0;
  double p_mape = 0.0;
  double q_mape = 0.0;
};

struct StepRecord {
  int step = 0;
  VectorXd benchmark_v_mag;
  VectorXd online_v_mag;
  VectorXd lossless_v_mag;
  ModelErrors online;
  ModelErrors lossless;
};

struct SimulationReport {
  std::vector<StepRecord> steps;
  ModelErrors online_mean;
  ModelErrors lossless_mean;
  double online_v_mape_max = 0.0;
  double lossless_v_mape_max = 0.0;
};

struct SimulationOptions {
  int update_every = 1;
  SweepOptions sweep;
};

/// Closed-loop run: benchmark by the exact solver each step, parameters
/// refreshed every `update_every` steps from the measured snapshot, and each
/// step t+1 predicted with the parameters held from step t or earlier.
SimulationReport run_timeseries(const Network& net, const TimeSeries& ts, const MeasurementModel& mm,
                                const FailureModel& fm, const SimulationOptions& opts);

/// Adds PV active power at step t as negative wye consumption.
LoadSet with_pv(const Network& net, const LoadSet& loads, const VectorXd& pv_p, const VectorXd& pv_q);

}  // namespace gridlin
