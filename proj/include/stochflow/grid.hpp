#pragma once

#include "stochflow/distribution.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

namespace stochflow::grid {

enum class BusKind { Slack, PV, PQ };

/// One network bus. All quantities per-unit, angles in radians.
struct Bus {
  int id = 0;
  BusKind kind = BusKind::PQ;
  double v_mag_init = 1.0;
  double v_ang_init = 0.0;
  double p_load = 0.0;
  double q_load = 0.0;
  double p_gen = 0.0;
  double q_gen = 0.0;
  std::optional<double> v_setpoint; // PV (required) and Slack (optional)

  bool operator==(const Bus&) const = default;
};

/// Pi-model branch; the off-nominal tap sits on the from side.
struct Branch {
  int from_bus = 0;
  int to_bus = 0;
  double r = 0.0;
  double x = 0.0;
  double b_shunt = 0.0;
  double tap = 1.0;

  bool operator==(const Branch&) const = default;
};

enum class LoadQuantity { ActiveLoad, ReactiveLoad };

/// load = base + scale * xi            (Additive)
/// load = base * (1 + scale * xi)      (Relative)
enum class MappingKind { Additive, Relative };

struct UncertainLoad {
  int bus_id = 0;
  LoadQuantity quantity = LoadQuantity::ActiveLoad;
  Family family = Family::Gaussian;
  MappingKind mapping = MappingKind::Relative;
  double base = 0.0;
  double scale = 0.0;

  double value(double xi) const;
  /// Physical (mean, std) for Gaussian entries, (lo, hi) for Uniform ones.
  std::pair<double, double> physical_parameters() const;

  bool operator==(const UncertainLoad&) const = default;
};

struct UncertaintySpec {
  std::vector<UncertainLoad> entries;

  std::size_t dimension() const { return entries.size(); }
  std::vector<Distribution> distributions() const;

  bool operator==(const UncertaintySpec&) const = default;
};

enum class OutputUnits { PerUnit, Megawatt };

/// Observed quantity y: active power entering the branch at `from_bus`, where
/// (from_bus, to_bus) names a branch in either orientation.
struct OutputSpec {
  int from_bus = 0;
  int to_bus = 0;
  OutputUnits units = OutputUnits::PerUnit;

  bool operator==(const OutputSpec&) const = default;
};

class GridCase {
public:
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  double base_mva = 100.0;
  UncertaintySpec uncertainty;
  OutputSpec output;

  /// Checks every invariant and rebuilds the id lookup; throws ValidationError.
  void validate();

  std::size_t bus_count() const { return buses.size(); }
  std::size_t dimension() const { return uncertainty.dimension(); }
  /// Position of bus `id` in `buses`; throws ValidationError if unknown.
  std::size_t bus_index(int id) const;
  std::size_t slack_index() const;
  /// Branch carrying the output and whether it is read from its to-end.
  std::pair<std::size_t, bool> output_branch() const;

  bool operator==(const GridCase& other) const;

private:
  std::unordered_map<int, std::size_t> index_;
};

GridCase parse_case(const nlohmann::json& doc);
GridCase load_case(const std::filesystem::path& path);
nlohmann::json serialize(const GridCase& grid);

/// Stable 64-bit FNV-1a hash of the serialized case.
std::uint64_t case_hash(const GridCase& grid);

/// Copy of `grid` with each uncertain load set from `xi`; throws DimensionMismatch.
GridCase apply_parameters(const GridCase& grid, std::span<const double> xi);

std::string_view kind_name(BusKind kind);

} // namespace stochflow::grid
