#include "stochflow/grid.hpp"

#include "stochflow/error.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace stochflow::grid {

using nlohmann::json;

namespace {

constexpr double deg_to_rad = std::numbers::pi / 180.0;

BusKind parse_kind(const std::string& s) {
  if (s == "slack") return BusKind::Slack;
  if (s == "pv") return BusKind::PV;
  if (s == "pq") return BusKind::PQ;
  throw ParseError("unknown bus kind '" + s + "'");
}

LoadQuantity parse_quantity(const std::string& s) {
  if (s == "p" || s == "active") return LoadQuantity::ActiveLoad;
  if (s == "q" || s == "reactive") return LoadQuantity::ReactiveLoad;
  throw ParseError("unknown load quantity '" + s + "'");
}

MappingKind parse_mapping(const std::string& s) {
  if (s == "additive") return MappingKind::Additive;
  if (s == "relative") return MappingKind::Relative;
  throw ParseError("unknown mapping '" + s + "'");
}

OutputUnits parse_units(const std::string& s) {
  if (s == "pu") return OutputUnits::PerUnit;
  if (s == "mw") return OutputUnits::Megawatt;
  throw ParseError("unknown output units '" + s + "'");
}

double& load_slot(Bus& bus, LoadQuantity q) {
  return q == LoadQuantity::ActiveLoad ? bus.p_load : bus.q_load;
}

Bus parse_bus(const json& j) {
  Bus bus;
  bus.id = j.at("id").get<int>();
  bus.kind = parse_kind(j.at("kind").get<std::string>());
  bus.v_mag_init = j.value("v_mag", 1.0);
  bus.v_ang_init = j.value("v_ang", 0.0) * deg_to_rad;
  bus.p_load = j.value("p_load", 0.0);
  bus.q_load = j.value("q_load", 0.0);
  bus.p_gen = j.value("p_gen", 0.0);
  bus.q_gen = j.value("q_gen", 0.0);
  if (j.contains("v_setpoint")) bus.v_setpoint = j.at("v_setpoint").get<double>();
  else if (bus.kind != BusKind::PQ && j.contains("v_mag")) bus.v_setpoint = bus.v_mag_init;
  return bus;
}

Branch parse_branch(const json& j) {
  Branch br;
  br.from_bus = j.at("from_bus").get<int>();
  br.to_bus = j.at("to_bus").get<int>();
  br.r = j.value("r", 0.0);
  br.x = j.value("x", 0.0);
  br.b_shunt = j.value("b_shunt", 0.0);
  br.tap = j.value("tap", 1.0);
  return br;
}

// Accepts either (mapping, base, scale) or physical parameters folded into an
// additive mapping: Gaussian (mean, std), Uniform (lo, hi).
UncertainLoad parse_uncertain(const json& j, const std::vector<Bus>& buses) {
  UncertainLoad u;
  u.bus_id = j.at("bus").get<int>();
  u.quantity = parse_quantity(j.value("quantity", std::string("p")));
  u.family = parse_family(j.value("distribution", std::string("gaussian")));

  if (j.contains("mean") || j.contains("std")) {
    if (u.family != Family::Gaussian) throw ParseError("mean/std given for a non-Gaussian entry");
    u.mapping = MappingKind::Additive;
    u.base = j.at("mean").get<double>();
    u.scale = j.at("std").get<double>();
    return u;
  }
  if (j.contains("lo") || j.contains("hi")) {
    if (u.family != Family::Uniform) throw ParseError("lo/hi given for a non-uniform entry");
    const double lo = j.at("lo").get<double>();
    const double hi = j.at("hi").get<double>();
    u.mapping = MappingKind::Additive;
    u.base = 0.5 * (lo + hi);
    u.scale = 0.5 * (hi - lo);
    return u;
  }

  u.mapping = parse_mapping(j.value("mapping", std::string("relative")));
  u.scale = j.at("scale").get<double>();
  if (j.contains("base")) {
    u.base = j.at("base").get<double>();
  } else {
    // Default base: the bus's nominal load of that quantity.
    u.base = 0.0;
    bool found = false;
    for (const Bus& b : buses) {
      if (b.id == u.bus_id) {
        u.base = u.quantity == LoadQuantity::ActiveLoad ? b.p_load : b.q_load;
        found = true;
      }
    }
    if (!found) throw ValidationError("uncertainty references unknown bus " + std::to_string(u.bus_id));
  }
  return u;
}

} // namespace

double UncertainLoad::value(double xi) const {
  return mapping == MappingKind::Additive ? base + scale * xi : base * (1.0 + scale * xi);
}

std::pair<double, double> UncertainLoad::physical_parameters() const {
  const double spread = mapping == MappingKind::Additive ? scale : base * scale;
  if (family == Family::Uniform) return {base - std::abs(spread), base + std::abs(spread)};
  return {base, std::abs(spread)};
}

std::vector<Distribution> UncertaintySpec::distributions() const {
  std::vector<Distribution> out;
  out.reserve(entries.size());
  for (const auto& e : entries)
    out.push_back(e.family == Family::Uniform ? Distribution::uniform() : Distribution::gaussian());
  return out;
}

void GridCase::validate() {
  if (!(base_mva > 0.0)) throw ValidationError("base_mva must be positive");
  if (buses.empty()) throw ValidationError("case has no buses");

  index_.clear();
  std::size_t slack_count = 0;
  for (std::size_t i = 0; i < buses.size(); ++i) {
    const Bus& b = buses[i];
    if (!index_.emplace(b.id, i).second)
      throw ValidationError("duplicate bus id " + std::to_string(b.id));
    if (!(b.v_mag_init > 0.0))
      throw ValidationError("bus " + std::to_string(b.id) + " has non-positive initial voltage");
    if (b.kind == BusKind::Slack) ++slack_count;
    if (b.kind == BusKind::PV && !b.v_setpoint)
      throw ValidationError("PV bus " + std::to_string(b.id) + " has no voltage setpoint");
    if (b.v_setpoint && !(*b.v_setpoint > 0.0))
      throw ValidationError("bus " + std::to_string(b.id) + " has non-positive voltage setpoint");
  }
  if (slack_count != 1)
    throw ValidationError("expected exactly one slack bus, found " + std::to_string(slack_count));

  for (const Branch& br : branches) {
    const auto tag = std::to_string(br.from_bus) + "-" + std::to_string(br.to_bus);
    if (!index_.contains(br.from_bus) || !index_.contains(br.to_bus))
      throw ValidationError("branch " + tag + " references an unknown bus");
    if (br.from_bus == br.to_bus) throw ValidationError("branch " + tag + " is a self loop");
    if (br.r == 0.0 && br.x == 0.0) throw ValidationError("branch " + tag + " has zero impedance");
    if (!(br.tap > 0.0)) throw ValidationError("branch " + tag + " has non-positive tap");
  }

  std::set<std::pair<int, LoadQuantity>> seen;
  for (const UncertainLoad& u : uncertainty.entries) {
    if (!seen.emplace(u.bus_id, u.quantity).second)
      throw ValidationError("bus " + std::to_string(u.bus_id) + " has the same uncertain quantity twice");
    const auto it = index_.find(u.bus_id);
    if (it == index_.end())
      throw ValidationError("uncertainty references unknown bus " + std::to_string(u.bus_id));
    if (buses[it->second].kind != BusKind::PQ)
      throw ValidationError("uncertain bus " + std::to_string(u.bus_id) + " is not a PQ bus");
    if (u.family == Family::Custom)
      throw ValidationError("case files support gaussian and uniform parameters only");
  }

  output_branch();
}

std::size_t GridCase::bus_index(int id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) throw ValidationError("unknown bus id " + std::to_string(id));
  return it->second;
}

std::size_t GridCase::slack_index() const {
  for (std::size_t i = 0; i < buses.size(); ++i)
    if (buses[i].kind == BusKind::Slack) return i;
  throw ValidationError("case has no slack bus");
}

std::pair<std::size_t, bool> GridCase::output_branch() const {
  for (std::size_t i = 0; i < branches.size(); ++i) {
    const Branch& br = branches[i];
    if (br.from_bus == output.from_bus && br.to_bus == output.to_bus) return {i, false};
    if (br.from_bus == output.to_bus && br.to_bus == output.from_bus) return {i, true};
  }
  throw ValidationError("output branch " + std::to_string(output.from_bus) + "-" +
                        std::to_string(output.to_bus) + " does not exist");
}

bool GridCase::operator==(const GridCase& other) const {
  return buses == other.buses && branches == other.branches && base_mva == other.base_mva &&
         uncertainty == other.uncertainty && output == other.output;
}

GridCase parse_case(const json& doc) {
  GridCase grid;
  try {
    if (!doc.is_object()) throw ParseError("case document must be a JSON object");
    grid.base_mva = doc.value("base_mva", 100.0);
    for (const auto& jb : doc.at("buses")) grid.buses.push_back(parse_bus(jb));
    for (const auto& jb : doc.at("branches")) grid.branches.push_back(parse_branch(jb));
    if (doc.contains("uncertainty"))
      for (const auto& ju : doc.at("uncertainty"))
        grid.uncertainty.entries.push_back(parse_uncertain(ju, grid.buses));
    const json& out = doc.at("output");
    grid.output.from_bus = out.at("from_bus").get<int>();
    grid.output.to_bus = out.at("to_bus").get<int>();
    grid.output.units = parse_units(out.value("units", std::string("pu")));
  } catch (const json::exception& e) {
    throw ParseError(e.what());
  }
  grid.validate();
  return grid;
}

GridCase load_case(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open case file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return parse_case(doc);
}

json serialize(const GridCase& grid) {
  json doc;
  doc["base_mva"] = grid.base_mva;
  json buses = json::array();
  for (const Bus& b : grid.buses) {
    json jb = {{"id", b.id},
               {"kind", kind_name(b.kind)},
               {"v_mag", b.v_mag_init},
               {"v_ang", b.v_ang_init / deg_to_rad},
               {"p_load", b.p_load},
               {"q_load", b.q_load},
               {"p_gen", b.p_gen},
               {"q_gen", b.q_gen}};
    if (b.v_setpoint) jb["v_setpoint"] = *b.v_setpoint;
    buses.push_back(std::move(jb));
  }
  doc["buses"] = std::move(buses);

  json branches = json::array();
  for (const Branch& br : grid.branches)
    branches.push_back({{"from_bus", br.from_bus},
                        {"to_bus", br.to_bus},
                        {"r", br.r},
                        {"x", br.x},
                        {"b_shunt", br.b_shunt},
                        {"tap", br.tap}});
  doc["branches"] = std::move(branches);

  json unc = json::array();
  for (const UncertainLoad& u : grid.uncertainty.entries)
    unc.push_back({{"bus", u.bus_id},
                   {"quantity", u.quantity == LoadQuantity::ActiveLoad ? "p" : "q"},
                   {"distribution", family_name(u.family)},
                   {"mapping", u.mapping == MappingKind::Additive ? "additive" : "relative"},
                   {"base", u.base},
                   {"scale", u.scale}});
  doc["uncertainty"] = std::move(unc);

  doc["output"] = {{"from_bus", grid.output.from_bus},
                   {"to_bus", grid.output.to_bus},
                   {"units", grid.output.units == OutputUnits::Megawatt ? "mw" : "pu"}};
  return doc;
}

std::uint64_t case_hash(const GridCase& grid) {
  const std::string text = serialize(grid).dump();
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

GridCase apply_parameters(const GridCase& grid, std::span<const double> xi) {
  if (xi.size() != grid.dimension())
    throw DimensionMismatch("expected " + std::to_string(grid.dimension()) + " parameters, got " +
                            std::to_string(xi.size()));
  GridCase out = grid;
  for (std::size_t k = 0; k < xi.size(); ++k) {
    const UncertainLoad& u = grid.uncertainty.entries[k];
    load_slot(out.buses[grid.bus_index(u.bus_id)], u.quantity) = u.value(xi[k]);
  }
  return out;
}

std::string_view kind_name(BusKind kind) {
  switch (kind) {
  case BusKind::Slack: return "slack";
  case BusKind::PV: return "pv";
  case BusKind::PQ: return "pq";
  }
  return "pq";
}

} // namespace stochflow::grid
