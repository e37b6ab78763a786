#include "absopf/grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <queue>
#include <sstream>

#include <nlohmann/json.hpp>

#include "absopf/errors.hpp"

namespace absopf::grid {

using nlohmann::json;

std::vector<double> GridCase::nominal_input() const {
  std::vector<double> x(input_dim());
  for (std::size_t l = 0; l < loads.size(); ++l) {
    x[l] = loads[l].pd;
    x[loads.size() + l] = loads[l].qd;
  }
  return x;
}

OutputLayout::OutputLayout(const GridCase& c) {
  pg = 0;
  qg = c.generators.size();
  vm = 2 * c.generators.size();
  dva = vm + c.buses.size();
  size = dva + c.branches.size();
}

// ---- ingestion -----------------------------------------------------------

namespace {

int line_of(std::string_view text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(byte), '\n'));
}

const json& member(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) throw ParseError(path, 0, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(path + "." + key, 0, "missing required field");
  return *it;
}

double number(const json& obj, const char* key, const std::string& path) {
  const json& v = member(obj, key, path);
  if (!v.is_number()) throw ParseError(path + "." + key, 0, "expected a number");
  return v.get<double>();
}

int integer(const json& obj, const char* key, const std::string& path) {
  const json& v = member(obj, key, path);
  if (!v.is_number_integer()) throw ParseError(path + "." + key, 0, "expected an integer bus id");
  return v.get<int>();
}

const json& array(const json& obj, const char* key) {
  const json& v = member(obj, key, "");
  if (!v.is_array()) throw ParseError(key, 0, "expected an array");
  return v;
}

std::string at(const char* family, std::size_t i) {
  return std::string(family) + "[" + std::to_string(i) + "]";
}

}  // namespace

GridCase parse_case_json(std::string_view text, std::string_view source) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string(source), line_of(text, e.byte), e.what());
  }
  if (!doc.is_object()) throw ParseError(std::string(source), 1, "case must be a JSON object");

  GridCase c;
  c.base_mva = number(doc, "base_mva", "");

  std::map<int, std::size_t> index_of;
  const json& buses = array(doc, "buses");
  for (std::size_t i = 0; i < buses.size(); ++i) {
    const std::string p = at("buses", i);
    Bus b{integer(buses[i], "id", p), number(buses[i], "vm_min", p), number(buses[i], "vm_max", p)};
    if (!index_of.emplace(b.id, i).second)
      throw ValidationError(p, "duplicate bus id " + std::to_string(b.id));
    c.buses.push_back(b);
  }

  auto resolve = [&](int id, const std::string& element) {
    auto it = index_of.find(id);
    if (it == index_of.end())
      throw ValidationError(element, "references unknown bus id " + std::to_string(id));
    return it->second;
  };

  c.reference_bus = resolve(integer(doc, "reference_bus", ""), "reference_bus");

  const json& loads = array(doc, "loads");
  for (std::size_t i = 0; i < loads.size(); ++i) {
    const std::string p = at("loads", i);
    c.loads.push_back({resolve(integer(loads[i], "bus", p), p), number(loads[i], "pd", p),
                       number(loads[i], "qd", p)});
  }

  const json& gens = array(doc, "generators");
  for (std::size_t i = 0; i < gens.size(); ++i) {
    const std::string p = at("generators", i);
    const json& g = gens[i];
    c.generators.push_back({resolve(integer(g, "bus", p), p), number(g, "pg_min", p),
                            number(g, "pg_max", p), number(g, "qg_min", p), number(g, "qg_max", p),
                            number(g, "c0", p), number(g, "c1", p), number(g, "c2", p)});
  }

  const json& branches = array(doc, "branches");
  for (std::size_t i = 0; i < branches.size(); ++i) {
    const std::string p = at("branches", i);
    const json& br = branches[i];
    c.branches.push_back({resolve(integer(br, "from", p), p), resolve(integer(br, "to", p), p),
                          number(br, "g", p), number(br, "b", p), number(br, "s_max", p)});
  }

  validate(c);
  return c;
}

GridCase parse_case(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open case file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_case_json(buf.str(), path.string());
}

std::string to_json(const GridCase& c) {
  json doc;
  doc["base_mva"] = c.base_mva;
  doc["reference_bus"] = c.buses.at(c.reference_bus).id;
  doc["buses"] = json::array();
  for (const auto& b : c.buses)
    doc["buses"].push_back({{"id", b.id}, {"vm_min", b.vm_min}, {"vm_max", b.vm_max}});
  doc["loads"] = json::array();
  for (const auto& l : c.loads)
    doc["loads"].push_back({{"bus", c.buses[l.bus].id}, {"pd", l.pd}, {"qd", l.qd}});
  doc["generators"] = json::array();
  for (const auto& g : c.generators)
    doc["generators"].push_back({{"bus", c.buses[g.bus].id},
                                 {"pg_min", g.pg_min},
                                 {"pg_max", g.pg_max},
                                 {"qg_min", g.qg_min},
                                 {"qg_max", g.qg_max},
                                 {"c0", g.c0},
                                 {"c1", g.c1},
                                 {"c2", g.c2}});
  doc["branches"] = json::array();
  for (const auto& br : c.branches)
    doc["branches"].push_back({{"from", c.buses[br.from].id},
                               {"to", c.buses[br.to].id},
                               {"g", br.g},
                               {"b", br.b},
                               {"s_max", br.s_max}});
  return doc.dump(2) + "\n";
}

void validate(const GridCase& c) {
  const std::size_t n = c.buses.size();
  if (!(c.base_mva > 0.0)) throw ValidationError("base_mva", "must be positive");
  if (n == 0) throw ValidationError("buses", "case has no buses");
  if (c.reference_bus >= n) throw ValidationError("reference_bus", "index out of range");
  for (std::size_t i = 0; i < n; ++i)
    if (!(c.buses[i].vm_min <= c.buses[i].vm_max))
      throw ValidationError(at("buses", i), "vm_min > vm_max");
  for (std::size_t i = 0; i < c.loads.size(); ++i)
    if (c.loads[i].bus >= n) throw ValidationError(at("loads", i), "bus index out of range");
  for (std::size_t i = 0; i < c.generators.size(); ++i) {
    const auto& g = c.generators[i];
    if (g.bus >= n) throw ValidationError(at("generators", i), "bus index out of range");
    if (!(g.pg_min <= g.pg_max)) throw ValidationError(at("generators", i), "pg_min > pg_max");
    if (!(g.qg_min <= g.qg_max)) throw ValidationError(at("generators", i), "qg_min > qg_max");
  }
  for (std::size_t i = 0; i < c.branches.size(); ++i) {
    const auto& br = c.branches[i];
    if (br.from >= n || br.to >= n)
      throw ValidationError(at("branches", i), "bus index out of range");
    if (br.from == br.to) throw ValidationError(at("branches", i), "branch is a self-loop");
    if (!(br.s_max > 0.0)) throw ValidationError(at("branches", i), "s_max must be positive");
  }
}

// ---- evaluation ----------------------------------------------------------

namespace {

void check_state(const GridCase& c, const GridState& s) {
  if (s.vm.size() != c.buses.size()) throw DimensionError("state.vm", c.buses.size(), s.vm.size());
  if (s.va.size() != c.buses.size()) throw DimensionError("state.va", c.buses.size(), s.va.size());
  if (s.pg.size() != c.generators.size())
    throw DimensionError("state.pg", c.generators.size(), s.pg.size());
  if (s.qg.size() != c.generators.size())
    throw DimensionError("state.qg", c.generators.size(), s.qg.size());
}

}  // namespace

std::vector<BranchFlow> branch_flows(const GridCase& c, const GridState& s) {
  check_state(c, s);
  std::vector<BranchFlow> out(c.branches.size());
  for (std::size_t e = 0; e < c.branches.size(); ++e) {
    const auto& br = c.branches[e];
    const double vi = s.vm[br.from], vj = s.vm[br.to];
    const double t = s.va[br.from] - s.va[br.to];
    const double sn = std::sin(t), cs = std::cos(t);
    const double vivj = vi * vj;
    out[e].pf_from = br.g * vi * vi - vivj * (br.b * sn + br.g * cs);
    out[e].qf_from = -br.b * vi * vi - vivj * (br.g * sn - br.b * cs);
    // sin(-t) = -sn, cos(-t) = cs
    out[e].pf_to = br.g * vj * vj - vivj * (-br.b * sn + br.g * cs);
    out[e].qf_to = -br.b * vj * vj - vivj * (-br.g * sn - br.b * cs);
  }
  return out;
}

std::vector<BusResidual> power_balance_residuals(const GridCase& c, const GridState& s,
                                                 std::span<const double> x) {
  if (x.size() != c.input_dim()) throw DimensionError("load vector", c.input_dim(), x.size());
  const auto flows = branch_flows(c, s);
  std::vector<BusResidual> r(c.buses.size());
  for (std::size_t g = 0; g < c.generators.size(); ++g) {
    r[c.generators[g].bus].dp += s.pg[g];
    r[c.generators[g].bus].dq += s.qg[g];
  }
  const std::size_t nl = c.loads.size();
  for (std::size_t l = 0; l < nl; ++l) {
    r[c.loads[l].bus].dp -= x[l];
    r[c.loads[l].bus].dq -= x[nl + l];
  }
  for (std::size_t e = 0; e < c.branches.size(); ++e) {
    const auto& br = c.branches[e];
    r[br.from].dp -= flows[e].pf_from;
    r[br.from].dq -= flows[e].qf_from;
    r[br.to].dp -= flows[e].pf_to;
    r[br.to].dq -= flows[e].qf_to;
  }
  return r;
}

double objective(const GridCase& c, const GridState& s) {
  if (s.pg.size() != c.generators.size())
    throw DimensionError("state.pg", c.generators.size(), s.pg.size());
  double total = 0.0;
  for (std::size_t g = 0; g < c.generators.size(); ++g) total += c.generators[g].cost(s.pg[g]);
  return total;
}

std::vector<double> reconstruct_angles(const GridCase& c, std::span<const double> dva) {
  const std::size_t n = c.buses.size();
  if (dva.size() != c.branches.size())
    throw DimensionError("phase differences", c.branches.size(), dva.size());

  // (neighbour, branch) sorted by neighbour then branch index.
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj(n);
  for (std::size_t e = 0; e < c.branches.size(); ++e) {
    adj[c.branches[e].from].emplace_back(c.branches[e].to, e);
    adj[c.branches[e].to].emplace_back(c.branches[e].from, e);
  }
  for (auto& a : adj) std::sort(a.begin(), a.end());

  std::vector<double> va(n, 0.0);
  std::vector<bool> seen(n, false);
  std::queue<std::size_t> frontier;
  frontier.push(c.reference_bus);
  seen[c.reference_bus] = true;
  std::size_t reached = 1;
  while (!frontier.empty()) {
    const std::size_t u = frontier.front();
    frontier.pop();
    for (const auto& [v, e] : adj[u]) {
      if (seen[v]) continue;
      seen[v] = true;
      ++reached;
      // dva_e = va[from] - va[to]
      va[v] = (c.branches[e].from == u) ? va[u] - dva[e] : va[u] + dva[e];
      frontier.push(v);
    }
  }
  if (reached != n) throw Error("network is disconnected; cannot recover bus angles");
  return va;
}

std::vector<double> pack_output(const GridCase& c, const GridState& s) {
  check_state(c, s);
  const OutputLayout lay(c);
  std::vector<double> y(lay.size);
  std::copy(s.pg.begin(), s.pg.end(), y.begin() + static_cast<long>(lay.pg));
  std::copy(s.qg.begin(), s.qg.end(), y.begin() + static_cast<long>(lay.qg));
  std::copy(s.vm.begin(), s.vm.end(), y.begin() + static_cast<long>(lay.vm));
  for (std::size_t e = 0; e < c.branches.size(); ++e)
    y[lay.dva + e] = s.va[c.branches[e].from] - s.va[c.branches[e].to];
  return y;
}

GridState unpack_output(const GridCase& c, std::span<const double> y) {
  const OutputLayout lay(c);
  if (y.size() != lay.size) throw DimensionError("prediction vector", lay.size, y.size());
  GridState s;
  s.pg.assign(y.begin() + static_cast<long>(lay.pg), y.begin() + static_cast<long>(lay.qg));
  s.qg.assign(y.begin() + static_cast<long>(lay.qg), y.begin() + static_cast<long>(lay.vm));
  s.vm.assign(y.begin() + static_cast<long>(lay.vm), y.begin() + static_cast<long>(lay.dva));
  s.va = reconstruct_angles(c, y.subspan(lay.dva));
  return s;
}

void FamilyViolation::add(double v) noexcept {
  ++count;
  sum += v;
  max = std::max(max, v);
}

double ViolationReport::mean() const noexcept {
  const std::size_t n =
      voltage.count + active_gen.count + reactive_gen.count + thermal.count + balance.count;
  const double s = voltage.sum + active_gen.sum + reactive_gen.sum + thermal.sum + balance.sum;
  return n ? s / static_cast<double>(n) : 0.0;
}

double ViolationReport::max() const noexcept {
  return std::max({voltage.max, active_gen.max, reactive_gen.max, thermal.max, balance.max});
}

namespace {

double box_violation(double v, double lo, double hi) {
  return std::max(0.0, v - hi) + std::max(0.0, lo - v);
}

}  // namespace

ViolationReport state_violation(const GridCase& c, std::span<const double> x, const GridState& s) {
  ViolationReport r;
  for (std::size_t i = 0; i < c.buses.size(); ++i)
    r.voltage.add(box_violation(s.vm[i], c.buses[i].vm_min, c.buses[i].vm_max));
  for (std::size_t g = 0; g < c.generators.size(); ++g) {
    r.active_gen.add(box_violation(s.pg[g], c.generators[g].pg_min, c.generators[g].pg_max));
    r.reactive_gen.add(box_violation(s.qg[g], c.generators[g].qg_min, c.generators[g].qg_max));
  }
  const auto flows = branch_flows(c, s);
  for (std::size_t e = 0; e < c.branches.size(); ++e) {
    const double smax = c.branches[e].s_max;
    r.thermal.add(std::max(0.0, std::hypot(flows[e].pf_from, flows[e].qf_from) - smax));
    r.thermal.add(std::max(0.0, std::hypot(flows[e].pf_to, flows[e].qf_to) - smax));
  }
  for (const auto& res : power_balance_residuals(c, s, x))
    r.balance.add(std::abs(res.dp) + std::abs(res.dq));
  return r;
}

ViolationReport constraint_violation(const GridCase& c, std::span<const double> x,
                                     std::span<const double> y) {
  if (x.size() != c.input_dim()) throw DimensionError("load vector", c.input_dim(), x.size());
  return state_violation(c, x, unpack_output(c, y));
}

}  // namespace absopf::grid
