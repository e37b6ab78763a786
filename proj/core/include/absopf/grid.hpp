#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace absopf::grid {

// All electrical quantities are per-unit on the case's base_mva. Element
// references (Load::bus, Branch::from, ...) are indices into GridCase::buses,
// not the external bus ids used in case files.

struct Bus {
  int id = 0;
  double vm_min = 0.9;
  double vm_max = 1.1;
};

struct Load {
  std::size_t bus = 0;
  double pd = 0.0;
  double qd = 0.0;
};

/// Cost is c2*pg^2 + c1*pg + c0.
struct Generator {
  std::size_t bus = 0;
  double pg_min = 0.0;
  double pg_max = 0.0;
  double qg_min = 0.0;
  double qg_max = 0.0;
  double c0 = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;

  double cost(double pg) const noexcept { return (c2 * pg + c1) * pg + c0; }
};

struct Branch {
  std::size_t from = 0;
  std::size_t to = 0;
  double g = 0.0;
  double b = 0.0;
  double s_max = 0.0;
};

struct GridCase {
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::size_t reference_bus = 0;
  std::vector<Load> loads;
  std::vector<Generator> generators;
  std::vector<Branch> branches;

  std::size_t input_dim() const noexcept { return 2 * loads.size(); }
  std::size_t output_dim() const noexcept {
    return 2 * generators.size() + buses.size() + branches.size();
  }
  /// Load vector (pd..., qd...) at nominal values.
  std::vector<double> nominal_input() const;
};

struct GridState {
  std::vector<double> vm;
  std::vector<double> va;
  std::vector<double> pg;
  std::vector<double> qg;
};

/// Offsets of the blocks of the prediction vector y = (pg, qg, vm, dva).
struct OutputLayout {
  std::size_t pg = 0, qg = 0, vm = 0, dva = 0, size = 0;
  explicit OutputLayout(const GridCase& c);
};

// ---- ingestion -----------------------------------------------------------

GridCase parse_case(const std::filesystem::path& path);
/// `source` is used in error messages only.
GridCase parse_case_json(std::string_view text, std::string_view source = "<memory>");
std::string to_json(const GridCase& c);
/// Throws ValidationError naming the first offending element.
void validate(const GridCase& c);

// ---- evaluation ----------------------------------------------------------

/// Flows at both ends of a branch: "from" is i->j, "to" is j->i.
struct BranchFlow {
  double pf_from = 0.0, qf_from = 0.0;
  double pf_to = 0.0, qf_to = 0.0;
};

std::vector<BranchFlow> branch_flows(const GridCase& c, const GridState& s);

struct BusResidual {
  double dp = 0.0;
  double dq = 0.0;
};

/// Generation minus demand minus outgoing flow, per bus.
std::vector<BusResidual> power_balance_residuals(const GridCase& c, const GridState& s,
                                                 std::span<const double> x);

double objective(const GridCase& c, const GridState& s);

/// Angles recovered from per-branch differences along a BFS spanning tree
/// rooted at the reference bus (neighbours visited in ascending bus index).
/// Non-tree differences are ignored. Throws Error if the network is
/// disconnected.
std::vector<double> reconstruct_angles(const GridCase& c, std::span<const double> dva);

std::vector<double> pack_output(const GridCase& c, const GridState& s);
GridState unpack_output(const GridCase& c, std::span<const double> y);

struct FamilyViolation {
  std::size_t count = 0;
  double sum = 0.0;
  double max = 0.0;

  double mean() const noexcept { return count ? sum / static_cast<double>(count) : 0.0; }
  void add(double v) noexcept;
};

/// Absolute violations, one item per bound element, per bus (balance is
/// |dp| + |dq|), and per branch end (thermal).
struct ViolationReport {
  FamilyViolation voltage;     // vm bounds
  FamilyViolation active_gen;  // pg bounds
  FamilyViolation reactive_gen;
  FamilyViolation thermal;
  FamilyViolation balance;

  double mean() const noexcept;
  double max() const noexcept;
};

ViolationReport constraint_violation(const GridCase& c, std::span<const double> x,
                                     std::span<const double> y);
/// Same report for an explicit state (no angle reconstruction).
ViolationReport state_violation(const GridCase& c, std::span<const double> x, const GridState& s);

// ---- built-in fixtures ---------------------------------------------------

/// Slack generator on bus 1 feeding one load on bus 2 over a single line.
GridCase two_bus_fixture();
/// Triangle network with two generators and loads on buses 2 and 3.
GridCase three_bus_fixture();

}  // namespace absopf::grid
