#include "absopf/grid.hpp"

namespace absopf::grid {

GridCase two_bus_fixture() {
  GridCase c;
  c.base_mva = 100.0;
  c.buses = {{1, 0.9, 1.1}, {2, 0.9, 1.1}};
  c.reference_bus = 0;
  c.loads = {{1, 0.5, 0.1}};
  c.generators = {{0, 0.0, 2.0, -2.0, 2.0, 0.0, 10.0, 1.0}};
  c.branches = {{0, 1, 1.0, -10.0, 5.0}};
  return c;
}

GridCase three_bus_fixture() {
  GridCase c;
  c.base_mva = 100.0;
  c.buses = {{1, 0.95, 1.05}, {2, 0.95, 1.05}, {3, 0.95, 1.05}};
  c.reference_bus = 0;
  c.loads = {{1, 0.4, 0.1}, {2, 0.9, 0.3}};
  c.generators = {
      {0, 0.0, 2.0, -1.0, 1.0, 0.0, 10.0, 2.0},
      {1, 0.0, 1.5, -1.0, 1.0, 0.0, 12.0, 0.5},
  };
  c.branches = {
      {0, 1, 2.0, -20.0, 3.0},
      {0, 2, 1.5, -15.0, 3.0},
      {1, 2, 1.0, -10.0, 3.0},
  };
  return c;
}

}  // namespace absopf::grid
