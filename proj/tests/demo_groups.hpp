#pragma once
#include "orbitherm/schottky.hpp"

// Shared desk-scale groups. Axis endpoints are kept well separated so the
// isometric-circle disks pass ping-pong with room to spare.
namespace demo {

using namespace orbitherm;

// Rank-2 standard group: axes (-3,-1) and (1,3), both of length 3.
inline SchottkyGroup standard() {
  return make_schottky({axis_generator(-3.0, -1.0, 3.0), axis_generator(1.0, 3.0, 3.0)});
}

// A second, distinct rank-2 group: axes (-4,-1) and (1,4), length 3.2.
inline SchottkyGroup wide() {
  return make_schottky(
      {axis_generator(-4.0, -1.0, 3.2), axis_generator(1.0, 4.0, 3.2)});
}

// Extended group: deep-cusp parabolic z -> z/(sz+1) plus one hyperbolic
// generator; letter 1 is the parabolic, letter 2 the hyperbolic.
inline SchottkyGroup extended(double s = 1e40) {
  return make_extended_schottky(s, {axis_generator(2.5, 6.5, 2.0)});
}

// Rank-4 ambient group for the nested families and the divergence schedule.
// The pair (g1, g2) has short axes packed close together (fat subgroup, slow
// entropy decay under g2 -> g2^(2^n)); the pair (g3, g4) is longer and farther
// apart, so its nested entropies start lower and interleave with the first
// family's.
inline SchottkyGroup ambient4() {
  return make_schottky({axis_generator(-21.0, -17.0, 3.0),
                        axis_generator(-12.0, -10.0, 1.2),
                        axis_generator(-5.0, -1.0, 3.4),
                        axis_generator(3.0, 7.0, 2.6)});
}

}  // namespace demo
