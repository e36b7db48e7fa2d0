#pragma once

#include "vsa/grid_model.hpp"

namespace vsa::data {

/// Moves `delta_p_mw` of active power onto the non-slack units in proportion to their p_max,
/// clamping at [0, p_max] and spreading the clamped remainder over the units that still have room
/// (water-filling). Whatever the non-slack units cannot absorb is left to the slack bus.
/// Throws InfeasibleError when delta exceeds the aggregate headroom (or floor room) of all
/// in-service units including the slack.
grid::NetworkCase reschedule_generation(const grid::NetworkCase& c, double delta_p_mw);

}  // namespace vsa::data
