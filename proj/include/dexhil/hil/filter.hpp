#pragma once

#include <vector>

#include "dexhil/hil/dataset.hpp"

namespace dexhil::hil {

/// Failed episodes yield nothing; episodes without interventions pass whole;
/// otherwise records from the start of the last intervention window on.
std::vector<TrajectoryRecord> filter_terminal_segment(const Episode& e);

/// Same rule returning a trimmed episode.
Episode filter_episode(const Episode& e);

}  // namespace dexhil::hil
