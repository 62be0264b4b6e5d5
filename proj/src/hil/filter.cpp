#include "dexhil/hil/filter.hpp"

namespace dexhil::hil {

std::vector<TrajectoryRecord> filter_terminal_segment(const Episode& e) {
  if (!e.success()) return {};
  const auto windows = e.intervention_windows();
  if (windows.empty()) return e.records;
  const long start = windows.back().first;
  std::vector<TrajectoryRecord> out;
  for (const TrajectoryRecord& r : e.records)
    if (r.t >= start) out.push_back(r);
  return out;
}

Episode filter_episode(const Episode& e) {
  Episode out = e;
  out.records = filter_terminal_segment(e);
  return out;
}

}  // namespace dexhil::hil
