#pragma once

#include <filesystem>
#include <set>
#include <string>

#include "mixdiag/events.hpp"
#include "mixdiag/plant.hpp"

namespace helpers {

using namespace mixdiag;

/// Fresh empty directory under the system temp dir.
inline std::string scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("mixdiag_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

inline events::EventTrace trace_of(const plant::PlantConfig& config, int cycles,
                                   const std::vector<plant::FaultSpec>& faults = {}, std::uint64_t seed = 42) {
  return events::to_trace(plant::simulate(config, cycles, faults, seed), config);
}

/// Dwell spent in the vector that phase `name` switches on, for every visit.
inline std::vector<double> phase_dwells(const plant::PlantConfig& config, const events::EventTrace& trace,
                                        const std::string& name) {
  events::ActuatorVector target = events::all_off(config.actuator_ids());
  for (const auto& p : config.phases) {
    if (p.name == name) {
      for (const auto& [id, on] : p.actuator_vector) target.signals[id] = on;
    }
  }
  std::vector<double> out;
  events::ActuatorVector current = trace.initial_vector;
  for (const auto& s : trace.steps) {
    if (current == target) out.push_back(s.dwell_s);
    current = s.resulting_vector;
  }
  return out;
}

inline std::size_t distinct_vectors(const events::EventTrace& trace) {
  std::set<events::ActuatorVector> seen{trace.initial_vector};
  for (const auto& s : trace.steps) seen.insert(s.resulting_vector);
  return seen.size();
}

}  // namespace helpers
