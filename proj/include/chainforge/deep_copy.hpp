#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "chainforge/memory.hpp"
#include "chainforge/scenario.hpp"

namespace chainforge::deepcopy {

// Sum of every allocation the builder will make for `spec`, by traversal.
std::uint64_t determine_total_bytes(const scenario::ScenarioSpec& spec);

struct MarshalledTree {
  sim::Arena arena;
  scenario::TreeHandle tree;
};

// Builds the tree inside one host buffer sized by determine_total_bytes.
MarshalledTree marshal_tree(const scenario::ScenarioSpec& spec, sim::Simulation& sim, std::uint64_t seed = 0);

// One bulk H2D copy of the arena, then one attach per reference field.
// Returns the device image base. Throws AttachOutsideArena.
sim::SimAddress marshal_transfer_and_attach(sim::Arena& arena, const scenario::TreeHandle& tree, sim::Simulation& sim);

// One bulk D2H copy of the image, then detaches in reverse attach order.
void demarshal(const sim::Arena& arena, const scenario::TreeHandle& tree, sim::Simulation& sim);

// Host block start -> device copy, for the per-object scheme.
struct NaiveImage {
  struct Copy {
    sim::SimAddress device;
    std::uint64_t bytes = 0;
  };

  sim::SimAddress device_root;
  std::map<std::uint64_t, Copy> copies;  // keyed by host block address
  std::size_t fixups = 0;

  // Throws WildAccess for addresses outside every copied block.
  sim::SimAddress to_device(sim::SimAddress host_addr) const;
  sim::SimAddress to_host(sim::SimAddress device_addr) const;
};

// One per_object H2D entry per node and per array, then one attach per
// reference field, patched on the device copy.
NaiveImage naive_deep_copy(const scenario::TreeHandle& tree, sim::Simulation& sim);

// Per-object D2H of every node and array, then host-side detach fixups.
void naive_copy_back(const NaiveImage& image, const scenario::TreeHandle& tree, sim::Simulation& sim);

}  // namespace chainforge::deepcopy
