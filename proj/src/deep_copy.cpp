#include "chainforge/deep_copy.hpp"

#include <numeric>
#include <sstream>

namespace chainforge::deepcopy {

using sim::Direction;
using sim::OpKind;
using sim::SimAddress;
using sim::SpaceKind;

namespace {

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << "0x" << std::hex << v;
  return os.str();
}

}  // namespace

std::uint64_t determine_total_bytes(const scenario::ScenarioSpec& spec) {
  const auto plan = scenario::allocation_plan(spec);
  return std::accumulate(plan.begin(), plan.end(), std::uint64_t{0});
}

MarshalledTree marshal_tree(const scenario::ScenarioSpec& spec, sim::Simulation& sim, std::uint64_t seed) {
  const std::uint64_t total = determine_total_bytes(spec);
  if (total == 0) throw InvalidArgument("empty structure tree");
  sim::Arena arena(sim.host().allocate(total), total);
  sim::HostAllocator alloc(sim.host(), arena);
  auto tree = scenario::build_tree(spec, alloc, seed);
  return {std::move(arena), std::move(tree)};
}

SimAddress marshal_transfer_and_attach(sim::Arena& arena, const scenario::TreeHandle& tree, sim::Simulation& sim) {
  if (!arena.fully_served()) throw InvalidArgument("arena is not fully served");
  const SimAddress image = sim.device().allocate(arena.total_bytes());
  sim.transfer_range(SpaceKind::host, arena.buffer_host_addr(), SpaceKind::device, image, arena.total_bytes(),
                     OpKind::bulk);
  arena.set_device_image_addr(image);
  for (const auto& site : tree.reference_field_sites) {
    if (!arena.contains(site.holder)) {
      throw AttachOutsideArena("reference holder " + hex(site.holder.value) + " is not inside the arena");
    }
    const SimAddress field = image + (site.field() - arena.buffer_host_addr());
    const SimAddress h{sim.device().read_word(field)};
    if (!arena.contains(h)) {
      throw AttachOutsideArena("reference field targets " + hex(h.value) + ", outside the arena");
    }
    sim.device().write_word(field, (image + (h - arena.buffer_host_addr())).value);
    sim.log().append(Direction::h2d, OpKind::attach, sim::kPointerBytes);
  }
  return image;
}

void demarshal(const sim::Arena& arena, const scenario::TreeHandle& tree, sim::Simulation& sim) {
  const SimAddress image = arena.device_image_addr();
  if (image.is_null()) throw InvalidArgument("arena has no device image");
  sim.transfer_range(SpaceKind::device, image, SpaceKind::host, arena.buffer_host_addr(), arena.total_bytes(),
                     OpKind::bulk);
  const auto& sites = tree.reference_field_sites;
  for (auto it = sites.rbegin(); it != sites.rend(); ++it) {
    const SimAddress d{sim.host().read_word(it->field())};
    if (d.value < image.value || d - image >= arena.total_bytes()) {
      throw AttachOutsideArena("device field holds " + hex(d.value) + ", outside the device image");
    }
    sim.host().write_word(it->field(), (arena.buffer_host_addr() + (d - image)).value);
    sim.log().append(Direction::d2h, OpKind::detach, sim::kPointerBytes);
  }
}

SimAddress NaiveImage::to_device(SimAddress host_addr) const {
  auto it = copies.upper_bound(host_addr.value);
  if (it != copies.begin()) {
    --it;
    const std::uint64_t off = host_addr.value - it->first;
    if (off < it->second.bytes) return it->second.device + off;
  }
  throw WildAccess("host address " + hex(host_addr.value) + " belongs to no copied object");
}

SimAddress NaiveImage::to_host(SimAddress device_addr) const {
  for (const auto& [host, copy] : copies) {
    if (device_addr.value >= copy.device.value && device_addr - copy.device < copy.bytes) {
      return SimAddress{host} + (device_addr - copy.device);
    }
  }
  throw WildAccess("device address " + hex(device_addr.value) + " belongs to no copied object");
}

NaiveImage naive_deep_copy(const scenario::TreeHandle& tree, sim::Simulation& sim) {
  NaiveImage image;
  for (const auto& block : tree.blocks) {
    const SimAddress dev = sim.device().allocate(block.bytes);
    image.copies.emplace(block.addr.value, NaiveImage::Copy{dev, block.bytes});
    for (std::uint32_t i = 0; i < block.objects; ++i) {
      const std::uint64_t off = i * block.object_bytes;
      sim.transfer_range(SpaceKind::host, block.addr + off, SpaceKind::device, dev + off, block.object_bytes,
                         OpKind::per_object);
    }
  }
  for (const auto& site : tree.reference_field_sites) {
    const SimAddress field = image.to_device(site.field());
    sim.device().write_word(field, image.to_device(SimAddress{sim.device().read_word(field)}).value);
    sim.log().append(Direction::h2d, OpKind::attach, sim::kPointerBytes);
    ++image.fixups;
  }
  image.device_root = image.to_device(tree.root);
  return image;
}

void naive_copy_back(const NaiveImage& image, const scenario::TreeHandle& tree, sim::Simulation& sim) {
  for (const auto& block : tree.blocks) {
    const SimAddress dev = image.copies.at(block.addr.value).device;
    for (std::uint32_t i = 0; i < block.objects; ++i) {
      const std::uint64_t off = i * block.object_bytes;
      sim.transfer_range(SpaceKind::device, dev + off, SpaceKind::host, block.addr + off, block.object_bytes,
                         OpKind::per_object);
    }
  }
  const auto& sites = tree.reference_field_sites;
  for (auto it = sites.rbegin(); it != sites.rend(); ++it) {
    const SimAddress d{sim.host().read_word(it->field())};
    sim.host().write_word(it->field(), image.to_host(d).value);
    sim.log().append(Direction::d2h, OpKind::detach, sim::kPointerBytes);
  }
}

}  // namespace chainforge::deepcopy
