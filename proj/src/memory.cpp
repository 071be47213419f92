#include "chainforge/memory.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <ostream>
#include <sstream>

namespace chainforge::sim {

std::string_view space_name(SpaceKind kind) noexcept { return kind == SpaceKind::host ? "host" : "device"; }

std::string_view direction_name(Direction d) noexcept { return d == Direction::h2d ? "H2D" : "D2H"; }

std::string_view op_kind_name(OpKind k) noexcept {
  switch (k) {
    case OpKind::bulk: return "bulk";
    case OpKind::per_object: return "per_object";
    case OpKind::page_migration: return "page_migration";
    case OpKind::attach: return "attach";
    case OpKind::detach: return "detach";
  }
  return "bulk";
}

namespace {

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << "0x" << std::hex << v;
  return os.str();
}

}  // namespace

MemorySpace::MemorySpace(SpaceKind kind, SimAddress base, std::uint64_t capacity)
    : kind_(kind), base_(base), capacity_(capacity) {
  if (base.is_null()) throw InvalidArgument("a memory space cannot start at the null address");
  if (base.value % kAllocationAlignment != 0) throw InvalidArgument("memory space base must be 8-byte aligned");
}

SimAddress MemorySpace::allocate(std::uint64_t size_bytes) {
  if (size_bytes == 0) throw InvalidArgument("allocation size must be positive");
  const std::uint64_t start = (bump_offset_ + kAllocationAlignment - 1) / kAllocationAlignment * kAllocationAlignment;
  if (start > capacity_ || size_bytes > capacity_ - start) {
    throw OutOfSimMemory(std::string(space_name(kind_)) + " space exhausted: " + std::to_string(size_bytes) +
                         " bytes requested, " + std::to_string(capacity_ - std::min(start, capacity_)) + " left");
  }
  bump_offset_ = start + size_bytes;
  bytes_requested_ += size_bytes;
  storage_.resize(bump_offset_, std::byte{0});
  allocations_.emplace(start, size_bytes);
  return base_ + start;
}

bool MemorySpace::in_range(SimAddress addr) const noexcept {
  return addr.value >= base_.value && addr.value - base_.value < capacity_;
}

bool MemorySpace::contains(SimAddress addr, std::uint64_t len) const noexcept {
  if (!in_range(addr)) return false;
  const std::uint64_t off = offset_of(addr);
  auto it = allocations_.upper_bound(off);
  if (it == allocations_.begin()) return false;
  --it;
  const std::uint64_t end = it->first + it->second;
  return off < end && len <= end - off;
}

std::vector<MemorySpace::Allocation> MemorySpace::allocations() const {
  std::vector<Allocation> out;
  out.reserve(allocations_.size());
  for (const auto& [off, size] : allocations_) out.push_back({base_ + off, size});
  return out;
}

void MemorySpace::check(SimAddress addr, std::uint64_t len) const {
  if (!contains(addr, len == 0 ? 1 : len)) {
    throw WildAccess(std::string(space_name(kind_)) + " access to " + hex(addr.value) + " (" + std::to_string(len) +
                     " bytes) is outside every " + std::string(space_name(kind_)) + " allocation");
  }
}

void MemorySpace::read_bytes(SimAddress addr, std::span<std::byte> out) const {
  check(addr, out.size());
  std::memcpy(out.data(), storage_.data() + offset_of(addr), out.size());
}

void MemorySpace::write_bytes(SimAddress addr, std::span<const std::byte> in) {
  check(addr, in.size());
  std::memcpy(storage_.data() + offset_of(addr), in.data(), in.size());
}

std::uint64_t MemorySpace::read_word(SimAddress addr) const {
  check(addr, 8);
  const std::byte* p = storage_.data() + offset_of(addr);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | std::to_integer<std::uint64_t>(p[i]);
  return v;
}

void MemorySpace::write_word(SimAddress addr, std::uint64_t value) {
  check(addr, 8);
  std::byte* p = storage_.data() + offset_of(addr);
  for (int i = 0; i < 8; ++i) p[i] = static_cast<std::byte>((value >> (8 * i)) & 0xFF);
}

std::uint32_t MemorySpace::read_u32(SimAddress addr) const {
  check(addr, 4);
  const std::byte* p = storage_.data() + offset_of(addr);
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | std::to_integer<std::uint32_t>(p[i]);
  return v;
}

void MemorySpace::write_u32(SimAddress addr, std::uint32_t value) {
  check(addr, 4);
  std::byte* p = storage_.data() + offset_of(addr);
  for (int i = 0; i < 4; ++i) p[i] = static_cast<std::byte>((value >> (8 * i)) & 0xFF);
}

double MemorySpace::read_f64(SimAddress addr) const { return std::bit_cast<double>(read_word(addr)); }

void MemorySpace::write_f64(SimAddress addr, double value) { write_word(addr, std::bit_cast<std::uint64_t>(value)); }

void TransferLog::append(Direction direction, OpKind kind, std::uint64_t bytes) {
  if (bytes == 0) throw InvalidArgument("transfer log entries must move at least one byte");
  entries_.push_back({direction, kind, bytes, entries_.size()});
}

std::size_t TransferLog::count(OpKind kind) const noexcept {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.op_kind == kind;
  return n;
}

std::uint64_t TransferLog::bytes(Direction direction, OpKind kind) const noexcept {
  std::uint64_t n = 0;
  for (const auto& e : entries_) {
    if (e.direction == direction && e.op_kind == kind) n += e.bytes;
  }
  return n;
}

void TransferLog::write_dump(std::ostream& out) const {
  for (const auto& e : entries_) {
    out << direction_name(e.direction) << ',' << op_kind_name(e.op_kind) << ',' << e.bytes << ',' << e.order << '\n';
  }
}

UvmState::UvmState(std::uint64_t page_size) : page_size_(page_size) {
  if (page_size == 0) throw InvalidArgument("UVM page size must be positive");
}

UvmState::Page UvmState::page(std::uint64_t index) const {
  const auto it = pages_.find(index);
  return it == pages_.end() ? Page{} : it->second;
}

std::size_t UvmState::touch(SimAddress addr, std::uint64_t len, AccessKind access, Actor actor, TransferLog& log) {
  if (len == 0) return 0;
  std::size_t migrations = 0;
  const std::uint64_t last = page_index(addr + (len - 1));
  for (std::uint64_t p = page_index(addr); p <= last; ++p) {
    Page& page = pages_[p];
    if (page.resident != actor) {
      log.append(actor == Actor::device ? Direction::h2d : Direction::d2h, OpKind::page_migration, page_size_);
      page.resident = actor;
      page.dirty = false;
      ++migrations;
    }
    if (access == AccessKind::write) page.dirty = true;
  }
  return migrations;
}

std::vector<std::uint64_t> UvmState::dirty_pages(Actor resident) const {
  std::vector<std::uint64_t> out;
  for (const auto& [index, page] : pages_) {
    if (page.dirty && page.resident == resident) out.push_back(index);
  }
  return out;
}

Simulation::Simulation(const SimConfig& config)
    : host_(SpaceKind::host, SimAddress{config.host_base}, config.host_capacity),
      device_(SpaceKind::device, SimAddress{config.device_base}, config.device_capacity) {
  const bool disjoint = config.host_base + config.host_capacity <= config.device_base ||
                        config.device_base + config.device_capacity <= config.host_base;
  if (!disjoint) throw InvalidArgument("host and device address ranges overlap");
}

void Simulation::transfer_range(SpaceKind src, SimAddress src_addr, SpaceKind dst, SimAddress dst_addr,
                                std::uint64_t bytes, OpKind kind) {
  if (src == dst) throw InvalidArgument("transfers move data between the host and the device");
  std::vector<std::byte> staging(bytes);
  space(src).read_bytes(src_addr, staging);
  space(dst).write_bytes(dst_addr, staging);
  log_.append(src == SpaceKind::host ? Direction::h2d : Direction::d2h, kind, bytes);
}

void Simulation::enable_uvm(std::uint64_t page_size) { uvm_.emplace(page_size); }

UvmState& Simulation::uvm() {
  if (!uvm_) throw InvalidArgument("UVM mode is not enabled");
  return *uvm_;
}

const UvmState& Simulation::uvm() const {
  if (!uvm_) throw InvalidArgument("UVM mode is not enabled");
  return *uvm_;
}

std::size_t Simulation::uvm_touch(SimAddress addr, std::uint64_t len, AccessKind access, Actor actor) {
  UvmState& state = uvm();
  if (!host_.contains(addr, len == 0 ? 1 : len)) {
    throw WildAccess("unified access to " + hex(addr.value) + " is outside every managed allocation");
  }
  return state.touch(addr, len, access, actor, log_);
}

std::uint64_t UnifiedMemoryView::read_word(SimAddress addr) {
  sim_.uvm_touch(addr, 8, AccessKind::read, actor_);
  return sim_.host().read_word(addr);
}

std::uint32_t UnifiedMemoryView::read_u32(SimAddress addr) {
  sim_.uvm_touch(addr, 4, AccessKind::read, actor_);
  return sim_.host().read_u32(addr);
}

double UnifiedMemoryView::read_f64(SimAddress addr) {
  sim_.uvm_touch(addr, 8, AccessKind::read, actor_);
  return sim_.host().read_f64(addr);
}

void UnifiedMemoryView::write_f64(SimAddress addr, double value) {
  sim_.uvm_touch(addr, 8, AccessKind::write, actor_);
  sim_.host().write_f64(addr, value);
}

Arena::Arena(SimAddress buffer_host_addr, std::uint64_t total_bytes) : buffer_(buffer_host_addr), total_(total_bytes) {}

bool Arena::contains(SimAddress host_addr) const noexcept {
  return host_addr.value >= buffer_.value && host_addr.value - buffer_.value < total_;
}

SimAddress Arena::serve(std::uint64_t size_bytes) {
  if (size_bytes == 0) throw InvalidArgument("arena requests must be positive");
  if (size_bytes > total_ - served_) {
    throw OutOfSimMemory("arena of " + std::to_string(total_) + " bytes cannot serve " + std::to_string(size_bytes) +
                         " more bytes after " + std::to_string(served_));
  }
  const SimAddress addr = buffer_ + served_;
  requests_.push_back({addr, size_bytes, requests_.size()});
  served_ += size_bytes;
  return addr;
}

SimAddress HostAllocator::allocate(std::uint64_t size_bytes) {
  const SimAddress addr = arena_ != nullptr ? arena_->serve(size_bytes) : space_.allocate(size_bytes);
  served_ += size_bytes;
  return addr;
}

}  // namespace chainforge::sim
