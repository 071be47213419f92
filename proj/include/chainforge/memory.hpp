#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "chainforge/errors.hpp"

namespace chainforge::sim {

// A 64-bit address inside one of the simulated spaces. 0 is null.
struct SimAddress {
  std::uint64_t value = 0;

  constexpr bool is_null() const noexcept { return value == 0; }
  constexpr auto operator<=>(const SimAddress&) const = default;
};

constexpr SimAddress operator+(SimAddress a, std::uint64_t offset) noexcept { return {a.value + offset}; }
constexpr std::uint64_t operator-(SimAddress a, SimAddress b) noexcept { return a.value - b.value; }

inline constexpr SimAddress kNull{0};
inline constexpr std::uint64_t kHostBase = 0x1000'0000ULL;
inline constexpr std::uint64_t kDeviceBase = 0xD'0000'0000ULL;
inline constexpr std::uint64_t kDefaultCapacity = 8ULL << 30;
inline constexpr std::uint64_t kAllocationAlignment = 8;
inline constexpr std::uint64_t kDefaultPageSize = 4096;
inline constexpr std::uint64_t kPointerBytes = 8;

enum class SpaceKind { host, device };

std::string_view space_name(SpaceKind kind) noexcept;

// One contiguous address range with a bump allocator. Storage grows lazily
// up to the bump offset, so a large capacity costs nothing until used.
class MemorySpace {
 public:
  struct Allocation {
    SimAddress addr;
    std::uint64_t size = 0;
  };

  MemorySpace(SpaceKind kind, SimAddress base, std::uint64_t capacity);

  SpaceKind kind() const noexcept { return kind_; }
  SimAddress base() const noexcept { return base_; }
  std::uint64_t capacity() const noexcept { return capacity_; }
  std::uint64_t bump_offset() const noexcept { return bump_offset_; }
  // Sum of requested allocation sizes, excluding alignment padding.
  std::uint64_t bytes_requested() const noexcept { return bytes_requested_; }

  // 8-byte aligned, zero-filled. Throws OutOfSimMemory.
  SimAddress allocate(std::uint64_t size_bytes);

  bool in_range(SimAddress addr) const noexcept;
  // True when [addr, addr+len) lies inside a single allocation.
  bool contains(SimAddress addr, std::uint64_t len) const noexcept;
  std::vector<Allocation> allocations() const;

  // Little-endian accessors. All throw WildAccess outside allocations.
  std::uint64_t read_word(SimAddress addr) const;
  void write_word(SimAddress addr, std::uint64_t value);
  std::uint32_t read_u32(SimAddress addr) const;
  void write_u32(SimAddress addr, std::uint32_t value);
  double read_f64(SimAddress addr) const;
  void write_f64(SimAddress addr, double value);
  void read_bytes(SimAddress addr, std::span<std::byte> out) const;
  void write_bytes(SimAddress addr, std::span<const std::byte> in);

  // Raw backing store from `base`, for snapshots and byte comparisons.
  std::span<const std::byte> image() const noexcept { return storage_; }

 private:
  void check(SimAddress addr, std::uint64_t len) const;
  std::uint64_t offset_of(SimAddress addr) const noexcept { return addr.value - base_.value; }

  SpaceKind kind_;
  SimAddress base_;
  std::uint64_t capacity_;
  std::uint64_t bump_offset_ = 0;
  std::uint64_t bytes_requested_ = 0;
  std::map<std::uint64_t, std::uint64_t> allocations_;  // offset -> size
  std::vector<std::byte> storage_;
};

enum class Direction { h2d, d2h };
enum class OpKind { bulk, per_object, page_migration, attach, detach };

std::string_view direction_name(Direction d) noexcept;
std::string_view op_kind_name(OpKind k) noexcept;

struct TransferEntry {
  Direction direction;
  OpKind op_kind;
  std::uint64_t bytes = 0;
  std::uint64_t order = 0;

  bool operator==(const TransferEntry&) const = default;
};

class TransferLog {
 public:
  // Throws InvalidArgument for zero-byte entries.
  void append(Direction direction, OpKind kind, std::uint64_t bytes);

  const std::vector<TransferEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t count(OpKind kind) const noexcept;
  std::uint64_t bytes(Direction direction, OpKind kind) const noexcept;

  // One `direction,op_kind,bytes,order` record per line.
  void write_dump(std::ostream& out) const;

 private:
  std::vector<TransferEntry> entries_;
};

enum class Actor { host, device };
enum class AccessKind { read, write };

// Page-granular residence tracking for the unified space. Pages that were
// never touched are host-resident and clean.
class UvmState {
 public:
  struct Page {
    Actor resident = Actor::host;
    bool dirty = false;
  };

  explicit UvmState(std::uint64_t page_size);

  std::uint64_t page_size() const noexcept { return page_size_; }
  std::uint64_t page_index(SimAddress addr) const noexcept { return addr.value / page_size_; }
  Page page(std::uint64_t index) const;

  // Touches every page overlapping [addr, addr+len); pages resident on the
  // other side migrate and are logged. Returns the number of migrations.
  std::size_t touch(SimAddress addr, std::uint64_t len, AccessKind access, Actor actor, TransferLog& log);

  std::vector<std::uint64_t> dirty_pages(Actor resident) const;
  std::size_t pages_tracked() const noexcept { return pages_.size(); }

 private:
  std::uint64_t page_size_;
  std::map<std::uint64_t, Page> pages_;
};

struct SimConfig {
  std::uint64_t host_base = kHostBase;
  std::uint64_t device_base = kDeviceBase;
  std::uint64_t host_capacity = kDefaultCapacity;
  std::uint64_t device_capacity = kDefaultCapacity;
};

// A host space, a device space and the log of everything moved between
// them. Single-threaded; independent instances share nothing.
class Simulation {
 public:
  explicit Simulation(const SimConfig& config = {});

  MemorySpace& host() noexcept { return host_; }
  const MemorySpace& host() const noexcept { return host_; }
  MemorySpace& device() noexcept { return device_; }
  const MemorySpace& device() const noexcept { return device_; }
  MemorySpace& space(SpaceKind kind) noexcept { return kind == SpaceKind::host ? host_ : device_; }
  TransferLog& log() noexcept { return log_; }
  const TransferLog& log() const noexcept { return log_; }

  // Copies bytes verbatim between the two spaces and logs one entry.
  void transfer_range(SpaceKind src, SimAddress src_addr, SpaceKind dst, SimAddress dst_addr, std::uint64_t bytes,
                      OpKind kind);

  // After this, host allocations form the unified space reachable from
  // both actors through uvm_touch.
  void enable_uvm(std::uint64_t page_size = kDefaultPageSize);
  bool uvm_enabled() const noexcept { return uvm_.has_value(); }
  UvmState& uvm();
  const UvmState& uvm() const;
  std::size_t uvm_touch(SimAddress addr, std::uint64_t len, AccessKind access, Actor actor);

 private:
  MemorySpace host_;
  MemorySpace device_;
  TransferLog log_;
  std::optional<UvmState> uvm_;
};

// Access to the structure tree as the device sees it: plain device memory,
// or unified memory where every access goes through the page model.
class DeviceView {
 public:
  virtual ~DeviceView() = default;
  virtual std::uint64_t read_word(SimAddress addr) = 0;
  virtual std::uint32_t read_u32(SimAddress addr) = 0;
  virtual double read_f64(SimAddress addr) = 0;
  virtual void write_f64(SimAddress addr, double value) = 0;
};

class DeviceMemoryView final : public DeviceView {
 public:
  explicit DeviceMemoryView(Simulation& sim) : sim_(sim) {}
  std::uint64_t read_word(SimAddress addr) override { return sim_.device().read_word(addr); }
  std::uint32_t read_u32(SimAddress addr) override { return sim_.device().read_u32(addr); }
  double read_f64(SimAddress addr) override { return sim_.device().read_f64(addr); }
  void write_f64(SimAddress addr, double value) override { sim_.device().write_f64(addr, value); }

 private:
  Simulation& sim_;
};

class UnifiedMemoryView final : public DeviceView {
 public:
  UnifiedMemoryView(Simulation& sim, Actor actor) : sim_(sim), actor_(actor) {}
  std::uint64_t read_word(SimAddress addr) override;
  std::uint32_t read_u32(SimAddress addr) override;
  double read_f64(SimAddress addr) override;
  void write_f64(SimAddress addr, double value) override;

 private:
  Simulation& sim_;
  Actor actor_;
};

// Serves allocations contiguously from one pre-sized host buffer, in
// request order and without padding.
class Arena {
 public:
  struct Request {
    SimAddress host_addr;
    std::uint64_t size_bytes = 0;
    std::uint64_t order = 0;
  };

  Arena(SimAddress buffer_host_addr, std::uint64_t total_bytes);

  SimAddress buffer_host_addr() const noexcept { return buffer_; }
  std::uint64_t total_bytes() const noexcept { return total_; }
  std::uint64_t served_offset() const noexcept { return served_; }
  bool fully_served() const noexcept { return served_ == total_; }
  const std::vector<Request>& request_list() const noexcept { return requests_; }
  SimAddress device_image_addr() const noexcept { return device_image_; }
  void set_device_image_addr(SimAddress addr) noexcept { device_image_ = addr; }
  bool contains(SimAddress host_addr) const noexcept;

  // Throws OutOfSimMemory when the buffer is exhausted.
  SimAddress serve(std::uint64_t size_bytes);

 private:
  SimAddress buffer_;
  std::uint64_t total_;
  std::uint64_t served_ = 0;
  std::vector<Request> requests_;
  SimAddress device_image_ = kNull;
};

// Where tree builders get host memory from: the plain bump allocator of a
// space, or an arena living inside it.
class HostAllocator {
 public:
  explicit HostAllocator(MemorySpace& space) : space_(space) {}
  HostAllocator(MemorySpace& space, Arena& arena) : space_(space), arena_(&arena) {}

  SimAddress allocate(std::uint64_t size_bytes);
  MemorySpace& space() noexcept { return space_; }
  std::uint64_t bytes_served() const noexcept { return served_; }

 private:
  MemorySpace& space_;
  Arena* arena_ = nullptr;
  std::uint64_t served_ = 0;
};

}  // namespace chainforge::sim
