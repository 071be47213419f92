#include <gtest/gtest.h>

#include <array>
#include <random>
#include <set>
#include <sstream>

#include "chainforge/memory.hpp"

using namespace chainforge;
using namespace chainforge::sim;

TEST(MemorySpace, AllocationsAreAlignedZeroedAndDisjoint) {
  MemorySpace space(SpaceKind::host, SimAddress{kHostBase}, 1 << 20);
  const auto a = space.allocate(3);
  const auto b = space.allocate(12);
  const auto c = space.allocate(8);
  EXPECT_EQ(a.value, kHostBase);
  EXPECT_EQ(b.value, kHostBase + 8);
  EXPECT_EQ(c.value, kHostBase + 24);
  EXPECT_EQ(space.bytes_requested(), 23u);
  EXPECT_EQ(space.bump_offset(), 32u);
  EXPECT_EQ(space.read_word(c), 0u);
  EXPECT_EQ(space.read_u32(b + 8), 0u);
  EXPECT_EQ(space.allocations().size(), 3u);
}

TEST(MemorySpace, ReadsBackWhatWasWritten) {
  MemorySpace space(SpaceKind::device, SimAddress{kDeviceBase}, 1 << 20);
  const auto a = space.allocate(24);
  space.write_u32(a, 7);
  space.write_u32(a + 4, 0xFFFFFFFFu);
  space.write_f64(a + 8, -1.25);
  space.write_word(a + 16, 0xD00000010ULL);
  EXPECT_EQ(space.read_u32(a), 7u);
  EXPECT_EQ(space.read_u32(a + 4), 0xFFFFFFFFu);
  EXPECT_EQ(space.read_f64(a + 8), -1.25);
  EXPECT_EQ(space.read_word(a + 16), 0xD00000010ULL);
  // Little-endian layout.
  EXPECT_EQ(std::to_integer<int>(space.image()[0]), 7);
}

TEST(MemorySpace, AccessOutsideAllocationsIsWild) {
  MemorySpace space(SpaceKind::host, SimAddress{kHostBase}, 1 << 20);
  const auto a = space.allocate(12);
  space.allocate(8);
  EXPECT_THROW(space.read_word(kNull), WildAccess);
  EXPECT_THROW(space.read_word(a + 8), WildAccess);   // straddles the end of `a`
  EXPECT_THROW(space.read_u32(a + 12), WildAccess);  // alignment padding
  EXPECT_THROW(space.read_word(SimAddress{kHostBase + 4096}), WildAccess);
  EXPECT_THROW(space.read_word(SimAddress{kDeviceBase}), WildAccess);
  EXPECT_NO_THROW(space.read_u32(a + 8));
  EXPECT_FALSE(space.contains(a + 8, 8));
  EXPECT_TRUE(space.contains(a, 12));
}

TEST(MemorySpace, ExhaustionAndZeroSize) {
  MemorySpace space(SpaceKind::host, SimAddress{kHostBase}, 64);
  EXPECT_THROW(space.allocate(0), InvalidArgument);
  space.allocate(60);
  EXPECT_THROW(space.allocate(1), OutOfSimMemory);
  MemorySpace big(SpaceKind::host, SimAddress{kHostBase}, kDefaultCapacity);
  EXPECT_THROW(big.allocate(kDefaultCapacity + 1), OutOfSimMemory);
  EXPECT_EQ(big.image().size(), 0u);
}

TEST(Simulation, SpacesAreDisjoint) {
  Simulation sim;
  const auto h = sim.host().allocate(16);
  const auto d = sim.device().allocate(16);
  EXPECT_FALSE(sim.host().in_range(d));
  EXPECT_FALSE(sim.device().in_range(h));
  EXPECT_EQ(d.value, kDeviceBase);
  EXPECT_THROW(sim.device().read_word(h), WildAccess);
  SimConfig overlapping;
  overlapping.device_base = kHostBase + 4096;
  EXPECT_THROW(Simulation{overlapping}, InvalidArgument);
}

TEST(Simulation, TransferCopiesASnapshotAndLogs) {
  Simulation sim;
  const auto h = sim.host().allocate(16);
  const auto d = sim.device().allocate(16);
  sim.host().write_f64(h, 3.5);
  sim.transfer_range(SpaceKind::host, h, SpaceKind::device, d, 16, OpKind::bulk);
  sim.host().write_f64(h, 9.0);  // later host writes stay on the host
  EXPECT_EQ(sim.device().read_f64(d), 3.5);
  sim.device().write_f64(d + 8, 1.0);
  sim.transfer_range(SpaceKind::device, d, SpaceKind::host, h, 16, OpKind::per_object);
  EXPECT_EQ(sim.host().read_f64(h), 3.5);
  EXPECT_EQ(sim.host().read_f64(h + 8), 1.0);

  const auto& e = sim.log().entries();
  ASSERT_EQ(e.size(), 2u);
  EXPECT_EQ(e[0], (TransferEntry{Direction::h2d, OpKind::bulk, 16, 0}));
  EXPECT_EQ(e[1], (TransferEntry{Direction::d2h, OpKind::per_object, 16, 1}));
  EXPECT_THROW(sim.transfer_range(SpaceKind::host, h, SpaceKind::host, h, 8, OpKind::bulk), InvalidArgument);
  EXPECT_THROW(sim.transfer_range(SpaceKind::host, h, SpaceKind::device, d, 32, OpKind::bulk), WildAccess);
}

TEST(TransferLog, CountsBytesAndDump) {
  TransferLog log;
  log.append(Direction::h2d, OpKind::bulk, 100);
  log.append(Direction::h2d, OpKind::attach, 8);
  log.append(Direction::h2d, OpKind::attach, 8);
  log.append(Direction::d2h, OpKind::bulk, 100);
  log.append(Direction::d2h, OpKind::detach, 8);
  EXPECT_THROW(log.append(Direction::h2d, OpKind::bulk, 0), InvalidArgument);
  EXPECT_EQ(log.size(), 5u);
  EXPECT_EQ(log.count(OpKind::attach), 2u);
  EXPECT_EQ(log.bytes(Direction::h2d, OpKind::attach), 16u);
  EXPECT_EQ(log.bytes(Direction::d2h, OpKind::bulk), 100u);
  std::ostringstream os;
  log.write_dump(os);
  EXPECT_EQ(os.str(),
            "H2D,bulk,100,0\nH2D,attach,8,1\nH2D,attach,8,2\nD2H,bulk,100,3\nD2H,detach,8,4\n");
}

TEST(Uvm, MigratesOnFirstDeviceTouchOnly) {
  Simulation sim;
  const auto h = sim.host().allocate(3 * 4096);
  sim.enable_uvm();
  EXPECT_EQ(sim.uvm_touch(h, 4096 * 2 + 1, AccessKind::read, Actor::device), 3u);
  EXPECT_EQ(sim.uvm_touch(h + 100, 8, AccessKind::write, Actor::device), 0u);
  EXPECT_EQ(sim.log().count(OpKind::page_migration), 3u);
  EXPECT_EQ(sim.log().bytes(Direction::h2d, OpKind::page_migration), 3u * 4096);
  const auto dirty = sim.uvm().dirty_pages(Actor::device);
  ASSERT_EQ(dirty.size(), 1u);
  EXPECT_EQ(dirty[0], h.value / 4096);
  // A host read pulls the page back and leaves it clean.
  EXPECT_EQ(sim.uvm_touch(h, 8, AccessKind::read, Actor::host), 1u);
  EXPECT_EQ(sim.log().entries().back().direction, Direction::d2h);
  EXPECT_TRUE(sim.uvm().dirty_pages(Actor::device).empty());
  EXPECT_THROW(sim.uvm_touch(h + 3 * 4096, 8, AccessKind::read, Actor::device), WildAccess);
}

TEST(Uvm, UnifiedViewTouchesThePageModel) {
  Simulation sim;
  const auto h = sim.host().allocate(8192);
  sim.host().write_f64(h + 4096, 2.0);
  sim.enable_uvm();
  UnifiedMemoryView view(sim, Actor::device);
  EXPECT_EQ(view.read_f64(h + 4096), 2.0);
  view.write_f64(h + 4096, 4.0);
  EXPECT_EQ(sim.host().read_f64(h + 4096), 4.0);
  EXPECT_EQ(sim.log().count(OpKind::page_migration), 1u);
  EXPECT_EQ(sim.uvm().page(h.value / 4096).resident, Actor::host);
  EXPECT_EQ(sim.uvm().page(h.value / 4096 + 1).resident, Actor::device);
}

// Random access streams against a set-of-pages oracle: migrations on the
// first pass equal the distinct pages touched, and a repeat pass adds none.
TEST(Uvm, FirstTouchCountMatchesDistinctPages) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    Simulation sim;
    const std::uint64_t bytes = 1 + rng() % (64 * 4096);
    const auto h = sim.host().allocate(bytes);
    const std::uint64_t page = std::array<std::uint64_t, 3>{512, 4096, 65536}[rng() % 3];
    sim.enable_uvm(page);
    std::vector<std::pair<std::uint64_t, std::uint64_t>> accesses;
    std::set<std::uint64_t> pages;
    for (int i = 0; i < 50; ++i) {
      const std::uint64_t off = rng() % bytes;
      const std::uint64_t len = 1 + rng() % std::min<std::uint64_t>(bytes - off, 10000);
      accesses.emplace_back(off, len);
      for (std::uint64_t p = (h.value + off) / page; p <= (h.value + off + len - 1) / page; ++p) pages.insert(p);
    }
    std::size_t first = 0;
    for (const auto& [off, len] : accesses) first += sim.uvm_touch(h + off, len, AccessKind::read, Actor::device);
    EXPECT_EQ(first, pages.size());
    std::size_t second = 0;
    for (const auto& [off, len] : accesses) second += sim.uvm_touch(h + off, len, AccessKind::write, Actor::device);
    EXPECT_EQ(second, 0u);
  }
}

TEST(Arena, ServesContiguouslyInRequestOrder) {
  Simulation sim;
  const auto buf = sim.host().allocate(44);
  Arena arena(buf, 44);
  HostAllocator alloc(sim.host(), arena);
  EXPECT_EQ(alloc.allocate(24), buf);
  EXPECT_EQ(alloc.allocate(12), buf + 24);  // no padding inside the arena
  EXPECT_FALSE(arena.fully_served());
  EXPECT_EQ(alloc.allocate(8), buf + 36);
  EXPECT_TRUE(arena.fully_served());
  EXPECT_THROW(alloc.allocate(1), OutOfSimMemory);
  ASSERT_EQ(arena.request_list().size(), 3u);
  EXPECT_EQ(arena.request_list()[1].host_addr, buf + 24);
  EXPECT_EQ(arena.request_list()[1].size_bytes, 12u);
  EXPECT_EQ(arena.request_list()[2].order, 2u);
  EXPECT_TRUE(arena.contains(buf + 43));
  EXPECT_FALSE(arena.contains(buf + 44));
  EXPECT_EQ(alloc.bytes_served(), 44u);
}

TEST(Arena, PlainAllocatorUsesTheSpace) {
  Simulation sim;
  HostAllocator alloc(sim.host());
  EXPECT_EQ(alloc.allocate(12).value, kHostBase);
  EXPECT_EQ(alloc.allocate(8).value, kHostBase + 16);
  EXPECT_EQ(alloc.bytes_served(), 20u);
}
