#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "chainforge/memory.hpp"
#include "chainforge/schemes.hpp"

namespace chainforge::scenario {

enum class LinearLayout { allinit_allused, allinit_LLused, LLinit_LLused };

inline constexpr std::array<LinearLayout, 3> kAllLayouts = {
    LinearLayout::allinit_allused, LinearLayout::allinit_LLused, LinearLayout::LLinit_LLused};

std::string_view layout_name(LinearLayout layout) noexcept;
std::optional<LinearLayout> parse_layout(std::string_view name) noexcept;

// k structures L0..L(k-1) chained through Lnext, each optionally owning an
// n-element A array.
struct LinearSpec {
  std::uint32_t k = 1;
  std::uint64_t n = 0;
  LinearLayout layout = LinearLayout::allinit_allused;
};

// A root node whose Lnext points to a block of q nodes, recursively, down to
// `depth`; the nodes at `depth` are the half-size leaf structures.
struct DenseSpec {
  std::uint32_t q = 1;
  std::uint64_t n = 0;
  std::uint32_t depth = 3;
};

using ScenarioSpec = std::variant<LinearSpec, DenseSpec>;

std::string_view scenario_name(const ScenarioSpec& spec) noexcept;
// Throws InvalidArgument on k < 1 or q < 1.
void validate(const ScenarioSpec& spec);

// Field layout of the benchmark structures.
namespace node {
inline constexpr std::uint64_t kBytes = 24;
inline constexpr std::uint64_t kLeafBytes = 12;
inline constexpr std::uint64_t kCountOffset = 0;   // int nA
inline constexpr std::uint64_t kNextCountOffset = 4;  // int nLnext
inline constexpr std::uint64_t kArrayOffset = 8;   // double* A
inline constexpr std::uint64_t kNextOffset = 16;   // L* Lnext
inline constexpr std::uint64_t kLeafArrayOffset = 4;
inline constexpr std::uint64_t kElementBytes = 8;
}  // namespace node

std::uint64_t linear_data_size(std::uint32_t k, std::uint64_t n, LinearLayout layout);
std::uint64_t dense_data_size(std::uint32_t q, std::uint64_t n, std::uint32_t depth);

// Allocation sizes in the order the builders request them, from a dry-run
// traversal of `spec` (no memory touched).
std::vector<std::uint64_t> allocation_plan(const ScenarioSpec& spec);

enum class BlockKind { nodes, array };

// One host allocation made by a builder. A Dense child block holds `objects`
// consecutive nodes; everything else holds exactly one object.
struct Block {
  sim::SimAddress addr;
  std::uint64_t bytes = 0;
  BlockKind kind = BlockKind::nodes;
  std::uint32_t objects = 1;
  std::uint64_t object_bytes = 0;
  std::uint32_t level = 0;
};

struct ReferenceSite {
  sim::SimAddress holder;
  std::uint64_t offset = 0;
  sim::SimAddress target;

  sim::SimAddress field() const noexcept { return holder + offset; }
};

struct ArrayInfo {
  sim::SimAddress addr;
  sim::SimAddress holder;
  std::uint64_t elements = 0;
  std::uint32_t level = 0;
  std::uint64_t ordinal = 0;  // key of the initialization pattern
};

struct TreeHandle {
  sim::SimAddress root;
  std::vector<std::vector<sim::SimAddress>> node_addrs;   // per level
  std::vector<std::vector<sim::SimAddress>> array_addrs;  // per level, allocated arrays only
  std::vector<Block> blocks;                              // allocation order
  std::vector<ReferenceSite> reference_field_sites;       // every non-null reference field
  std::vector<ArrayInfo> arrays;
  std::uint64_t bytes_allocated = 0;

  std::size_t node_count() const noexcept;
};

// Deterministic, exactly representable initialization value.
double init_value(std::uint64_t seed, std::uint64_t ordinal, std::uint64_t index) noexcept;

TreeHandle build_linear_tree(const LinearSpec& spec, sim::HostAllocator& alloc, std::uint64_t seed = 0);
TreeHandle build_dense_tree(const DenseSpec& spec, sim::HostAllocator& alloc, std::uint64_t seed = 0);
TreeHandle build_tree(const ScenarioSpec& spec, sim::HostAllocator& alloc, std::uint64_t seed = 0);

// Device-side path to one A array: from the root node, each step loads the
// pointer at `field_offset` and then moves `index` objects of `stride` bytes.
struct ChainStep {
  std::uint64_t field_offset = node::kNextOffset;
  std::uint64_t index = 0;
  std::uint64_t stride = 0;
  bool indexed() const noexcept { return stride != 0; }
};

struct KernelTarget {
  std::vector<ChainStep> steps;
  std::uint64_t count_offset = node::kCountOffset;
  std::uint64_t array_offset = node::kArrayOffset;
  ArrayInfo array;
};

// Arrays the scale kernel updates: every A (allused), the last level's A
// (LLused), or the A at the end of the last-element path (Dense).
std::vector<KernelTarget> kernel_targets(const ScenarioSpec& spec, const TreeHandle& tree);

struct ManifestEntry {
  std::filesystem::path path;
  std::uint32_t k = 0;
  TransferScheme scheme = TransferScheme::uvm;
  LinearLayout layout = LinearLayout::allinit_allused;
};

// Source text of one stand-alone Linear benchmark program. Only uvm,
// marshalling and pointerchain variants exist.
std::string benchmark_source(std::uint32_t k, TransferScheme scheme, LinearLayout layout);

// Writes linear_k{k}_{scheme}_{layout}.cpp for k in [2, max_k] plus
// manifest.csv. Throws InvalidArgument for max_k < 2 and IoError.
std::vector<ManifestEntry> emit_benchmark_sources(std::uint32_t max_k, const std::filesystem::path& out_dir);

// `path,k,scheme,layout` per line.
void write_manifest(std::ostream& out, const std::vector<ManifestEntry>& entries);

}  // namespace chainforge::scenario
