#include "chainforge/scenario.hpp"

#include <string>

namespace chainforge::scenario {

using sim::SimAddress;

std::string_view layout_name(LinearLayout layout) noexcept {
  switch (layout) {
    case LinearLayout::allinit_allused: return "allinit_allused";
    case LinearLayout::allinit_LLused: return "allinit_LLused";
    case LinearLayout::LLinit_LLused: return "LLinit_LLused";
  }
  return "allinit_allused";
}

std::optional<LinearLayout> parse_layout(std::string_view name) noexcept {
  for (const auto l : kAllLayouts) {
    if (layout_name(l) == name) return l;
  }
  return std::nullopt;
}

std::string_view scenario_name(const ScenarioSpec& spec) noexcept {
  return std::holds_alternative<LinearSpec>(spec) ? "linear" : "dense";
}

void validate(const ScenarioSpec& spec) {
  if (const auto* l = std::get_if<LinearSpec>(&spec)) {
    if (l->k < 1) throw InvalidArgument("linear scenario needs k >= 1");
    if (l->n > UINT32_MAX) throw InvalidArgument("n must fit the 32-bit nA field");
  } else {
    const auto& d = std::get<DenseSpec>(spec);
    if (d.q < 1) throw InvalidArgument("dense scenario needs q >= 1");
    if (d.n > UINT32_MAX) throw InvalidArgument("n must fit the 32-bit nA field");
  }
}

std::uint64_t linear_data_size(std::uint32_t k, std::uint64_t n, LinearLayout layout) {
  const std::uint64_t arrays = layout == LinearLayout::LLinit_LLused ? 1 : k;
  return node::kBytes * k + node::kElementBytes * n * arrays;
}

std::uint64_t dense_data_size(std::uint32_t q, std::uint64_t n, std::uint32_t depth) {
  std::uint64_t size = node::kLeafBytes + node::kElementBytes * n;
  for (std::uint32_t d = 1; d <= depth; ++d) size = node::kBytes + node::kElementBytes * n + q * size;
  return size;
}

namespace {

bool array_at_level(const LinearSpec& spec, std::uint32_t level) {
  if (spec.n == 0) return false;
  return spec.layout != LinearLayout::LLinit_LLused || level + 1 == spec.k;
}

// Preorder over the Dense tree: a node's array, then its child block, then
// each child in turn.
void plan_dense_node(const DenseSpec& spec, std::uint32_t level, std::vector<std::uint64_t>& out) {
  if (spec.n > 0) out.push_back(node::kElementBytes * spec.n);
  if (level == spec.depth) return;
  const std::uint64_t child_bytes = level + 1 == spec.depth ? node::kLeafBytes : node::kBytes;
  out.push_back(child_bytes * spec.q);
  for (std::uint32_t j = 0; j < spec.q; ++j) plan_dense_node(spec, level + 1, out);
}

}  // namespace

std::vector<std::uint64_t> allocation_plan(const ScenarioSpec& spec) {
  validate(spec);
  std::vector<std::uint64_t> out;
  if (const auto* l = std::get_if<LinearSpec>(&spec)) {
    for (std::uint32_t i = 0; i < l->k; ++i) {
      out.push_back(node::kBytes);
      if (array_at_level(*l, i)) out.push_back(node::kElementBytes * l->n);
    }
  } else {
    const auto& d = std::get<DenseSpec>(spec);
    out.push_back(d.depth == 0 ? node::kLeafBytes : node::kBytes);
    plan_dense_node(d, 0, out);
  }
  return out;
}

std::size_t TreeHandle::node_count() const noexcept {
  std::size_t n = 0;
  for (const auto& level : node_addrs) n += level.size();
  return n;
}

double init_value(std::uint64_t seed, std::uint64_t ordinal, std::uint64_t index) noexcept {
  const std::uint64_t v = (seed + ordinal * 1000003ULL + index) % (1ULL << 31);
  return static_cast<double>(v) / 1024.0;
}

namespace {

class Builder {
 public:
  Builder(sim::HostAllocator& alloc, std::uint64_t seed) : alloc_(alloc), mem_(alloc.space()), seed_(seed) {}

  SimAddress allocate(std::uint64_t bytes, BlockKind kind, std::uint32_t objects, std::uint64_t object_bytes,
                      std::uint32_t level) {
    const SimAddress addr = alloc_.allocate(bytes);
    tree.blocks.push_back({addr, bytes, kind, objects, object_bytes, level});
    tree.bytes_allocated += bytes;
    return addr;
  }

  void add_node(std::uint32_t level, SimAddress addr) {
    if (tree.node_addrs.size() <= level) tree.node_addrs.resize(level + 1);
    tree.node_addrs[level].push_back(addr);
  }

  // Allocates, fills and links the A array of the node at `holder`.
  void attach_array(SimAddress holder, std::uint64_t field_offset, std::uint64_t n, std::uint32_t level,
                    std::uint64_t ordinal) {
    const SimAddress a = allocate(node::kElementBytes * n, BlockKind::array, 1, node::kElementBytes * n, level);
    for (std::uint64_t i = 0; i < n; ++i) mem_.write_f64(a + i * node::kElementBytes, init_value(seed_, ordinal, i));
    mem_.write_u32(holder + node::kCountOffset, static_cast<std::uint32_t>(n));
    mem_.write_word(holder + field_offset, a.value);
    tree.reference_field_sites.push_back({holder, field_offset, a});
    if (tree.array_addrs.size() <= level) tree.array_addrs.resize(level + 1);
    tree.array_addrs[level].push_back(a);
    tree.arrays.push_back({a, holder, n, level, ordinal});
  }

  void link(SimAddress holder, SimAddress target, std::uint32_t count) {
    mem_.write_u32(holder + node::kNextCountOffset, count);
    mem_.write_word(holder + node::kNextOffset, target.value);
    tree.reference_field_sites.push_back({holder, node::kNextOffset, target});
  }

  TreeHandle tree;

 private:
  sim::HostAllocator& alloc_;
  sim::MemorySpace& mem_;
  std::uint64_t seed_;
};

void build_dense_node(Builder& b, const DenseSpec& spec, SimAddress addr, std::uint32_t level,
                      std::uint64_t& ordinal) {
  b.add_node(level, addr);
  const bool leaf = level == spec.depth;
  if (spec.n > 0) b.attach_array(addr, leaf ? node::kLeafArrayOffset : node::kArrayOffset, spec.n, level, ordinal++);
  if (leaf) return;
  const std::uint64_t child_bytes = level + 1 == spec.depth ? node::kLeafBytes : node::kBytes;
  const SimAddress block = b.allocate(child_bytes * spec.q, BlockKind::nodes, spec.q, child_bytes, level + 1);
  b.link(addr, block, spec.q);
  for (std::uint32_t j = 0; j < spec.q; ++j) build_dense_node(b, spec, block + j * child_bytes, level + 1, ordinal);
}

}  // namespace

TreeHandle build_linear_tree(const LinearSpec& spec, sim::HostAllocator& alloc, std::uint64_t seed) {
  validate(spec);
  Builder b(alloc, seed);
  SimAddress prev = sim::kNull;
  for (std::uint32_t i = 0; i < spec.k; ++i) {
    const SimAddress node_addr = b.allocate(node::kBytes, BlockKind::nodes, 1, node::kBytes, i);
    b.add_node(i, node_addr);
    if (!prev.is_null()) b.link(prev, node_addr, 1);
    if (array_at_level(spec, i)) b.attach_array(node_addr, node::kArrayOffset, spec.n, i, i);
    prev = node_addr;
  }
  b.tree.root = b.tree.node_addrs.front().front();
  b.tree.array_addrs.resize(spec.k);
  return std::move(b.tree);
}

TreeHandle build_dense_tree(const DenseSpec& spec, sim::HostAllocator& alloc, std::uint64_t seed) {
  validate(spec);
  Builder b(alloc, seed);
  const std::uint64_t root_bytes = spec.depth == 0 ? node::kLeafBytes : node::kBytes;
  const SimAddress root = b.allocate(root_bytes, BlockKind::nodes, 1, root_bytes, 0);
  std::uint64_t ordinal = 0;
  build_dense_node(b, spec, root, 0, ordinal);
  b.tree.root = root;
  b.tree.array_addrs.resize(spec.depth + 1);
  return std::move(b.tree);
}

TreeHandle build_tree(const ScenarioSpec& spec, sim::HostAllocator& alloc, std::uint64_t seed) {
  if (const auto* l = std::get_if<LinearSpec>(&spec)) return build_linear_tree(*l, alloc, seed);
  return build_dense_tree(std::get<DenseSpec>(spec), alloc, seed);
}

std::vector<KernelTarget> kernel_targets(const ScenarioSpec& spec, const TreeHandle& tree) {
  std::vector<KernelTarget> out;
  if (const auto* l = std::get_if<LinearSpec>(&spec)) {
    for (const auto& info : tree.arrays) {
      if (l->layout != LinearLayout::allinit_allused && info.level + 1 != l->k) continue;
      KernelTarget t;
      t.steps.assign(info.level, ChainStep{node::kNextOffset, 0, 0});
      t.array = info;
      out.push_back(std::move(t));
    }
    return out;
  }
  const auto& d = std::get<DenseSpec>(spec);
  if (d.n == 0) return out;
  // The last-element path visits the final node of every child block.
  const std::uint64_t leaf_count = tree.node_addrs.back().size();
  const SimAddress last_leaf = tree.node_addrs.back()[leaf_count - 1];
  KernelTarget t;
  for (std::uint32_t level = 1; level <= d.depth; ++level) {
    const std::uint64_t stride = level == d.depth ? node::kLeafBytes : node::kBytes;
    t.steps.push_back({node::kNextOffset, d.q - 1ULL, stride});
  }
  t.array_offset = node::kLeafArrayOffset;
  for (const auto& info : tree.arrays) {
    if (info.holder == last_leaf) t.array = info;
  }
  out.push_back(std::move(t));
  return out;
}

}  // namespace chainforge::scenario
