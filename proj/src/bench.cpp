#include "chainforge/bench.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>
#include <tuple>

#include "chainforge/deep_copy.hpp"

namespace chainforge::bench {

using scenario::DenseSpec;
using scenario::KernelTarget;
using scenario::LinearSpec;
using scenario::ScenarioSpec;
using sim::SimAddress;

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(std::string_view key, std::string_view text) {
  text = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v)) {
    throw InvalidArgument("bad numeric value for " + std::string(key) + ": '" + std::string(text) + "'");
  }
  return v;
}

std::uint64_t parse_u64(std::string_view key, std::string_view text) {
  text = trim(text);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw InvalidArgument("bad integer value for " + std::string(key) + ": '" + std::string(text) + "'");
  }
  return v;
}

// Calls `fn(key, value)` for each key=value line.
template <typename Fn>
void for_each_setting(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view s = line;
    if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) {
      throw InvalidArgument("line " + std::to_string(lineno) + ": expected key=value, got '" + std::string(s) + "'");
    }
    fn(trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  return in;
}

}  // namespace

CostModel CostModel::p100() {
  CostModel m;
  m.l2_bytes = 4ULL << 20;
  return m;
}

void CostModel::validate() const {
  if (!(latency_us_per_op > 0) || !(bandwidth_gib_s > 0) || page_size == 0 || !(elem_op_ns > 0) ||
      !(deref_ns > 0) || l2_bytes == 0) {
    throw InvalidArgument("cost model parameters must be strictly positive");
  }
  if (!(spill_penalty >= 1.0)) throw InvalidArgument("spill_penalty must be at least 1");
}

void apply_cost_setting(CostModel& model, std::string_view key, std::string_view value) {
  if (key == "preset") {
    if (value == "v100") model = CostModel::v100();
    else if (value == "p100") model = CostModel::p100();
    else throw InvalidArgument("unknown cost preset '" + std::string(value) + "'");
  } else if (key == "latency_us_per_op") {
    model.latency_us_per_op = parse_double(key, value);
  } else if (key == "bandwidth_gib_s") {
    model.bandwidth_gib_s = parse_double(key, value);
  } else if (key == "page_size") {
    model.page_size = parse_u64(key, value);
  } else if (key == "elem_op_ns") {
    model.elem_op_ns = parse_double(key, value);
  } else if (key == "deref_ns") {
    model.deref_ns = parse_double(key, value);
  } else if (key == "l2_bytes") {
    model.l2_bytes = parse_u64(key, value);
  } else if (key == "spill_penalty") {
    model.spill_penalty = parse_double(key, value);
  } else {
    throw InvalidArgument("unknown cost model key '" + std::string(key) + "'");
  }
}

CostModel parse_cost_model(std::istream& in, CostModel base) {
  for_each_setting(in, [&](std::string_view k, std::string_view v) { apply_cost_setting(base, k, v); });
  base.validate();
  return base;
}

CostModel load_cost_model(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_cost_model(in);
}

std::uint64_t estimate_instructions(const ChainShape& shape) noexcept {
  std::uint64_t count = kKernelScaffoldInstructions;
  for (const auto step : shape.steps) {
    count += step == StepKind::plain ? kPlainStepInstructions : kIndexedStepInstructions;
  }
  if (shape.count_final_array_load) count += kFinalLoadInstructions;
  return count;
}

ChainShape kernel_chain_shape(const ScenarioSpec& spec, TransferScheme scheme) {
  ChainShape shape;
  if (scheme == TransferScheme::pointerchain) return shape;
  if (const auto* l = std::get_if<LinearSpec>(&spec)) {
    shape.steps.assign(l->k - 1, StepKind::plain);
  } else {
    shape.steps.assign(std::get<DenseSpec>(spec).depth, StepKind::indexed);
    shape.count_final_array_load = true;
  }
  return shape;
}

namespace {

void scale_array(sim::DeviceView& view, SimAddress a, std::uint64_t n, double scale) {
  for (std::uint64_t i = 0; i < n; ++i) {
    const SimAddress e = a + i * scenario::node::kElementBytes;
    view.write_f64(e, view.read_f64(e) * scale);
  }
}

}  // namespace

KernelWork kernel_scale(const std::vector<KernelTarget>& targets, sim::DeviceView& view, SimAddress device_root,
                        double scale) {
  KernelWork work;
  for (const auto& t : targets) {
    SimAddress node = device_root;
    for (const auto& step : t.steps) node = SimAddress{view.read_word(node + step.field_offset)} + step.index * step.stride;
    const std::uint64_t n = view.read_u32(node + t.count_offset);
    const SimAddress a{view.read_word(node + t.array_offset)};
    scale_array(view, a, n, scale);
    work.elements_touched += n;
    // Without hoisting, every iteration walks the chain again.
    work.chain_steps += t.steps.size() * n;
  }
  work.working_set_bytes = work.elements_touched * scenario::node::kElementBytes;
  return work;
}

KernelWork kernel_scale_hoisted(const std::vector<HoistedArray>& arrays, sim::DeviceView& view, double scale) {
  KernelWork work;
  for (const auto& a : arrays) {
    scale_array(view, a.device_addr, a.elements, scale);
    work.elements_touched += a.elements;
  }
  work.working_set_bytes = work.elements_touched * scenario::node::kElementBytes;
  return work;
}

double simulate_kernel_us(const KernelWork& work, const CostModel& model) noexcept {
  const double spill = work.working_set_bytes > model.l2_bytes ? model.spill_penalty : 1.0;
  const double ns = static_cast<double>(work.elements_touched) * model.elem_op_ns * spill +
                    static_cast<double>(work.chain_steps) * model.deref_ns;
  return ns / 1000.0;
}

SimTimes simulate_times(const std::vector<sim::TransferEntry>& entries, const KernelWork& work,
                        const CostModel& model) noexcept {
  SimTimes t;
  t.kernel_us = simulate_kernel_us(work, model);
  const double bytes_per_us = model.bandwidth_gib_s * static_cast<double>(1ULL << 30) / 1e6;
  double transfer_us = 0.0;
  for (const auto& e : entries) transfer_us += model.latency_us_per_op + static_cast<double>(e.bytes) / bytes_per_us;
  t.wall_us = t.kernel_us + transfer_us;
  return t;
}

RepeatResult adaptive_repeat(const std::function<double()>& run, std::size_t min_iters, double cv_threshold,
                             std::size_t max_iters) {
  if (min_iters < 3) throw InvalidArgument("adaptive repetition needs at least 3 iterations");
  if (max_iters < min_iters) throw InvalidArgument("iteration cap is below the minimum");
  std::vector<double> samples;
  RepeatResult r;
  while (samples.size() < max_iters) {
    samples.push_back(run());
    const double n = static_cast<double>(samples.size());
    r.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
    if (samples.size() < min_iters) continue;
    double ss = 0.0;
    for (const double s : samples) ss += (s - r.mean) * (s - r.mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    r.cv = r.mean != 0.0 ? sd / std::fabs(r.mean) : (sd == 0.0 ? 0.0 : INFINITY);
    if (r.cv < cv_threshold) {
      r.converged = true;
      break;
    }
  }
  r.iterations = samples.size();
  return r;
}

void tally(const sim::TransferLog& log, RunMetrics& m) {
  m.bytes_h2d = m.bytes_d2h = m.transfer_ops = m.attach_ops = m.page_faults = 0;
  for (const auto& e : log.entries()) {
    switch (e.op_kind) {
      case sim::OpKind::attach: ++m.attach_ops; break;
      case sim::OpKind::detach: break;
      case sim::OpKind::page_migration: ++m.page_faults; [[fallthrough]];
      case sim::OpKind::bulk:
      case sim::OpKind::per_object:
        ++m.transfer_ops;
        (e.direction == sim::Direction::h2d ? m.bytes_h2d : m.bytes_d2h) += e.bytes;
        break;
    }
  }
}

std::string layout_label(const ScenarioSpec& spec) {
  if (const auto* l = std::get_if<LinearSpec>(&spec)) return std::string(scenario::layout_name(l->layout));
  return "lastpath";
}

namespace {

struct Execution {
  CaseResult result;
  SimTimes times;
  RepeatResult kernel_repeat;
};

// Host-side effective address of a target's array, as a hoisted chain.
HoistedArray host_resolve(const sim::MemorySpace& host, SimAddress root, const KernelTarget& t) {
  SimAddress node = root;
  for (const auto& step : t.steps) node = SimAddress{host.read_word(node + step.field_offset)} + step.index * step.stride;
  return {SimAddress{host.read_word(node + t.array_offset)}, host.read_u32(node + t.count_offset)};
}

void verify(const sim::MemorySpace& host, std::vector<std::byte> expected, const std::vector<KernelTarget>& targets,
            std::uint64_t seed, double scale) {
  const auto base = host.base();
  for (const auto& t : targets) {
    for (std::uint64_t i = 0; i < t.array.elements; ++i) {
      const double v = scenario::init_value(seed, t.array.ordinal, i) * scale;
      std::memcpy(expected.data() + ((t.array.addr - base) + i * scenario::node::kElementBytes), &v, sizeof v);
    }
  }
  const auto actual = host.image();
  if (actual.size() != expected.size()) throw VerificationFailed("host image changed size during the run");
  const auto mismatch = std::mismatch(actual.begin(), actual.end(), expected.begin());
  if (mismatch.first != actual.end()) {
    const auto off = static_cast<std::uint64_t>(mismatch.first - actual.begin());
    std::ostringstream os;
    os << "host byte at 0x" << std::hex << (base.value + off) << " differs from the expected image";
    throw VerificationFailed(os.str());
  }
}

Execution execute(const ScenarioSpec& spec, TransferScheme scheme, const CostModel& model, const RunOptions& options,
                  bool time_kernel) {
  sim::Simulation sim;
  if (scheme == TransferScheme::uvm) sim.enable_uvm(model.page_size);

  std::optional<deepcopy::MarshalledTree> marshalled;
  scenario::TreeHandle plain_tree;
  if (scheme == TransferScheme::marshalling) {
    marshalled.emplace(deepcopy::marshal_tree(spec, sim, options.seed));
  } else {
    sim::HostAllocator alloc(sim.host());
    plain_tree = scenario::build_tree(spec, alloc, options.seed);
  }
  const scenario::TreeHandle& tree = marshalled ? marshalled->tree : plain_tree;
  const auto targets = scenario::kernel_targets(spec, tree);
  std::vector<std::byte> snapshot(sim.host().image().begin(), sim.host().image().end());

  Execution ex;
  std::function<KernelWork(double)> kernel;
  std::optional<sim::DeviceMemoryView> device_view;
  std::optional<sim::UnifiedMemoryView> unified_view;
  std::optional<deepcopy::NaiveImage> naive;
  std::vector<std::pair<HoistedArray, HoistedArray>> hoisted;  // host, device

  switch (scheme) {
    case TransferScheme::marshalling: {
      const SimAddress image = deepcopy::marshal_transfer_and_attach(marshalled->arena, tree, sim);
      const SimAddress root = image + (tree.root - marshalled->arena.buffer_host_addr());
      device_view.emplace(sim);
      kernel = [&, root](double s) { return kernel_scale(targets, *device_view, root, s); };
      ex.result.work = kernel(options.scale);
      deepcopy::demarshal(marshalled->arena, tree, sim);
      break;
    }
    case TransferScheme::naive: {
      naive.emplace(deepcopy::naive_deep_copy(tree, sim));
      const SimAddress root = naive->device_root;
      device_view.emplace(sim);
      kernel = [&, root](double s) { return kernel_scale(targets, *device_view, root, s); };
      ex.result.work = kernel(options.scale);
      deepcopy::naive_copy_back(*naive, tree, sim);
      break;
    }
    case TransferScheme::uvm: {
      unified_view.emplace(sim, sim::Actor::device);
      kernel = [&](double s) { return kernel_scale(targets, *unified_view, tree.root, s); };
      ex.result.work = kernel(options.scale);
      auto& uvm = sim.uvm();
      for (const auto page : uvm.dirty_pages(sim::Actor::device)) {
        uvm.touch(SimAddress{page * uvm.page_size()}, uvm.page_size(), sim::AccessKind::read, sim::Actor::host,
                  sim.log());
      }
      break;
    }
    case TransferScheme::pointerchain: {
      for (const auto& t : targets) {
        const HoistedArray on_host = host_resolve(sim.host(), tree.root, t);
        if (on_host.elements == 0) continue;
        const std::uint64_t bytes = on_host.elements * scenario::node::kElementBytes;
        const SimAddress dev = sim.device().allocate(bytes);
        sim.transfer_range(sim::SpaceKind::host, on_host.device_addr, sim::SpaceKind::device, dev, bytes,
                           sim::OpKind::bulk);
        hoisted.push_back({on_host, {dev, on_host.elements}});
      }
      std::vector<HoistedArray> device_arrays;
      for (const auto& [h, d] : hoisted) device_arrays.push_back(d);
      device_view.emplace(sim);
      kernel = [&, device_arrays](double s) { return kernel_scale_hoisted(device_arrays, *device_view, s); };
      ex.result.work = kernel(options.scale);
      for (const auto& [h, d] : hoisted) {
        sim.transfer_range(sim::SpaceKind::device, d.device_addr, sim::SpaceKind::host, h.device_addr,
                           h.elements * scenario::node::kElementBytes, sim::OpKind::bulk);
      }
      break;
    }
  }

  std::uint64_t expected_elements = 0;
  for (const auto& t : targets) expected_elements += t.array.elements;
  if (ex.result.work.elements_touched != expected_elements) {
    throw VerificationFailed("kernel touched " + std::to_string(ex.result.work.elements_touched) + " elements, " +
                             std::to_string(expected_elements) + " expected");
  }
  verify(sim.host(), std::move(snapshot), targets, options.seed, options.scale);

  RunMetrics& m = ex.result.metrics;
  m.scenario = std::string(scenario::scenario_name(spec));
  m.scheme = scheme;
  m.layout = layout_label(spec);
  if (const auto* l = std::get_if<LinearSpec>(&spec)) {
    m.k_or_q = l->k;
    m.n = l->n;
  } else {
    m.k_or_q = std::get<DenseSpec>(spec).q;
    m.n = std::get<DenseSpec>(spec).n;
  }
  tally(sim.log(), m);
  m.instr_estimate = estimate_instructions(kernel_chain_shape(spec, scheme));
  m.verified = true;
  ex.times = simulate_times(sim.log().entries(), ex.result.work, model);
  ex.result.log = sim.log();

  if (time_kernel) {
    // Re-runs touch only device-side state; the metrics above are final.
    ex.kernel_repeat = adaptive_repeat([&] { return simulate_kernel_us(kernel(1.0), model); });
  } else {
    ex.kernel_repeat = {ex.times.kernel_us, 0.0, 1, true};
  }
  return ex;
}

}  // namespace

CaseResult run_case(const ScenarioSpec& spec, TransferScheme scheme, const CostModel& model,
                    const RunOptions& options) {
  scenario::validate(spec);
  model.validate();
  if (std::holds_alternative<DenseSpec>(spec) && std::get<DenseSpec>(spec).n == 0 &&
      scheme == TransferScheme::pointerchain) {
    throw ScenarioMismatch("the dense kernel has no array to hoist when n = 0");
  }
  Execution first = execute(spec, scheme, model, options, options.repeat);
  CaseResult result = std::move(first.result);
  if (!options.repeat) {
    result.metrics.sim_kernel_us = first.times.kernel_us;
    result.metrics.sim_wall_us = first.times.wall_us;
    result.metrics.iterations = 1;
    return result;
  }
  std::size_t calls = 0;
  const RepeatResult wall = adaptive_repeat([&] {
    if (calls++ == 0) return first.times.wall_us;
    return execute(spec, scheme, model, options, false).times.wall_us;
  });
  result.metrics.sim_kernel_us = first.kernel_repeat.mean;
  result.metrics.sim_wall_us = std::max(wall.mean, result.metrics.sim_kernel_us);
  result.metrics.iterations = wall.iterations;
  return result;
}

namespace {

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  while (!s.empty()) {
    const auto comma = s.find(',');
    const auto item = trim(s.substr(0, comma));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string_view::npos) break;
    s = s.substr(comma + 1);
  }
  return out;
}

std::vector<std::uint64_t> parse_int_list(std::string_view key, std::string_view value) {
  std::vector<std::uint64_t> out;
  for (const auto item : split_list(value)) {
    if (const auto dots = item.find(".."); dots != std::string_view::npos) {
      const auto lo = parse_u64(key, item.substr(0, dots));
      const auto hi = parse_u64(key, item.substr(dots + 2));
      if (hi < lo) throw InvalidArgument("empty range in " + std::string(key));
      for (auto v = lo; v <= hi; ++v) out.push_back(v);
    } else {
      out.push_back(parse_u64(key, item));
    }
  }
  return out;
}

std::vector<std::uint32_t> narrow(std::string_view key, const std::vector<std::uint64_t>& in) {
  std::vector<std::uint32_t> out;
  for (const auto v : in) {
    if (v > UINT32_MAX) throw InvalidArgument(std::string(key) + " value out of range");
    out.push_back(static_cast<std::uint32_t>(v));
  }
  return out;
}

}  // namespace

SweepGrid parse_sweep_grid(std::istream& in) {
  SweepGrid g;
  for_each_setting(in, [&](std::string_view key, std::string_view value) {
    if (key == "linear.k") {
      g.linear_k = narrow(key, parse_int_list(key, value));
    } else if (key == "linear.n") {
      g.linear_n = parse_int_list(key, value);
    } else if (key == "linear.layouts") {
      g.linear_layouts.clear();
      for (const auto item : split_list(value)) {
        const auto l = scenario::parse_layout(item);
        if (!l) throw InvalidArgument("unknown layout '" + std::string(item) + "'");
        g.linear_layouts.push_back(*l);
      }
    } else if (key == "dense.q") {
      g.dense_q = narrow(key, parse_int_list(key, value));
    } else if (key == "dense.n") {
      g.dense_n = parse_int_list(key, value);
    } else if (key == "dense.depth") {
      const auto d = parse_u64(key, value);
      if (d > 32) throw InvalidArgument("dense.depth is unreasonably large");
      g.dense_depth = static_cast<std::uint32_t>(d);
    } else if (key == "schemes") {
      g.schemes.clear();
      for (const auto item : split_list(value)) {
        const auto s = parse_scheme(item);
        if (!s) throw InvalidArgument("unknown scheme '" + std::string(item) + "'");
        g.schemes.push_back(*s);
      }
    } else if (key == "seed") {
      g.options.seed = parse_u64(key, value);
    } else if (key == "scale") {
      g.options.scale = parse_double(key, value);
    } else if (key == "jobs") {
      g.jobs = static_cast<unsigned>(std::max<std::uint64_t>(1, parse_u64(key, value)));
    } else if (key.substr(0, 7) == "config.") {
      apply_cost_setting(g.model, key.substr(7), value);
    } else {
      throw InvalidArgument("unknown sweep key '" + std::string(key) + "'");
    }
  });
  g.model.validate();
  return g;
}

SweepGrid load_sweep_grid(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_sweep_grid(in);
}

std::vector<SweepCell> sweep_cells(const SweepGrid& g) {
  std::vector<SweepCell> cells;
  for (const auto scheme : g.schemes) {
    for (const auto layout : g.linear_layouts) {
      for (const auto k : g.linear_k) {
        for (const auto n : g.linear_n) cells.push_back({LinearSpec{k, n, layout}, scheme});
      }
    }
    for (const auto q : g.dense_q) {
      for (const auto n : g.dense_n) {
        if (n == 0 && scheme == TransferScheme::pointerchain) continue;
        cells.push_back({DenseSpec{q, n, g.dense_depth}, scheme});
      }
    }
  }
  return cells;
}

bool metrics_key_less(const RunMetrics& a, const RunMetrics& b) {
  return std::tie(a.scenario, a.scheme, a.layout, a.k_or_q, a.n) < std::tie(b.scenario, b.scheme, b.layout, b.k_or_q, b.n);
}

std::vector<RunMetrics> sweep(const SweepGrid& grid) {
  const auto cells = sweep_cells(grid);
  std::vector<RunMetrics> out(cells.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        out[i] = run_case(cells[i].spec, cells[i].scheme, grid.model, grid.options).metrics;
      } catch (...) {
        const std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const unsigned jobs = std::max(1u, std::min<unsigned>(grid.jobs, static_cast<unsigned>(cells.size())));
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  std::stable_sort(out.begin(), out.end(), metrics_key_less);
  return out;
}

}  // namespace chainforge::bench
