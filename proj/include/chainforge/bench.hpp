#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "chainforge/memory.hpp"
#include "chainforge/scenario.hpp"
#include "chainforge/schemes.hpp"

namespace chainforge::bench {

struct CostModel {
  double latency_us_per_op = 10.0;
  double bandwidth_gib_s = 12.0;
  std::uint64_t page_size = sim::kDefaultPageSize;
  double elem_op_ns = 0.5;
  double deref_ns = 5.0;
  std::uint64_t l2_bytes = 6ULL << 20;
  double spill_penalty = 3.0;

  static CostModel v100() { return {}; }
  static CostModel p100();
  // Throws InvalidArgument unless every field is positive and spill >= 1.
  void validate() const;
};

// Sets one field by its key name; `preset` accepts v100 or p100 and resets
// every field. Throws InvalidArgument on unknown keys or bad values.
void apply_cost_setting(CostModel& model, std::string_view key, std::string_view value);
// Flat key=value lines; blank lines and '#' comments are ignored.
CostModel parse_cost_model(std::istream& in, CostModel base = {});
CostModel load_cost_model(const std::filesystem::path& path);

enum class StepKind { plain, indexed };

struct ChainShape {
  std::vector<StepKind> steps;
  bool count_final_array_load = false;
};

inline constexpr std::uint64_t kKernelScaffoldInstructions = 60;
inline constexpr std::uint64_t kPlainStepInstructions = 2;
inline constexpr std::uint64_t kIndexedStepInstructions = 6;
inline constexpr std::uint64_t kFinalLoadInstructions = 2;

std::uint64_t estimate_instructions(const ChainShape& shape) noexcept;

// Shape of the deepest chain the kernel dereferences per iteration. Hoisted
// (pointerchain) kernels have none.
ChainShape kernel_chain_shape(const scenario::ScenarioSpec& spec, TransferScheme scheme);

struct KernelWork {
  std::uint64_t elements_touched = 0;
  std::uint64_t chain_steps = 0;  // device-side dereferences over all iterations
  std::uint64_t working_set_bytes = 0;
};

// Scales every target array, resolving each chain through `view` from the
// device-side root. Throws WildAccess if a chain leads outside device memory.
KernelWork kernel_scale(const std::vector<scenario::KernelTarget>& targets, sim::DeviceView& view,
                        sim::SimAddress device_root, double scale);

struct HoistedArray {
  sim::SimAddress device_addr;
  std::uint64_t elements = 0;
};

// Kernel over arrays whose effective addresses were resolved on the host.
KernelWork kernel_scale_hoisted(const std::vector<HoistedArray>& arrays, sim::DeviceView& view, double scale);

struct SimTimes {
  double kernel_us = 0.0;
  double wall_us = 0.0;
};

double simulate_kernel_us(const KernelWork& work, const CostModel& model) noexcept;
SimTimes simulate_times(const std::vector<sim::TransferEntry>& entries, const KernelWork& work,
                        const CostModel& model) noexcept;

struct RepeatResult {
  double mean = 0.0;
  double cv = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

inline constexpr std::size_t kDefaultMinIters = 3;
inline constexpr double kDefaultCvThreshold = 0.02;
inline constexpr std::size_t kDefaultMaxIters = 100;

// Samples `run` until at least min_iters samples have a coefficient of
// variation below cv_threshold, or max_iters is reached (converged = false).
RepeatResult adaptive_repeat(const std::function<double()>& run, std::size_t min_iters = kDefaultMinIters,
                             double cv_threshold = kDefaultCvThreshold, std::size_t max_iters = kDefaultMaxIters);

struct RunMetrics {
  std::string scenario;
  TransferScheme scheme = TransferScheme::uvm;
  std::string layout;
  std::uint64_t k_or_q = 0;
  std::uint64_t n = 0;
  std::uint64_t bytes_h2d = 0;
  std::uint64_t bytes_d2h = 0;
  std::uint64_t transfer_ops = 0;
  std::uint64_t attach_ops = 0;
  std::uint64_t page_faults = 0;
  std::uint64_t instr_estimate = 0;
  double sim_kernel_us = 0.0;
  double sim_wall_us = 0.0;
  std::uint64_t iterations = 0;
  bool verified = false;

  bool operator==(const RunMetrics&) const = default;
};

// Counters derived from a transfer log.
void tally(const sim::TransferLog& log, RunMetrics& metrics);

struct RunOptions {
  std::uint64_t seed = 0;
  double scale = 2.0;
  bool repeat = true;
};

struct CaseResult {
  RunMetrics metrics;
  sim::TransferLog log;
  KernelWork work;
};

std::string layout_label(const scenario::ScenarioSpec& spec);

// Allocate, initialize, transfer, run the scale kernel once, copy back and
// verify. Throws VerificationFailed, WildAccess, ScenarioMismatch.
CaseResult run_case(const scenario::ScenarioSpec& spec, TransferScheme scheme, const CostModel& model,
                    const RunOptions& options = {});

struct SweepGrid {
  std::vector<std::uint32_t> linear_k;
  std::vector<std::uint64_t> linear_n;
  std::vector<scenario::LinearLayout> linear_layouts{scenario::kAllLayouts.begin(), scenario::kAllLayouts.end()};
  std::vector<std::uint32_t> dense_q;
  std::vector<std::uint64_t> dense_n;
  std::uint32_t dense_depth = 3;
  std::vector<TransferScheme> schemes{TransferScheme::uvm, TransferScheme::marshalling, TransferScheme::pointerchain};
  RunOptions options;
  CostModel model;
  unsigned jobs = 1;
};

// Keys: linear.k, linear.n, linear.layouts, dense.q, dense.n, dense.depth,
// schemes, seed, scale, jobs, and config.<cost key>. Integer lists accept
// comma-separated values and inclusive a..b ranges.
SweepGrid parse_sweep_grid(std::istream& in);
SweepGrid load_sweep_grid(const std::filesystem::path& path);

struct SweepCell {
  scenario::ScenarioSpec spec;
  TransferScheme scheme;
};

std::vector<SweepCell> sweep_cells(const SweepGrid& grid);

// Runs every cell; results come back in (scenario, scheme, layout, k/q, n)
// order whatever the job count.
std::vector<RunMetrics> sweep(const SweepGrid& grid);

bool metrics_key_less(const RunMetrics& a, const RunMetrics& b);

}  // namespace chainforge::bench
