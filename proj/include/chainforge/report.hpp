#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "chainforge/bench.hpp"

namespace chainforge::report {

struct ResultRow {
  bench::RunMetrics metrics;
  std::optional<double> normalized_wall;
  std::optional<double> normalized_kernel;

  bool operator==(const ResultRow&) const = default;
};

inline constexpr std::string_view kCsvHeader =
    "scenario,scheme,layout,k_or_q,n,bytes_h2d,bytes_d2h,transfer_ops,attach_ops,page_faults,instr_estimate,"
    "sim_kernel_us,sim_wall_us,iterations,verified,normalized_wall,normalized_kernel";

// Shortest text that parses back to the same double.
std::string format_double(double v);

std::vector<ResultRow> to_rows(const std::vector<bench::RunMetrics>& metrics);
void write_csv(std::ostream& out, const std::vector<ResultRow>& rows);
// Throws InvalidArgument on a bad header or malformed record.
std::vector<ResultRow> parse_csv(std::istream& in);

// Ratios against the baseline-scheme row of the same (scenario, layout,
// k/q, n). A zero baseline value leaves that ratio empty. Throws
// MissingBaseline naming the first cell without a baseline row.
std::vector<ResultRow> normalize(std::vector<ResultRow> rows, TransferScheme baseline = TransferScheme::uvm);

// Aligned, human-readable view of result rows.
std::string render_results(const std::vector<ResultRow>& rows);

// A labelled grid of preformatted cells.
struct Table {
  std::string title;
  std::string corner;
  std::vector<std::string> columns;
  std::vector<std::string> row_labels;
  std::vector<std::vector<std::string>> cells;  // [row][column]
};

std::string render_text(const Table& table);
std::string render_csv(const Table& table);

// Two decimals in 1024-based units. KB below 10 KiB, GB from 10 MiB when
// allowed, MB otherwise.
std::string format_size(std::uint64_t bytes, bool allow_gb);

// Rows n = 10^2..10^8, columns k = 2..max_k, allinit_allused layout.
Table linear_size_table(std::uint32_t max_k = 10);
// Rows n = 10^1..10^5, columns q = 2, 4, .., max_q, depth 3.
Table dense_size_table(std::uint32_t max_q = 16, std::uint32_t depth = 3);

// Whole percent change against the baseline, rounded half away from zero.
long rounded_percent(std::uint64_t value, std::uint64_t baseline);
// "(0%)", "(-23%)", "(+5%)".
std::string format_percent_delta(std::uint64_t value, std::uint64_t baseline);
// "60 (-23%)".
std::string format_with_delta(std::uint64_t value, std::uint64_t baseline);

// Estimator counts for k = 2..max_k: UVM, Mar. and PC per layout.
Table linear_instruction_table(std::uint32_t max_k = 10);
Table dense_instruction_table(std::uint32_t depth = 3);

// Measured allinit_allused counts for k = 2..10, kept as reference data
// because the estimator does not model the multi-loop kernel scaffold.
inline constexpr std::array<std::uint64_t, 9> kAllusedUvmReference = {62, 70, 78, 88, 100, 114, 130, 148, 168};
inline constexpr std::array<std::uint64_t, 9> kAllusedPointerchainReference = {60, 67, 74, 81, 88, 95, 102, 109, 116};
inline constexpr std::array<long, 9> kAllusedPercentReference = {-3, -4, -5, -8, -12, -17, -22, -26, -31};

}  // namespace chainforge::report
