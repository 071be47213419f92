#include "chainforge/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <sstream>
#include <tuple>

namespace chainforge::report {

using bench::RunMetrics;

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw InvalidArgument("cannot format double");
  return std::string(buf, ptr);
}

std::vector<ResultRow> to_rows(const std::vector<RunMetrics>& metrics) {
  std::vector<ResultRow> rows;
  rows.reserve(metrics.size());
  for (const auto& m : metrics) rows.push_back({m, std::nullopt, std::nullopt});
  return rows;
}

namespace {

std::string optional_field(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

[[noreturn]] void bad_record(std::size_t line, const std::string& why) {
  throw InvalidArgument("CSV line " + std::to_string(line) + ": " + why);
}

std::uint64_t to_u64(std::string_view s, std::size_t line, std::string_view field) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
    bad_record(line, "bad integer in " + std::string(field) + ": '" + std::string(s) + "'");
  }
  return v;
}

double to_double(std::string_view s, std::size_t line, std::string_view field) {
  double v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
    bad_record(line, "bad number in " + std::string(field) + ": '" + std::string(s) + "'");
  }
  return v;
}

std::optional<double> to_optional(std::string_view s, std::size_t line, std::string_view field) {
  if (s.empty()) return std::nullopt;
  return to_double(s, line, field);
}

}  // namespace

void write_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
  out << kCsvHeader << '\n';
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    out << m.scenario << ',' << scheme_name(m.scheme) << ',' << m.layout << ',' << m.k_or_q << ',' << m.n << ','
        << m.bytes_h2d << ',' << m.bytes_d2h << ',' << m.transfer_ops << ',' << m.attach_ops << ',' << m.page_faults
        << ',' << m.instr_estimate << ',' << format_double(m.sim_kernel_us) << ',' << format_double(m.sim_wall_us)
        << ',' << m.iterations << ',' << (m.verified ? "true" : "false") << ',' << optional_field(r.normalized_wall)
        << ',' << optional_field(r.normalized_kernel) << '\n';
  }
}

std::vector<ResultRow> parse_csv(std::istream& in) {
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line)) throw InvalidArgument("CSV input is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader) throw InvalidArgument("CSV header does not match the result schema");
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_fields(line);
    if (f.size() != 17) bad_record(lineno, "expected 17 fields, got " + std::to_string(f.size()));
    ResultRow r;
    auto& m = r.metrics;
    m.scenario = std::string(f[0]);
    if (m.scenario != "linear" && m.scenario != "dense") bad_record(lineno, "unknown scenario '" + m.scenario + "'");
    const auto scheme = parse_scheme(f[1]);
    if (!scheme) bad_record(lineno, "unknown scheme '" + std::string(f[1]) + "'");
    m.scheme = *scheme;
    m.layout = std::string(f[2]);
    m.k_or_q = to_u64(f[3], lineno, "k_or_q");
    m.n = to_u64(f[4], lineno, "n");
    m.bytes_h2d = to_u64(f[5], lineno, "bytes_h2d");
    m.bytes_d2h = to_u64(f[6], lineno, "bytes_d2h");
    m.transfer_ops = to_u64(f[7], lineno, "transfer_ops");
    m.attach_ops = to_u64(f[8], lineno, "attach_ops");
    m.page_faults = to_u64(f[9], lineno, "page_faults");
    m.instr_estimate = to_u64(f[10], lineno, "instr_estimate");
    m.sim_kernel_us = to_double(f[11], lineno, "sim_kernel_us");
    m.sim_wall_us = to_double(f[12], lineno, "sim_wall_us");
    m.iterations = to_u64(f[13], lineno, "iterations");
    if (f[14] == "true") m.verified = true;
    else if (f[14] == "false") m.verified = false;
    else bad_record(lineno, "verified must be true or false");
    r.normalized_wall = to_optional(f[15], lineno, "normalized_wall");
    r.normalized_kernel = to_optional(f[16], lineno, "normalized_kernel");
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<ResultRow> normalize(std::vector<ResultRow> rows, TransferScheme baseline) {
  using Key = std::tuple<std::string, std::string, std::uint64_t, std::uint64_t>;
  std::map<Key, const RunMetrics*> base;
  for (const auto& r : rows) {
    if (r.metrics.scheme == baseline) {
      base.emplace(Key{r.metrics.scenario, r.metrics.layout, r.metrics.k_or_q, r.metrics.n}, &r.metrics);
    }
  }
  auto ratio = [](double v, double b) -> std::optional<double> {
    if (b == 0.0) return std::nullopt;
    return v / b;
  };
  std::vector<std::pair<std::optional<double>, std::optional<double>>> ratios;
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    const auto it = base.find(Key{m.scenario, m.layout, m.k_or_q, m.n});
    if (it == base.end()) {
      throw MissingBaseline("no " + std::string(scheme_name(baseline)) + " row for " + m.scenario + "/" + m.layout +
                            " k_or_q=" + std::to_string(m.k_or_q) + " n=" + std::to_string(m.n) + " (needed by " +
                            std::string(scheme_name(m.scheme)) + ")");
    }
    ratios.emplace_back(ratio(m.sim_wall_us, it->second->sim_wall_us), ratio(m.sim_kernel_us, it->second->sim_kernel_us));
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].normalized_wall = ratios[i].first;
    rows[i].normalized_kernel = ratios[i].second;
  }
  return rows;
}

namespace {

std::string render_grid(const std::vector<std::vector<std::string>>& grid, std::size_t left_aligned) {
  std::vector<std::size_t> width;
  for (const auto& row : grid) {
    width.resize(std::max(width.size(), row.size()), 0);
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::string out;
  for (const auto& row : grid) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c > 0) line += "  ";
      const std::string pad(width[c] - row[c].size(), ' ');
      line += c < left_aligned ? row[c] + pad : pad + row[c];
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + '\n';
  }
  return out;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string render_results(const std::vector<ResultRow>& rows) {
  std::vector<std::vector<std::string>> grid;
  grid.push_back({"scenario", "scheme", "layout", "k_or_q", "n", "h2d_bytes", "d2h_bytes", "xfer_ops", "attach",
                  "faults", "instr", "kernel_us", "wall_us", "iters", "verified", "norm_wall", "norm_kernel"});
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    grid.push_back({m.scenario, std::string(scheme_name(m.scheme)), m.layout, std::to_string(m.k_or_q),
                    std::to_string(m.n), std::to_string(m.bytes_h2d), std::to_string(m.bytes_d2h),
                    std::to_string(m.transfer_ops), std::to_string(m.attach_ops), std::to_string(m.page_faults),
                    std::to_string(m.instr_estimate), fixed(m.sim_kernel_us, 3), fixed(m.sim_wall_us, 3),
                    std::to_string(m.iterations), m.verified ? "yes" : "no",
                    r.normalized_wall ? fixed(*r.normalized_wall, 4) : "-",
                    r.normalized_kernel ? fixed(*r.normalized_kernel, 4) : "-"});
  }
  return render_grid(grid, 3);
}

std::string render_text(const Table& t) {
  std::vector<std::vector<std::string>> grid;
  std::vector<std::string> header{t.corner};
  header.insert(header.end(), t.columns.begin(), t.columns.end());
  grid.push_back(std::move(header));
  for (std::size_t r = 0; r < t.row_labels.size(); ++r) {
    std::vector<std::string> row{t.row_labels[r]};
    row.insert(row.end(), t.cells[r].begin(), t.cells[r].end());
    grid.push_back(std::move(row));
  }
  std::string out = t.title.empty() ? std::string() : t.title + '\n';
  return out + render_grid(grid, 1);
}

std::string render_csv(const Table& t) {
  std::string out = t.corner;
  for (const auto& c : t.columns) out += ',' + c;
  out += '\n';
  for (std::size_t r = 0; r < t.row_labels.size(); ++r) {
    out += t.row_labels[r];
    for (const auto& cell : t.cells[r]) out += ',' + cell;
    out += '\n';
  }
  return out;
}

std::string format_size(std::uint64_t bytes, bool allow_gb) {
  constexpr double kKiB = 1024.0;
  constexpr double kMiB = kKiB * 1024.0;
  constexpr double kGiB = kMiB * 1024.0;
  const double b = static_cast<double>(bytes);
  if (b < 10 * kKiB) return fixed(b / kKiB, 2) + " KB";
  if (allow_gb && b >= 10 * kMiB) return fixed(b / kGiB, 2) + " GB";
  return fixed(b / kMiB, 2) + " MB";
}

namespace {

std::uint64_t pow10(unsigned e) {
  std::uint64_t v = 1;
  while (e-- > 0) v *= 10;
  return v;
}

std::string exp_label(unsigned e) { return "10^" + std::to_string(e); }

}  // namespace

Table linear_size_table(std::uint32_t max_k) {
  if (max_k < 2) throw InvalidArgument("size table needs max_k >= 2");
  Table t;
  t.title = "Linear data size (allinit_allused)";
  t.corner = "n\\k";
  for (std::uint32_t k = 2; k <= max_k; ++k) t.columns.push_back(std::to_string(k));
  for (unsigned e = 2; e <= 8; ++e) {
    t.row_labels.push_back(exp_label(e));
    std::vector<std::string> row;
    for (std::uint32_t k = 2; k <= max_k; ++k) {
      row.push_back(format_size(scenario::linear_data_size(k, pow10(e), scenario::LinearLayout::allinit_allused), false));
    }
    t.cells.push_back(std::move(row));
  }
  return t;
}

Table dense_size_table(std::uint32_t max_q, std::uint32_t depth) {
  if (max_q < 2) throw InvalidArgument("size table needs max_q >= 2");
  Table t;
  t.title = "Dense data size (depth " + std::to_string(depth) + ")";
  t.corner = "n\\q";
  for (std::uint32_t q = 2; q <= max_q; q += 2) t.columns.push_back(std::to_string(q));
  for (unsigned e = 1; e <= 5; ++e) {
    t.row_labels.push_back(exp_label(e));
    std::vector<std::string> row;
    for (std::uint32_t q = 2; q <= max_q; q += 2) row.push_back(format_size(scenario::dense_data_size(q, pow10(e), depth), true));
    t.cells.push_back(std::move(row));
  }
  return t;
}

long rounded_percent(std::uint64_t value, std::uint64_t baseline) {
  if (baseline == 0) throw InvalidArgument("percent change against a zero baseline");
  const double p = (static_cast<double>(value) - static_cast<double>(baseline)) * 100.0 / static_cast<double>(baseline);
  return std::lround(p);
}

std::string format_percent_delta(std::uint64_t value, std::uint64_t baseline) {
  const long p = rounded_percent(value, baseline);
  return "(" + std::string(p > 0 ? "+" : "") + std::to_string(p) + "%)";
}

std::string format_with_delta(std::uint64_t value, std::uint64_t baseline) {
  return std::to_string(value) + " " + format_percent_delta(value, baseline);
}

namespace {

std::array<std::string, 3> instruction_cells(const scenario::ScenarioSpec& spec) {
  const auto uvm = bench::estimate_instructions(bench::kernel_chain_shape(spec, TransferScheme::uvm));
  const auto mar = bench::estimate_instructions(bench::kernel_chain_shape(spec, TransferScheme::marshalling));
  const auto pc = bench::estimate_instructions(bench::kernel_chain_shape(spec, TransferScheme::pointerchain));
  return {std::to_string(uvm), format_with_delta(mar, uvm), format_with_delta(pc, uvm)};
}

}  // namespace

Table linear_instruction_table(std::uint32_t max_k) {
  if (max_k < 2) throw InvalidArgument("instruction table needs max_k >= 2");
  Table t;
  t.title = "Linear kernel instruction estimate";
  t.corner = "k";
  for (const auto layout : scenario::kAllLayouts) {
    const std::string l(scenario::layout_name(layout));
    for (const char* s : {"UVM", "Mar.", "PC"}) t.columns.push_back(l + " " + s);
  }
  for (std::uint32_t k = 2; k <= max_k; ++k) {
    t.row_labels.push_back(std::to_string(k));
    std::vector<std::string> row;
    for (const auto layout : scenario::kAllLayouts) {
      const auto cells = instruction_cells(scenario::LinearSpec{k, 1, layout});
      row.insert(row.end(), cells.begin(), cells.end());
    }
    t.cells.push_back(std::move(row));
  }
  return t;
}

Table dense_instruction_table(std::uint32_t depth) {
  Table t;
  t.title = "Dense kernel instruction estimate";
  t.columns = {"UVM", "Mar.", "PC"};
  t.row_labels = {"Dense"};
  const auto cells = instruction_cells(scenario::DenseSpec{2, 1, depth});
  t.cells.push_back({cells.begin(), cells.end()});
  return t;
}

}  // namespace chainforge::report
