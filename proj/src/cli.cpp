#include "chainforge/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

#include "chainforge/bench.hpp"
#include "chainforge/report.hpp"
#include "chainforge/scenario.hpp"
#include "chainforge/transform.hpp"

namespace chainforge {

namespace {

struct TransformArgs {
  std::vector<std::string> paths;
  bool in_place = false;
  std::string suffix = ".pc.cpp";
};

struct GenerateArgs {
  std::uint32_t max_k = 10;
  std::string out_dir;
};

struct SimulateArgs {
  std::string scenario = "linear";
  std::string scheme = "pointerchain";
  std::string layout = "allinit_allused";
  std::uint32_t k = 2;
  std::uint32_t q = 2;
  std::uint64_t n = 100;
  std::uint32_t depth = 3;
  std::uint64_t seed = 0;
  double scale = 2.0;
  std::string config;
  std::string preset;
  std::string dump_log;
  std::string format = "csv";
};

struct SweepArgs {
  std::string grid;
  std::string out;
  unsigned jobs = 0;
};

struct ReportArgs {
  std::string in;
  std::string normalize;
  std::string format = "table";
  std::string out;
};

struct TablesArgs {
  std::string which;
  std::string format = "text";
};

int do_transform(const TransformArgs& a, std::ostream& out, std::ostream& err) {
  std::vector<std::filesystem::path> paths(a.paths.begin(), a.paths.end());
  const auto reports = transform::transform_files(paths, {a.in_place, a.suffix});
  int status = 0;
  for (const auto& r : reports) {
    if (r.ok) {
      out << r.path.string() << " -> " << r.output.string() << ": " << r.declarations << " declarations, "
          << r.regions << " regions, " << r.replacements << " replacements\n";
    } else {
      err << r.path.string() << ": " << r.error << '\n';
      status = 1;
    }
  }
  if (reports.empty()) {
    err << "no source files found\n";
    status = 1;
  }
  return status;
}

int do_generate(const GenerateArgs& a, std::ostream& out) {
  const auto entries = scenario::emit_benchmark_sources(a.max_k, a.out_dir);
  scenario::write_manifest(out, entries);
  return 0;
}

bench::CostModel cost_model_from(const std::string& preset, const std::string& config) {
  bench::CostModel model;
  if (!preset.empty()) bench::apply_cost_setting(model, "preset", preset);
  if (!config.empty()) {
    std::ifstream in(config);
    if (!in) throw IoError("cannot read " + config);
    model = bench::parse_cost_model(in, model);
  }
  model.validate();
  return model;
}

void write_rows(std::ostream& out, const std::vector<report::ResultRow>& rows, const std::string& format) {
  if (format == "csv") report::write_csv(out, rows);
  else out << report::render_results(rows);
}

int do_simulate(const SimulateArgs& a, std::ostream& out) {
  const auto scheme = parse_scheme(a.scheme);
  if (!scheme) throw InvalidArgument("unknown scheme '" + a.scheme + "'");
  scenario::ScenarioSpec spec;
  if (a.scenario == "linear") {
    const auto layout = scenario::parse_layout(a.layout);
    if (!layout) throw InvalidArgument("unknown layout '" + a.layout + "'");
    spec = scenario::LinearSpec{a.k, a.n, *layout};
  } else if (a.scenario == "dense") {
    spec = scenario::DenseSpec{a.q, a.n, a.depth};
  } else {
    throw InvalidArgument("unknown scenario '" + a.scenario + "'");
  }
  const auto model = cost_model_from(a.preset, a.config);
  const auto result = bench::run_case(spec, *scheme, model, {a.seed, a.scale, true});
  if (!a.dump_log.empty()) {
    std::ofstream log(a.dump_log, std::ios::binary | std::ios::trunc);
    if (!log) throw IoError("cannot write " + a.dump_log);
    result.log.write_dump(log);
  }
  write_rows(out, report::to_rows({result.metrics}), a.format);
  return 0;
}

int do_sweep(const SweepArgs& a, std::ostream& out) {
  auto grid = bench::load_sweep_grid(a.grid);
  if (a.jobs > 0) grid.jobs = a.jobs;
  const auto rows = report::to_rows(bench::sweep(grid));
  if (a.out.empty()) {
    report::write_csv(out, rows);
  } else {
    std::ofstream file(a.out, std::ios::binary | std::ios::trunc);
    if (!file) throw IoError("cannot write " + a.out);
    report::write_csv(file, rows);
    out << "wrote " << rows.size() << " rows to " << a.out << '\n';
  }
  return 0;
}

int do_report(const ReportArgs& a, std::ostream& out) {
  std::ifstream in(a.in);
  if (!in) throw IoError("cannot read " + a.in);
  auto rows = report::parse_csv(in);
  if (!a.normalize.empty()) {
    const auto baseline = parse_scheme(a.normalize);
    if (!baseline) throw InvalidArgument("unknown baseline scheme '" + a.normalize + "'");
    rows = report::normalize(std::move(rows), *baseline);
  }
  if (a.out.empty()) {
    write_rows(out, rows, a.format);
  } else {
    std::ofstream file(a.out, std::ios::binary | std::ios::trunc);
    if (!file) throw IoError("cannot write " + a.out);
    write_rows(file, rows, a.format);
  }
  return 0;
}

int do_tables(const TablesArgs& a, std::ostream& out) {
  report::Table table;
  if (a.which == "size-linear") table = report::linear_size_table();
  else if (a.which == "size-dense") table = report::dense_size_table();
  else if (a.which == "instr-linear") table = report::linear_instruction_table();
  else if (a.which == "instr-dense") table = report::dense_instruction_table();
  else throw InvalidArgument("unknown table '" + a.which + "'");
  out << (a.format == "csv" ? report::render_csv(table) : report::render_text(table));
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Pointer-chain directive rewriter and deep-copy transfer simulator", "chainforge"};
  app.require_subcommand(1);

  TransformArgs ta;
  auto* transform_cmd = app.add_subcommand("transform", "Rewrite #pragma pointerchain directives");
  transform_cmd->add_option("paths", ta.paths, "Source files or directories")->required();
  transform_cmd->add_flag("--in-place", ta.in_place, "Overwrite the inputs");
  transform_cmd->add_option("--suffix", ta.suffix, "Output suffix replacing the extension");

  GenerateArgs ga;
  auto* generate_cmd = app.add_subcommand("generate", "Emit the Linear benchmark sources");
  generate_cmd->add_option("--max-k", ga.max_k, "Largest level count")->check(CLI::Range(2u, 1000u));
  generate_cmd->add_option("--out", ga.out_dir, "Output directory")->required();

  SimulateArgs sa;
  auto* simulate_cmd = app.add_subcommand("simulate", "Run one benchmark case in the simulator");
  simulate_cmd->add_option("--scenario", sa.scenario)->check(CLI::IsMember({"linear", "dense"}));
  simulate_cmd->add_option("--scheme", sa.scheme)->check(CLI::IsMember({"uvm", "marshalling", "pointerchain", "naive"}));
  simulate_cmd->add_option("--layout", sa.layout)->check(CLI::IsMember({"allinit_allused", "allinit_LLused", "LLinit_LLused"}));
  simulate_cmd->add_option("--k", sa.k, "Linear level count")->check(CLI::PositiveNumber);
  simulate_cmd->add_option("--q", sa.q, "Dense fan-out")->check(CLI::PositiveNumber);
  simulate_cmd->add_option("--n", sa.n, "Elements per array");
  simulate_cmd->add_option("--depth", sa.depth, "Dense depth");
  simulate_cmd->add_option("--seed", sa.seed, "Initialization seed");
  simulate_cmd->add_option("--scale", sa.scale, "Kernel scale factor");
  simulate_cmd->add_option("--config", sa.config, "Cost model key=value file");
  simulate_cmd->add_option("--preset", sa.preset, "Cost model preset")->check(CLI::IsMember({"v100", "p100"}));
  simulate_cmd->add_option("--dump-log", sa.dump_log, "Write the transfer log here");
  simulate_cmd->add_option("--format", sa.format)->check(CLI::IsMember({"csv", "table"}));

  SweepArgs wa;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run every cell of a grid file");
  sweep_cmd->add_option("--grid", wa.grid, "Grid file")->required();
  sweep_cmd->add_option("--out", wa.out, "CSV output path (default stdout)");
  sweep_cmd->add_option("--jobs", wa.jobs, "Worker threads");

  ReportArgs ra;
  auto* report_cmd = app.add_subcommand("report", "Normalize and render sweep results");
  report_cmd->add_option("--in", ra.in, "Result CSV")->required();
  report_cmd->add_option("--normalize", ra.normalize, "Baseline scheme")
      ->check(CLI::IsMember({"uvm", "marshalling", "pointerchain", "naive"}));
  report_cmd->add_option("--format", ra.format)->check(CLI::IsMember({"csv", "table"}));
  report_cmd->add_option("--out", ra.out, "Output path (default stdout)");

  TablesArgs tba;
  auto* tables_cmd = app.add_subcommand("tables", "Print data-size and instruction tables");
  tables_cmd->add_option("--which", tba.which)
      ->required()
      ->check(CLI::IsMember({"size-linear", "size-dense", "instr-linear", "instr-dense"}));
  tables_cmd->add_option("--format", tba.format)->check(CLI::IsMember({"text", "csv"}));

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (transform_cmd->parsed()) return do_transform(ta, out, err);
    if (generate_cmd->parsed()) return do_generate(ga, out);
    if (simulate_cmd->parsed()) return do_simulate(sa, out);
    if (sweep_cmd->parsed()) return do_sweep(wa, out);
    if (report_cmd->parsed()) return do_report(ra, out);
    if (tables_cmd->parsed()) return do_tables(tba, out);
  } catch (const Error& e) {
    err << "chainforge: " << errc_name(e.code()) << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "chainforge: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace chainforge
