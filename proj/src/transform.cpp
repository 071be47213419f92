#include "chainforge/transform.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <string_view>
#include <unordered_map>

#include "chainforge/lexer.hpp"

namespace chainforge::transform {

using directive::ChainDeclaration;
using directive::ParsedUnit;
using directive::PragmaKind;

namespace {

constexpr std::size_t kMaxNameSuffix = 10000;

std::string indentation_of(const std::string& line) {
  const std::size_t n = line.find_first_not_of(" \t");
  return line.substr(0, n == std::string::npos ? line.size() : n);
}

class NameAllocator {
 public:
  explicit NameAllocator(const ParsedUnit& unit) {
    for (const auto& tok : lex::tokenize(unit.masked_text)) {
      if (tok.kind == lex::TokenKind::identifier) taken_.emplace(tok.text);
    }
  }

  std::string next() {
    const std::string base = "pc_" + std::to_string(++ordinal_);
    if (taken_.insert(base).second) return base;
    for (std::size_t i = 1; i <= kMaxNameSuffix; ++i) {
      std::string candidate = base + "_" + std::to_string(i);
      if (taken_.insert(candidate).second) return candidate;
    }
    throw NameCollision("no free local name derived from '" + base + "'");
  }

 private:
  std::set<std::string, std::less<>> taken_;
  std::size_t ordinal_ = 0;
};

}  // namespace

std::string binding_statement(const ChainDeclaration& decl, const std::string& local_name) {
  std::string qualifier;
  switch (decl.qualifier) {
    case directive::Qualifier::none: break;
    case directive::Qualifier::restrict_: qualifier = " __restrict"; break;
    case directive::Qualifier::restrictconst: qualifier = " __restrict const"; break;
  }
  return decl.value_type + qualifier + " " + local_name + " = " + decl.chain_text + ";";
}

RewritePlan plan_rewrites(const ParsedUnit& unit) {
  struct Pending {
    const ChainDeclaration* decl;
    std::size_t anchor_line;
  };
  std::vector<Pending> pending;
  for (const auto& decl : unit.declarations) pending.push_back({&decl, decl.declaration_site});
  for (const auto& region : unit.regions) {
    for (const auto& decl : region.inline_declarations) pending.push_back({&decl, region.begin_line});
  }
  std::stable_sort(pending.begin(), pending.end(),
                   [](const Pending& a, const Pending& b) { return a.anchor_line < b.anchor_line; });

  RewritePlan plan;
  NameAllocator names(unit);
  std::unordered_map<const ChainDeclaration*, std::size_t> binding_of;
  for (const auto& p : pending) {
    Binding b;
    b.declaration = *p.decl;
    b.local_name = names.next();
    b.anchor_line = p.anchor_line;
    b.text = indentation_of(unit.source_lines.at(p.anchor_line - 1)) + binding_statement(*p.decl, b.local_name);
    binding_of.emplace(p.decl, plan.bindings.size());
    plan.bindings.push_back(std::move(b));
  }

  for (std::size_t r = 0; r < unit.regions.size(); ++r) {
    RegionRewrite rewrite;
    rewrite.region_index = r;
    const std::string end_indent = indentation_of(unit.source_lines.at(unit.regions[r].end_line - 1));
    for (const ChainDeclaration* decl : directive::visible_declarations(unit, r)) {
      const Binding& b = plan.bindings[binding_of.at(decl)];
      RegionEntry entry{*decl, b.local_name, b.text, std::nullopt};
      if (decl->is_scalar) entry.writeback_line = end_indent + decl->chain_text + " = " + b.local_name + ";";
      rewrite.replacements[decl->chain_text] = b.local_name;
      rewrite.entries.push_back(std::move(entry));
    }
    plan.regions.push_back(std::move(rewrite));
  }
  return plan;
}

namespace {

// Replaces chain occurrences in one region body. `text` and `masked` have
// identical layout; matching runs on the masked copy so literals and
// comments are never touched.
std::string replace_chains(std::string_view text, std::string_view masked, const RegionRewrite& rewrite,
                           std::size_t& count) {
  struct Pattern {
    std::vector<std::string> tokens;
    const std::string* local;
  };
  std::vector<Pattern> patterns;
  for (const auto& entry : rewrite.entries) {
    patterns.push_back({directive::chain_tokens(entry.declaration.segments), &entry.local_name});
  }
  std::stable_sort(patterns.begin(), patterns.end(),
                   [](const Pattern& a, const Pattern& b) { return a.tokens.size() > b.tokens.size(); });

  const auto tokens = lex::tokenize(masked);
  std::string out;
  std::size_t copied = 0;
  std::size_t i = 0;
  while (i < tokens.size()) {
    const bool member_context =
        i > 0 && (tokens[i - 1].text == "." || tokens[i - 1].text == "->" || tokens[i - 1].text == "::" ||
                  tokens[i - 1].text == ".*" || tokens[i - 1].text == "->*");
    const Pattern* hit = nullptr;
    if (!member_context) {
      for (const auto& p : patterns) {
        if (i + p.tokens.size() > tokens.size()) continue;
        bool same = true;
        for (std::size_t k = 0; k < p.tokens.size() && same; ++k) same = tokens[i + k].text == p.tokens[k];
        if (same) {
          hit = &p;
          break;
        }
      }
    }
    if (hit == nullptr) {
      ++i;
      continue;
    }
    const auto& last = tokens[i + hit->tokens.size() - 1];
    out.append(text.substr(copied, tokens[i].offset - copied));
    out += *hit->local;
    copied = last.offset + last.text.size();
    ++count;
    i += hit->tokens.size();
  }
  out.append(text.substr(copied));
  return out;
}

}  // namespace

Transformed transform_unit(const ParsedUnit& unit, const RewritePlan& plan) {
  const auto& lines = unit.source_lines;
  std::vector<std::size_t> line_offset(lines.size() + 1, 0);
  for (std::size_t i = 0; i < lines.size(); ++i) line_offset[i + 1] = line_offset[i] + lines[i].size() + 1;

  std::unordered_map<std::size_t, const directive::PragmaSite*> pragma_at;
  for (const auto& site : unit.pragmas) pragma_at.emplace(site.first_line, &site);
  std::unordered_map<std::size_t, std::size_t> body_start;  // first body line -> region
  for (std::size_t r = 0; r < unit.regions.size(); ++r) {
    const auto& begin = *std::find_if(unit.pragmas.begin(), unit.pragmas.end(), [&](const auto& s) {
      return s.kind == PragmaKind::region_begin && s.index == r;
    });
    body_start.emplace(begin.last_line + 1, r);
  }

  Transformed result;
  std::vector<std::string> out;
  std::size_t line = 1;
  while (line <= lines.size()) {
    if (const auto it = pragma_at.find(line); it != pragma_at.end()) {
      const auto& site = *it->second;
      if (site.kind == PragmaKind::region_end) {
        for (const auto& entry : plan.regions.at(site.index).entries) {
          if (entry.writeback_line) out.push_back(*entry.writeback_line);
        }
      } else {
        for (const auto& b : plan.bindings) {
          if (b.anchor_line == site.first_line) out.push_back(b.text);
        }
      }
      line = site.last_line + 1;
      continue;
    }
    if (const auto it = body_start.find(line); it != body_start.end()) {
      const std::size_t end_pragma = unit.regions[it->second].end_line;
      if (end_pragma > line) {
        const std::size_t from = line_offset[line - 1];
        const std::size_t to = line_offset[end_pragma - 1] - 1;  // drop the final newline
        std::string body;
        for (std::size_t l = line; l < end_pragma; ++l) {
          if (l > line) body += '\n';
          body += lines[l - 1];
        }
        const std::string_view masked = std::string_view(unit.masked_text).substr(from, to - from);
        const std::string replaced = replace_chains(body, masked, plan.regions.at(it->second), result.replacements);
        std::size_t start = 0;
        while (true) {
          const std::size_t nl = replaced.find('\n', start);
          out.push_back(replaced.substr(start, nl == std::string::npos ? std::string::npos : nl - start));
          if (nl == std::string::npos) break;
          start = nl + 1;
        }
        line = end_pragma;
        continue;
      }
    }
    out.push_back(lines[line - 1]);
    ++line;
  }

  for (std::size_t i = 0; i < out.size(); ++i) {
    if (i > 0) result.text += '\n';
    result.text += out[i];
  }
  if (unit.trailing_newline && !out.empty()) result.text += '\n';
  return result;
}

Transformed transform_source(std::string_view source) {
  const auto unit = directive::parse_unit(source);
  return transform_unit(unit, plan_rewrites(unit));
}

namespace {

bool has_source_extension(const std::filesystem::path& p) {
  const auto ext = p.extension().string();
  return ext == ".c" || ext == ".cpp" || ext == ".h" || ext == ".hpp";
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

std::vector<std::filesystem::path> expand(const std::vector<std::filesystem::path>& paths, const TransformOptions& options) {
  std::vector<std::filesystem::path> files;
  for (const auto& p : paths) {
    std::error_code ec;
    if (std::filesystem::is_directory(p, ec)) {
      std::vector<std::filesystem::path> found;
      for (const auto& entry : std::filesystem::directory_iterator(p, ec)) {
        if (!entry.is_regular_file()) continue;
        const auto& fp = entry.path();
        if (!has_source_extension(fp)) continue;
        if (!options.in_place && ends_with(fp.filename().string(), options.suffix)) continue;
        found.push_back(fp);
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.push_back(p);
    }
  }
  return files;
}

}  // namespace

std::vector<FileReport> transform_files(const std::vector<std::filesystem::path>& paths, const TransformOptions& options) {
  std::vector<FileReport> reports;
  for (const auto& path : expand(paths, options)) {
    FileReport report;
    report.path = path;
    report.output = options.in_place ? path : path.parent_path() / (path.stem().string() + options.suffix);
    try {
      std::ifstream in(path, std::ios::binary);
      if (!in) throw IoError("cannot read " + path.string());
      std::ostringstream buffer;
      buffer << in.rdbuf();
      const std::string source = buffer.str();

      const auto unit = directive::parse_unit(source);
      const auto plan = plan_rewrites(unit);
      const auto transformed = transform_unit(unit, plan);
      report.declarations = unit.declarations.size();
      for (const auto& r : unit.regions) report.declarations += r.inline_declarations.size();
      report.regions = unit.regions.size();
      report.replacements = transformed.replacements;

      std::ofstream out(report.output, std::ios::binary | std::ios::trunc);
      if (!out) throw IoError("cannot write " + report.output.string());
      out << transformed.text;
      if (!out.flush()) throw IoError("short write to " + report.output.string());
    } catch (const Error& e) {
      report.ok = false;
      report.error = std::string(errc_name(e.code())) + ": " + e.what();
    }
    reports.push_back(std::move(report));
  }
  return reports;
}

}  // namespace chainforge::transform
