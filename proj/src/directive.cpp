#include "chainforge/directive.hpp"

#include <algorithm>
#include <optional>
#include <unordered_map>

#include "chainforge/lexer.hpp"

namespace chainforge::directive {

std::string_view qualifier_name(Qualifier q) noexcept {
  switch (q) {
    case Qualifier::none: return "none";
    case Qualifier::restrict_: return "restrict";
    case Qualifier::restrictconst: return "restrictconst";
  }
  return "none";
}

namespace {

std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split_lines(std::string_view text, bool& trailing_newline) {
  std::vector<std::string> lines;
  trailing_newline = !text.empty() && text.back() == '\n';
  std::size_t start = 0;
  while (start < text.size()) {
    const std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.emplace_back(text.substr(start));
      break;
    }
    lines.emplace_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

bool ends_with_backslash(std::string_view line) {
  line = trim(line);
  return !line.empty() && line.back() == '\\';
}

void skip_blanks(std::string_view s, std::size_t& pos) {
  while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
}

bool consume_word(std::string_view s, std::size_t& pos, std::string_view word) {
  if (s.substr(pos, word.size()) != word) return false;
  const std::size_t end = pos + word.size();
  if (end < s.size() && lex::is_identifier_char(s[end])) return false;
  pos = end;
  return true;
}

// Offset just past `pointerchain` when the masked line is a pointerchain pragma.
std::optional<std::size_t> pointerchain_body(std::string_view line) {
  std::size_t pos = 0;
  skip_blanks(line, pos);
  if (pos >= line.size() || line[pos] != '#') return std::nullopt;
  ++pos;
  skip_blanks(line, pos);
  if (!consume_word(line, pos, "pragma")) return std::nullopt;
  const std::size_t before = pos;
  skip_blanks(line, pos);
  if (pos == before) return std::nullopt;
  if (!consume_word(line, pos, "pointerchain")) return std::nullopt;
  return pos;
}

bool is_preprocessor_line(std::string_view line) {
  std::size_t pos = 0;
  skip_blanks(line, pos);
  return pos < line.size() && line[pos] == '#';
}

std::string at_line(std::size_t line) { return "line " + std::to_string(line) + ": "; }

bool is_open(char c) { return c == '(' || c == '[' || c == '{'; }
bool is_close(char c) { return c == ')' || c == ']' || c == '}'; }

// Parses `( var [, var]... )` starting at `pos`; returns the raw variable texts.
std::vector<std::string> parse_declare_arguments(std::string_view body, std::size_t& pos, std::size_t line) {
  skip_blanks(body, pos);
  if (pos >= body.size() || body[pos] != '(') {
    throw MalformedDeclare(at_line(line) + "expected '(' after declare");
  }
  std::vector<std::string> vars;
  std::size_t depth = 0;
  std::size_t item_start = pos + 1;
  for (std::size_t i = pos + 1; i < body.size(); ++i) {
    const char c = body[i];
    if (is_open(c)) {
      ++depth;
    } else if (is_close(c)) {
      if (depth == 0) {
        if (c != ')') throw MalformedDeclare(at_line(line) + "unbalanced brackets in declare");
        vars.emplace_back(body.substr(item_start, i - item_start));
        pos = i + 1;
        return vars;
      }
      --depth;
    } else if (c == ',' && depth == 0) {
      vars.emplace_back(body.substr(item_start, i - item_start));
      item_start = i + 1;
    }
  }
  throw MalformedDeclare(at_line(line) + "missing ')' in declare");
}

ChainDeclaration parse_variable(std::string_view text, std::size_t line) {
  text = trim(text);
  std::size_t open = std::string_view::npos;
  std::size_t depth = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '{' && depth == 0) {
      open = i;
      break;
    }
    if (is_open(text[i])) ++depth;
    if (is_close(text[i]) && depth > 0) --depth;
  }
  if (open == std::string_view::npos || text.back() != '}') {
    throw MalformedDeclare(at_line(line) + "variable '" + std::string(text) + "' needs the form name{type[:qualifier]}");
  }
  const std::string_view name = trim(text.substr(0, open));
  if (name.empty()) throw MalformedDeclare(at_line(line) + "empty chain name in declare");
  const std::string_view inside = text.substr(open + 1, text.size() - open - 2);
  if (inside.find('{') != std::string_view::npos || inside.find('}') != std::string_view::npos) {
    throw MalformedDeclare(at_line(line) + "nested braces in type of '" + std::string(name) + "'");
  }

  // The qualifier separator is a lone ':' (never half of '::').
  std::size_t colon = std::string_view::npos;
  for (std::size_t i = 0; i < inside.size(); ++i) {
    if (inside[i] != ':') continue;
    const bool prev = i > 0 && inside[i - 1] == ':';
    const bool next = i + 1 < inside.size() && inside[i + 1] == ':';
    if (!prev && !next) colon = i;
  }

  ChainDeclaration decl;
  std::string_view type = inside;
  if (colon != std::string_view::npos) {
    type = inside.substr(0, colon);
    const std::string_view qual = trim(inside.substr(colon + 1));
    if (qual == "restrict") {
      decl.qualifier = Qualifier::restrict_;
    } else if (qual == "restrictconst") {
      decl.qualifier = Qualifier::restrictconst;
    } else {
      throw MalformedDeclare(at_line(line) + "unknown qualifier '" + std::string(qual) + "'");
    }
  }
  type = trim(type);
  if (type.empty()) throw MalformedDeclare(at_line(line) + "empty type for '" + std::string(name) + "'");

  try {
    decl.segments = parse_chain(name);
  } catch (const MalformedDeclare& e) {
    throw MalformedDeclare(at_line(line) + e.what());
  }
  decl.chain_text = chain_to_string(decl.segments);
  decl.value_type = std::string(type);
  decl.is_scalar = decl.value_type.back() != '*';
  decl.declaration_site = line;
  return decl;
}

}  // namespace

std::vector<ChainSegment> parse_chain(std::string_view text) {
  const std::string masked(text);
  const auto tokens = lex::tokenize(masked);
  const auto fail = [&](const std::string& why) {
    return MalformedDeclare("'" + std::string(text) + "' is not a pointer chain: " + why);
  };
  if (tokens.empty() || tokens[0].kind != lex::TokenKind::identifier) throw fail("must start with a name");

  std::vector<ChainSegment> segments;
  segments.push_back({Access::root, std::string(tokens[0].text), {}});
  std::size_t i = 1;
  while (i < tokens.size()) {
    const std::string_view t = tokens[i].text;
    if (t == "->" || t == ".") {
      if (i + 1 >= tokens.size() || tokens[i + 1].kind != lex::TokenKind::identifier) {
        throw fail("expected a field name after '" + std::string(t) + "'");
      }
      segments.push_back({t == "->" ? Access::arrow : Access::dot, std::string(tokens[i + 1].text), {}});
      i += 2;
    } else if (t == "[") {
      std::size_t depth = 1;
      std::size_t j = i + 1;
      for (; j < tokens.size(); ++j) {
        if (tokens[j].text == "[") ++depth;
        if (tokens[j].text == "]" && --depth == 0) break;
      }
      if (j >= tokens.size()) throw fail("unterminated '['");
      if (j == i + 1) throw fail("empty subscript");
      segments.back().subscripts.push_back(lex::join_tokens(tokens, i + 1, j));
      i = j + 1;
    } else {
      throw fail("unexpected '" + std::string(t) + "'");
    }
  }
  return segments;
}

std::string chain_to_string(const std::vector<ChainSegment>& segments) {
  std::string out;
  for (const auto& seg : segments) {
    if (seg.access == Access::arrow) out += "->";
    if (seg.access == Access::dot) out += ".";
    out += seg.field;
    for (const auto& sub : seg.subscripts) out += "[" + sub + "]";
  }
  return out;
}

std::vector<std::string> chain_tokens(const std::vector<ChainSegment>& segments) {
  std::vector<std::string> out;
  for (const auto& seg : segments) {
    if (seg.access == Access::arrow) out.emplace_back("->");
    if (seg.access == Access::dot) out.emplace_back(".");
    out.push_back(seg.field);
    for (const auto& sub : seg.subscripts) {
      out.emplace_back("[");
      for (const auto& tok : lex::tokenize(sub)) out.emplace_back(tok.text);
      out.emplace_back("]");
    }
  }
  return out;
}

ParsedUnit parse_unit(std::string_view source_text) {
  ParsedUnit unit;
  unit.source_lines = split_lines(source_text, unit.trailing_newline);
  unit.masked_text = lex::mask_comments_and_literals(source_text);
  bool ignored = false;
  const std::vector<std::string> masked = split_lines(unit.masked_text, ignored);
  const std::size_t line_count = unit.source_lines.size();

  unit.scopes.push_back({0, line_count + 1, 0, 0});
  std::size_t current = 0;
  std::optional<std::size_t> open_region;
  bool preprocessor_continuation = false;

  for (std::size_t i = 0; i < line_count; ++i) {
    const std::string& mline = masked[i];
    if (preprocessor_continuation) {
      preprocessor_continuation = ends_with_backslash(mline);
      continue;
    }

    if (const auto body_start = pointerchain_body(mline)) {
      const std::size_t first = i;
      std::string logical = mline.substr(*body_start);
      while (ends_with_backslash(logical) && i + 1 < line_count) {
        logical.erase(logical.find_last_of('\\'));
        logical += ' ';
        logical += masked[++i];
      }
      const std::size_t line_no = first + 1;
      const std::string_view body = trim(logical);
      std::size_t pos = 0;

      if (consume_word(body, pos, "declare")) {
        if (open_region) {
          throw MalformedDeclare(at_line(line_no) + "declare inside an open region (use the condensed form)");
        }
        const auto vars = parse_declare_arguments(body, pos, line_no);
        if (!trim(body.substr(pos)).empty()) throw MalformedDeclare(at_line(line_no) + "trailing text after declare(...)");
        PragmaSite site{PragmaKind::declare, first + 1, i + 1, unit.declarations.size(), vars.size()};
        for (const auto& v : vars) {
          auto decl = parse_variable(v, line_no);
          decl.scope = current;
          unit.declarations.push_back(std::move(decl));
        }
        unit.pragmas.push_back(site);
      } else if (consume_word(body, pos, "region")) {
        skip_blanks(body, pos);
        if (consume_word(body, pos, "begin")) {
          if (open_region) {
            throw NestedRegion(at_line(line_no) + "region begins inside the region opened at line " +
                               std::to_string(unit.regions[*open_region].begin_line));
          }
          RegionSpan region;
          region.begin_line = line_no;
          region.scope = current;
          skip_blanks(body, pos);
          if (consume_word(body, pos, "declare")) {
            for (const auto& v : parse_declare_arguments(body, pos, line_no)) {
              auto decl = parse_variable(v, line_no);
              decl.scope = current;
              decl.condensed = true;
              region.inline_declarations.push_back(std::move(decl));
            }
          }
          if (!trim(body.substr(pos)).empty()) throw MalformedDeclare(at_line(line_no) + "unexpected text after region begin");
          open_region = unit.regions.size();
          unit.pragmas.push_back({PragmaKind::region_begin, first + 1, i + 1, unit.regions.size(), 0});
          unit.regions.push_back(std::move(region));
        } else if (consume_word(body, pos, "end")) {
          if (!trim(body.substr(pos)).empty()) throw MalformedDeclare(at_line(line_no) + "unexpected text after region end");
          if (!open_region) throw UnbalancedRegion(at_line(line_no) + "region end without a matching region begin");
          RegionSpan& region = unit.regions[*open_region];
          if (region.scope != current) {
            throw UnbalancedRegion(at_line(line_no) + "region end is not in the block where the region began at line " +
                                   std::to_string(region.begin_line));
          }
          region.end_line = line_no;
          unit.pragmas.push_back({PragmaKind::region_end, first + 1, i + 1, *open_region, 0});
          open_region.reset();
        } else {
          throw MalformedDeclare(at_line(line_no) + "expected 'begin' or 'end' after region");
        }
      } else {
        throw MalformedDeclare(at_line(line_no) + "unknown pointerchain construct '" + std::string(body) + "'");
      }
      continue;
    }

    if (is_preprocessor_line(mline)) {
      preprocessor_continuation = ends_with_backslash(mline);
      continue;
    }

    for (const char c : mline) {
      if (c == '{') {
        unit.scopes.push_back({i + 1, line_count + 1, current, unit.scopes[current].depth + 1});
        current = unit.scopes.size() - 1;
      } else if (c == '}' && current != 0) {
        if (open_region && unit.regions[*open_region].scope == current) {
          throw UnbalancedRegion(at_line(i + 1) + "block closes before the region opened at line " +
                                 std::to_string(unit.regions[*open_region].begin_line) + " ends");
        }
        unit.scopes[current].close_line = i + 1;
        current = unit.scopes[current].parent;
      }
    }
  }

  if (open_region) {
    throw UnbalancedRegion(at_line(unit.regions[*open_region].begin_line) + "region begin without a matching region end");
  }
  return unit;
}

std::string to_source(const ParsedUnit& unit) {
  std::string out;
  for (std::size_t i = 0; i < unit.source_lines.size(); ++i) {
    if (i > 0) out += '\n';
    out += unit.source_lines[i];
  }
  if (unit.trailing_newline) out += '\n';
  return out;
}

bool scope_encloses(const ParsedUnit& unit, std::size_t outer, std::size_t inner) {
  while (true) {
    if (inner == outer) return true;
    if (inner == 0) return false;
    inner = unit.scopes[inner].parent;
  }
}

std::vector<const ChainDeclaration*> visible_declarations(const ParsedUnit& unit, std::size_t region_index) {
  const RegionSpan& region = unit.regions.at(region_index);
  std::vector<const ChainDeclaration*> visible;
  const auto add = [&](const ChainDeclaration& decl) {
    std::erase_if(visible, [&](const ChainDeclaration* d) { return d->chain_text == decl.chain_text; });
    visible.push_back(&decl);
  };
  for (const auto& decl : unit.declarations) {
    if (decl.declaration_site < region.begin_line && scope_encloses(unit, decl.scope, region.scope)) add(decl);
  }
  for (const auto& decl : region.inline_declarations) add(decl);
  return visible;
}

std::vector<Diagnostic> validate_unit(const ParsedUnit& unit) {
  std::vector<Diagnostic> out;

  const auto report_duplicates = [&](const std::vector<ChainDeclaration>& decls) {
    std::unordered_map<std::string, std::size_t> first_site;
    for (const auto& d : decls) {
      const std::string key = std::to_string(d.scope) + "|" + d.chain_text;
      const auto [it, inserted] = first_site.emplace(key, d.declaration_site);
      if (!inserted) {
        out.push_back({d.declaration_site, Severity::warning,
                       "duplicate chain '" + d.chain_text + "' (already declared at line " +
                           std::to_string(it->second) + ")"});
      }
    }
  };

  report_duplicates(unit.declarations);
  for (std::size_t r = 0; r < unit.regions.size(); ++r) {
    report_duplicates(unit.regions[r].inline_declarations);
    if (visible_declarations(unit, r).empty()) {
      out.push_back({unit.regions[r].begin_line, Severity::warning, "region transforms nothing"});
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const Diagnostic& a, const Diagnostic& b) { return a.line < b.line; });
  return out;
}

}  // namespace chainforge::directive
