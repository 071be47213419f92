#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "chainforge/errors.hpp"

// Parsing of `#pragma pointerchain` declare/region constructs out of
// otherwise opaque C/C++ source text.
namespace chainforge::directive {

enum class Access {
  root,   // the leading variable of the chain
  arrow,  // ->field
  dot,    // .field
};

// One step of a pointer chain. Subscripts written directly after the field
// (`Lnext[q-1]`) belong to that step and are kept as compact token text.
struct ChainSegment {
  Access access = Access::root;
  std::string field;
  std::vector<std::string> subscripts;

  bool operator==(const ChainSegment&) const = default;
};

enum class Qualifier { none, restrict_, restrictconst };

std::string_view qualifier_name(Qualifier q) noexcept;

struct ChainDeclaration {
  std::string chain_text;  // canonical whitespace-free form of the chain
  std::vector<ChainSegment> segments;
  std::string value_type;
  Qualifier qualifier = Qualifier::none;
  std::size_t declaration_site = 0;  // 1-based line of the pragma
  bool is_scalar = false;            // value_type does not end in '*'
  std::size_t scope = 0;             // index into ParsedUnit::scopes
  bool condensed = false;            // declared on a `region begin` line
};

// Renders segments back to chain text; equals chain_text for parsed input.
std::string chain_to_string(const std::vector<ChainSegment>& segments);

// Token texts a chain occupies in source, used for token-level matching.
std::vector<std::string> chain_tokens(const std::vector<ChainSegment>& segments);

// Parses the text of one chain (`a->b.c[i]`) into segments.
// Throws MalformedDeclare when the text is not a chain.
std::vector<ChainSegment> parse_chain(std::string_view text);

struct RegionSpan {
  std::size_t begin_line = 0;  // 1-based line of `region begin`
  std::size_t end_line = 0;    // 1-based line of `region end`
  std::vector<ChainDeclaration> inline_declarations;
  std::size_t scope = 0;
};

// A brace-delimited block. Scope 0 is the whole translation unit.
struct ScopeExtent {
  std::size_t open_line = 0;   // line holding `{`; 0 for the file scope
  std::size_t close_line = 0;  // line holding `}`; one past the end if never closed
  std::size_t parent = 0;
  std::size_t depth = 0;
};

enum class PragmaKind { declare, region_begin, region_end };

// Physical lines occupied by one pointerchain pragma (continuations included).
struct PragmaSite {
  PragmaKind kind;
  std::size_t first_line = 0;
  std::size_t last_line = 0;
  std::size_t index = 0;  // first declaration index (declare) or region index
  std::size_t count = 0;  // declarations introduced by a declare pragma
};

struct ParsedUnit {
  std::vector<std::string> source_lines;
  bool trailing_newline = false;
  std::vector<ChainDeclaration> declarations;  // expanded-form declares
  std::vector<RegionSpan> regions;
  std::vector<ScopeExtent> scopes;
  std::vector<PragmaSite> pragmas;
  std::string masked_text;  // comments and literals blanked, same layout as source
};

// Throws UnbalancedRegion, NestedRegion or MalformedDeclare.
ParsedUnit parse_unit(std::string_view source_text);

// Byte-exact inverse of parse_unit for an untransformed unit.
std::string to_source(const ParsedUnit& unit);

bool scope_encloses(const ParsedUnit& unit, std::size_t outer, std::size_t inner);

// Declarations a region rewrites: expanded declares from enclosing scopes
// that precede it, then its own condensed ones. A later declaration of
// the same chain hides an earlier one.
// The pointers refer into `unit`.
std::vector<const ChainDeclaration*> visible_declarations(const ParsedUnit& unit, std::size_t region_index);

enum class Severity { warning, error };

struct Diagnostic {
  std::size_t line = 0;
  Severity severity = Severity::warning;
  std::string message;
};

std::vector<Diagnostic> validate_unit(const ParsedUnit& unit);

}  // namespace chainforge::directive
