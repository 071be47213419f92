#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "chainforge/directive.hpp"

namespace chainforge::transform {

struct RegionEntry {
  directive::ChainDeclaration declaration;
  std::string local_name;
  std::string binding_line;
  std::optional<std::string> writeback_line;  // scalar chains only
};

struct RegionRewrite {
  std::size_t region_index = 0;
  std::vector<RegionEntry> entries;            // declaration order
  std::map<std::string, std::string> replacements;  // chain_text -> local_name
};

// A generated local binding and the pragma line it replaces.
struct Binding {
  directive::ChainDeclaration declaration;
  std::string local_name;
  std::string text;
  std::size_t anchor_line = 0;
};

struct RewritePlan {
  std::vector<Binding> bindings;
  std::vector<RegionRewrite> regions;
};

// Local names are `pc_<ordinal>` in declaration order; a name already used
// as an identifier in the unit gets a `_<n>` suffix. Throws NameCollision
// when no free suffix is found.
RewritePlan plan_rewrites(const directive::ParsedUnit& unit);

struct Transformed {
  std::string text;
  std::size_t replacements = 0;
};

Transformed transform_unit(const directive::ParsedUnit& unit, const RewritePlan& plan);

// Convenience: parse, plan and transform one source text.
Transformed transform_source(std::string_view source);

// Spelling of the binding for one declaration, without indentation.
std::string binding_statement(const directive::ChainDeclaration& decl, const std::string& local_name);

struct TransformOptions {
  bool in_place = false;
  std::string suffix = ".pc.cpp";
};

struct FileReport {
  std::filesystem::path path;
  std::filesystem::path output;
  std::size_t declarations = 0;  // expanded + condensed
  std::size_t regions = 0;
  std::size_t replacements = 0;
  bool ok = true;
  std::string error;
};

// Expands directories to their .c/.cpp/.h/.hpp files (non-recursive, sorted,
// skipping previous outputs) and transforms each file. A failing file is
// reported and the batch continues.
std::vector<FileReport> transform_files(const std::vector<std::filesystem::path>& paths,
                                        const TransformOptions& options = {});

}  // namespace chainforge::transform
