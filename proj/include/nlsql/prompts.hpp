#pragma once

#include <filesystem>
#include <map>
#include <string>

namespace nlsql {

struct SchemaContext;

/// Prompt templates with {placeholder} fields.
struct PromptTemplates {
  std::string decomposer;
  std::string generator_primary;
  std::string generator_fallback;

  PromptTemplates();

  /// Defaults overridden by `decomposer.txt`, `generator_primary.txt` and
  /// `generator_fallback.txt` found in `dir`.
  static PromptTemplates load(const std::filesystem::path& dir);
};

/// Replaces each `{name}` with values.at(name). Unknown placeholders are kept.
std::string render_template(const std::string& text, const std::map<std::string, std::string>& values);

std::string render_segments(const SchemaContext& context);
std::string render_evidence(const SchemaContext& context, const std::string& hint);

}  // namespace nlsql
