#include "nlsql/prompts.hpp"

#include <fstream>
#include <sstream>

#include "default_prompts.hpp"
#include "nlsql/errors.hpp"
#include "nlsql/schema.hpp"

namespace nlsql {

PromptTemplates::PromptTemplates()
    : decomposer(detail::kDecomposerPrompt),
      generator_primary(detail::kGeneratorPrimaryPrompt),
      generator_fallback(detail::kGeneratorFallbackPrompt) {}

namespace {

void override_from(const std::filesystem::path& file, std::string& slot) {
  if (!std::filesystem::exists(file)) return;
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot read prompt template " + file.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  slot = buf.str();
}

}  // namespace

PromptTemplates PromptTemplates::load(const std::filesystem::path& dir) {
  PromptTemplates t;
  override_from(dir / "decomposer.txt", t.decomposer);
  override_from(dir / "generator_primary.txt", t.generator_primary);
  override_from(dir / "generator_fallback.txt", t.generator_fallback);
  return t;
}

std::string render_template(const std::string& text, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '{') {
      const auto close = text.find('}', i + 1);
      if (close != std::string::npos) {
        auto it = values.find(text.substr(i + 1, close - i - 1));
        if (it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out += text[i++];
  }
  return out;
}

std::string render_segments(const SchemaContext& context) {
  if (context.segments.empty()) return "(none)\n";
  std::ostringstream out;
  for (const auto& s : context.segments) {
    out << "- [" << to_string(s.segment.kind) << "] " << s.segment.text << '\n';
  }
  return out.str();
}

std::string render_evidence(const SchemaContext& context, const std::string& hint) {
  std::ostringstream out;
  for (const auto& e : context.evidence.entries) {
    out << "- \"" << e.nl_term << "\" means " << e.table << '.' << e.column << " = '" << e.db_value << "'\n";
  }
  if (!hint.empty()) out << "- hint: " << hint << '\n';
  if (context.evidence.entries.empty() && hint.empty()) out << "(none)\n";
  return out.str();
}

}  // namespace nlsql
