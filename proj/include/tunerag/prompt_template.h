#pragma once

/**
 * @file prompt_template.h
 * @brief `{name}` placeholder substitution for prompt templates.
 */

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>

namespace tunerag {

/// A template could not be loaded or still had unresolved placeholders.
class MissingTemplate : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Replaces every `{identifier}` (lowercase letters, digits, underscores,
/// starting with a letter) in one pass. Substituted values are not rescanned.
/// Throws MissingTemplate naming the first placeholder without a value.
/// Braces that do not form a placeholder, such as "{jig, reel}", are kept.
std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& values);

/// Throws MissingTemplate when the file cannot be read.
std::string load_template(const std::filesystem::path& path);

}  // namespace tunerag
