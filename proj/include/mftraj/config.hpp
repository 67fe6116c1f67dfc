#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mftraj {

/// Ordered flat `key = value` text. Lines starting with `#` (after optional
/// whitespace) and blank lines are ignored; a `#` after a value starts a
/// trailing comment. Later assignments of a key replace earlier ones.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& in, std::string_view source = "<config>");
  static KeyValueConfig load(const std::filesystem::path& path);

  void set(std::string key, std::string value);
  std::optional<std::string> get(std::string_view key) const;
  bool contains(std::string_view key) const { return get(key).has_value(); }

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  /// One `key = value` line per entry, in insertion order.
  std::string to_text() const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

/// Strict scalar conversions; each throws ConfigError naming the key.
double parse_double(std::string_view key, std::string_view text);
long long parse_integer(std::string_view key, std::string_view text);
bool parse_bool(std::string_view key, std::string_view text);

/// Shortest decimal text that reads back to exactly the same double.
std::string format_double(double value);

}  // namespace mftraj
