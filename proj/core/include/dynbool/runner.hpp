#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dynbool {

enum class FieldType { Real, Integer, Seed, Text, Flag, RealList };

struct FieldSpec {
  std::string name;
  FieldType type = FieldType::Real;
  std::string fallback;  // default value text; empty means unset
  std::string help;
};

/// Subcommand names, in documentation order.
const std::vector<std::string>& lab_names();

/// Keys accepted by `lab`, the common keys (seed, threads, alpha, d) first.
/// Throws SchemaError("lab", ...) for an unknown lab.
const std::vector<FieldSpec>& lab_schema(std::string_view lab);

/// Flat key-value configuration: "section.key" -> value text. Keys outside any
/// section land in "common".
using KeyValues = std::map<std::string, std::string>;

/// Parses INI text with sections [common] and one per lab.
KeyValues parse_config_text(const std::string& text);
KeyValues read_config_file(const std::filesystem::path& path);

/// Every schema field of one lab with its final value: command-line override,
/// then the [lab] section, then [common], then the documented default. The
/// default thread count comes from DYNBOOL_THREADS when set.
class ResolvedConfig {
 public:
  ResolvedConfig(std::string lab, std::map<std::string, std::string> values);

  const std::string& lab() const { return lab_; }
  const std::map<std::string, std::string>& values() const { return values_; }

  bool has(const std::string& key) const;
  const std::string& text(const std::string& key) const;
  double real(const std::string& key) const;
  std::int64_t integer(const std::string& key) const;
  std::uint64_t seed() const;
  unsigned threads() const;
  bool flag(const std::string& key) const;
  std::vector<double> reals(const std::string& key) const;

 private:
  std::string lab_;
  std::map<std::string, std::string> values_;
};

/// Throws SchemaError naming "lab.key" (or "section.key" for file entries)
/// on unknown keys, unknown sections and values of the wrong type.
ResolvedConfig resolve_config(std::string_view lab, const KeyValues& file,
                              const std::map<std::string, std::string>& overrides);

/// 16 hex digits over the sorted key=value lines, thread count excluded.
std::string config_hash(const ResolvedConfig& config);

struct RunOutcome {
  int exit_code = 0;  // 0 ok, 2 schema or domain violation, 3 numeric failure
  std::vector<std::filesystem::path> files;
  std::string message;
};

/// Runs one lab and writes manifest.json plus its CSV tables into out_dir.
/// Errors are reported through the exit code and message, never thrown.
RunOutcome run(std::string_view lab, const std::optional<std::filesystem::path>& config_path,
               const std::map<std::string, std::string>& overrides,
               const std::filesystem::path& out_dir, std::ostream& log);

std::string tool_version();

}  // namespace dynbool
