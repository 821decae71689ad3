#pragma once

#include <map>
#include <string>
#include <vector>

namespace sage {

/// Runs one subcommand of the `sage` tool. `args` excludes the program
/// name. Returns the process exit code: 0 on success, 1 when a pipeline
/// stage fails, 2 on usage errors. Failures print a single JSON line of
/// the form {"error": "<code>", "message": "..."} to stderr.
int dispatch(const std::vector<std::string>& args);

/// Reads the key/value config format accepted by --config: `[section]`
/// headers, `key = value` pairs, `#` comments, optional double quotes
/// around values. Returns a flat map keyed as "section.key" (bare "key"
/// before any section header). Malformed lines raise ConfigError.
std::map<std::string, std::string> parse_config_file(const std::string& text);

}  // namespace sage
