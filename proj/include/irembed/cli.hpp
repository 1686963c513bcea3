// SPDX-License-Identifier: Apache-2.0
//
// The `irembed` command line: subcommands over the whole pipeline, with a
// layered configuration (defaults, config file, --set, explicit flags).
#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace irembed::cli {

/// Every tunable, grouped by section. Dotted keys address leaves.
nlohmann::json default_config();

/// Sets a leaf from its text form. The value must fit the leaf's type;
/// unknown keys and whole sections are rejected.
void set_config_value(nlohmann::json& config, std::string_view dotted_key, std::string_view text);

/// key = value lines with [section] headers or dotted keys; `#` comments.
void apply_config_file(nlohmann::json& config, const std::filesystem::path& file);

/// Exit codes: 0 success, 1 module error or per-item failures, 2 usage
/// error or an input path that does not exist.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace irembed::cli
