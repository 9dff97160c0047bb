#pragma once

#include <atomic>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "sketchfuzz/campaign/campaign.hpp"

namespace sketchfuzz {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFindings = 1;
inline constexpr int kExitConfig = 2;

// One configurable key. Flags are --<name>, environment variables
// SKETCHFUZZ_<NAME> with '-' as '_', config file lines <name>=<value>.
struct OptionSpec {
  std::string name;
  std::string default_value;
  std::string help;
  bool is_flag = false;  // boolean, also accepts --no-<name>
};

const std::vector<OptionSpec>& option_specs();

// Merged key -> value. Precedence: flags > environment > config file >
// defaults. Unknown keys throw Error.
using Settings = std::map<std::string, std::string>;

Settings default_settings();
// Parses "key=value" lines; '#' starts a comment.
Settings parse_config_file(std::string_view text);
// Picks SKETCHFUZZ_* variables out of environ-style "NAME=value" entries.
Settings settings_from_environment(const std::vector<std::string>& environ_entries);
void merge_settings(Settings& into, const Settings& from, std::string_view origin);

// Typed view of the merged settings; throws Error on bad values.
struct RunOptions {
  CampaignConfig campaign;
  std::string backend = "null";
  std::filesystem::path fragments;
  std::filesystem::path llm_transcript;
  bool verbose = false;
};
RunOptions resolve(const Settings& s, bool learn_default);

// Entry point of the sketchfuzz binary. `interrupt` is raised by signal
// handlers; `environ_entries` are the process environment.
int run_cli(const std::vector<std::string>& args,
            const std::vector<std::string>& environ_entries, std::ostream& out,
            std::ostream& err, const std::atomic<bool>* interrupt = nullptr);

} // namespace sketchfuzz
