#pragma once

#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

namespace tot::cli {

// INI reader for flat `key = value` files: keys outside a section are handed
// to the subcommand being run, so one file can drive `train` or `segment`.
class FlatConfig : public CLI::ConfigINI {
 public:
  explicit FlatConfig(const CLI::App* app) : app_(app) {}
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override;
  const std::set<std::string>& keys() const { return keys_; }

 private:
  const CLI::App* app_;
  mutable std::set<std::string> keys_;
};

// Adds --config to `app` and returns the reader so the caller can report
// where each setting came from.
std::shared_ptr<FlatConfig> install_config(CLI::App& app);

// One line per option of `command`: name, value, and whether it came from a
// flag, the config file or the built-in default.
void print_settings(std::ostream& os, const CLI::App& command, const std::vector<std::string>& args,
                    const FlatConfig& config);

}  // namespace tot::cli
