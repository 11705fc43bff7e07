#include "config.hpp"

#include <algorithm>

namespace tot::cli {

std::vector<CLI::ConfigItem> FlatConfig::from_config(std::istream& input) const {
  auto items = CLI::ConfigINI::from_config(input);
  const auto running = app_->get_subcommands();
  for (auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;  // section markers
    if (!running.empty() && (item.parents.empty() || item.parents == std::vector<std::string>{"default"})) {
      item.parents = {running.front()->get_name()};
    }
    keys_.insert(item.name);
  }
  return items;
}

std::shared_ptr<FlatConfig> install_config(CLI::App& app) {
  auto reader = std::make_shared<FlatConfig>(&app);
  app.config_formatter(reader);
  app.set_config("--config", "", "Read settings from a `key = value` file (flags take precedence)");
  app.allow_config_extras(false);
  return reader;
}

namespace {

bool on_command_line(const std::vector<std::string>& args, const std::string& name) {
  const std::string flag = "--" + name;
  return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
    return a == flag || a.rfind(flag + "=", 0) == 0;
  });
}

}  // namespace

void print_settings(std::ostream& os, const CLI::App& command, const std::vector<std::string>& args,
                    const FlatConfig& config) {
  os << "settings for " << command.get_name() << " (flag > file > default):\n";
  for (const CLI::Option* opt : command.get_options()) {
    const std::string name = opt->get_single_name();
    if (name == "help" || name.empty()) continue;
    std::string value;
    if (opt->get_expected_max() == 0) {
      value = opt->count() > 0 ? "on" : "off";
    } else if (opt->count() > 0) {
      const auto results = opt->results();
      for (std::size_t i = 0; i < results.size(); ++i) value += (i ? "," : "") + results[i];
    } else {
      value = opt->get_default_str();
    }
    const char* source = on_command_line(args, name) ? "flag" : config.keys().count(name) ? "file" : "default";
    if (value == "{}") value.clear();
    os << "  " << name << " = " << (value.empty() ? "(unset)" : value) << "  [" << source << "]\n";
  }
}

}  // namespace tot::cli
