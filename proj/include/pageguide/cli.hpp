#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pageguide/dom_index.hpp"
#include "pageguide/llm_gateway.hpp"

namespace pageguide::cli {

inline constexpr const char* kBaseUrlEnv = "PAGEGUIDE_BASE_URL";
inline constexpr const char* kModelEnv = "PAGEGUIDE_MODEL";
inline constexpr const char* kConfigFileName = "pageguide.toml";

struct Config {
    std::string model = llm::kDefaultModel;
    std::string base_url = llm::kDefaultBaseUrl;
    std::optional<std::string> api_key;  // environment only
    std::optional<std::filesystem::path> replay;
    std::optional<llm::StoreMode> mode;
    int timeout_ms = 60000;
    std::size_t elem_clip = 120;
    double fuzzy_min = 0.8;
    std::size_t max_body = 8u * 1024u * 1024u;

    IndexOptions index_options() const;
    /// Mode after defaults: replay when a transcript is given, else live.
    llm::StoreMode effective_mode() const;
};

/// Config keys: model, base_url, replay, mode, timeout_ms, elem_clip,
/// fuzzy_min, max_body. Precedence per key: flags, then environment, then
/// the first config file that sets it.
struct ConfigSources {
    std::map<std::string, std::string> flags;
    std::function<std::optional<std::string>(const std::string&)> env;
    std::vector<std::filesystem::path> files;
};

/// Throws Error(Usage) for values out of range or unparseable.
Config resolve_config(const ConfigSources& sources);

/// ./pageguide.toml, then $XDG_CONFIG_HOME (or ~/.config)/pageguide/pageguide.toml.
std::vector<std::filesystem::path> default_config_files();

/// Builds the gateway the config describes. Throws Error(Usage) when
/// replay or record mode lacks a transcript path.
std::shared_ptr<llm::Gateway> make_gateway(const Config& config);

/// Entry point. Exit codes: 0 success, 1 domain error, 2 usage error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err, std::istream& in);

}  // namespace pageguide::cli
