#ifndef PNEN_CONFIG_HPP_
#define PNEN_CONFIG_HPP_

#include <string>
#include <vector>

#include "pnen/train.hpp"

namespace pnen {

// Full run configuration behind the CLI. Serialized as a flat key=value text
// file, one pair per line, '#' comments allowed. Unknown keys are rejected;
// missing keys take the documented defaults.
struct RunConfig {
    std::string dtype = "f32";  // f32 for training runs, f64 for verification
    TrainConfig train;

    void validate() const;
};

struct ConfigKey {
    std::string name;
    std::string default_value;
    std::string description;
};

// The schema drives parsing, CLI overrides, and help output alike.
const std::vector<ConfigKey>& config_schema();

RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);

// Applies one key=value pair; throws ConfigError on unknown keys/bad values.
void apply_config_pair(RunConfig& cfg, const std::string& key, const std::string& value);

std::string config_help();
std::string render_config(const RunConfig& cfg);

}  // namespace pnen

#endif  // PNEN_CONFIG_HPP_
