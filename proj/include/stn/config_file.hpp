#ifndef STN_CONFIG_FILE_HPP
#define STN_CONFIG_FILE_HPP

#include <string>

#include "stn/model.hpp"

namespace stn {

// Line-oriented `key = value` model description. Integer lists are
// comma-separated. Keys: input_h, input_w, input_c, T, l, n, r, b, d, k.
// Blank lines and `#` comments are ignored.
ModelConfig parse_model_config(const std::string& text);
ModelConfig load_model_config(const std::string& path);

std::string format_model_config(const ModelConfig& config);
void save_model_config(const ModelConfig& config, const std::string& path);

} // namespace stn

#endif
