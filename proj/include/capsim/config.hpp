#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace capsim {

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Flat key=value file: one pair per line, `#` or `;` comments, optional quotes
// around values, later keys override earlier ones.
std::map<std::string, std::string> parse_key_value(std::istream& in);
std::map<std::string, std::string> parse_key_value_file(const std::string& path);

std::int64_t config_int(const std::map<std::string, std::string>& kv, const std::string& key,
                        std::int64_t fallback);
bool config_bool(const std::map<std::string, std::string>& kv, const std::string& key, bool fallback);
std::string config_string(const std::map<std::string, std::string>& kv, const std::string& key,
                          const std::string& fallback);
std::vector<std::string> split_list(const std::string& value);

}  // namespace capsim
