#pragma once

#include <map>
#include <string>
#include <vector>

namespace swg {

// Flat key=value config text: one pair per line, '#' comments, blank lines
// ignored. Values keep everything after the first '='.
std::map<std::string, std::string> parse_config_text(const std::string& text);
std::map<std::string, std::string> parse_config_file(const std::string& path);
std::string config_to_text(const std::map<std::string, std::string>& kv);

// Typed accessors; missing keys fall back to the default, malformed values
// throw with the key name.
double config_get_double(const std::map<std::string, std::string>& kv, const std::string& key,
                         double fallback);
size_t config_get_size(const std::map<std::string, std::string>& kv, const std::string& key,
                       size_t fallback);
std::string config_get_string(const std::map<std::string, std::string>& kv,
                              const std::string& key, const std::string& fallback);
// Comma-separated list of unsigned integers.
std::vector<size_t> config_get_size_list(const std::map<std::string, std::string>& kv,
                                         const std::string& key,
                                         const std::vector<size_t>& fallback);

// Rejects any key not in `known` with a message naming the offender.
void config_check_known(const std::map<std::string, std::string>& kv,
                        const std::vector<std::string>& known);

}  // namespace swg
