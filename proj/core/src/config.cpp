#include "swg/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace swg {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

std::map<std::string, std::string> parse_config_text(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream ss(text);
    std::string line;
    size_t lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected key=value, got '" + t + "'");
        std::string key = trim(t.substr(0, eq));
        if (key.empty())
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": empty key");
        if (kv.count(key))
            throw std::invalid_argument("config: duplicate key '" + key + "'");
        kv[key] = trim(t.substr(eq + 1));
    }
    return kv;
}

std::map<std::string, std::string> parse_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str());
}

std::string config_to_text(const std::map<std::string, std::string>& kv) {
    std::ostringstream os;
    for (const auto& [k, v] : kv) os << k << '=' << v << '\n';
    return os.str();
}

double config_get_double(const std::map<std::string, std::string>& kv, const std::string& key,
                         double fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    try {
        size_t pos = 0;
        double v = std::stod(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("config: key '" + key + "' has non-numeric value '" +
                                    it->second + "'");
    }
}

size_t config_get_size(const std::map<std::string, std::string>& kv, const std::string& key,
                       size_t fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    try {
        size_t pos = 0;
        long long v = std::stoll(it->second, &pos);
        if (pos != it->second.size() || v < 0) throw std::invalid_argument("bad unsigned");
        return size_t(v);
    } catch (const std::exception&) {
        throw std::invalid_argument("config: key '" + key + "' has non-integer value '" +
                                    it->second + "'");
    }
}

std::string config_get_string(const std::map<std::string, std::string>& kv,
                              const std::string& key, const std::string& fallback) {
    auto it = kv.find(key);
    return it == kv.end() ? fallback : it->second;
}

std::vector<size_t> config_get_size_list(const std::map<std::string, std::string>& kv,
                                         const std::string& key,
                                         const std::vector<size_t>& fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    std::vector<size_t> out;
    std::istringstream ss(it->second);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            size_t pos = 0;
            long long v = std::stoll(tok, &pos);
            if (pos != tok.size() || v < 0) throw std::invalid_argument("bad unsigned");
            out.push_back(size_t(v));
        } catch (const std::exception&) {
            throw std::invalid_argument("config: key '" + key + "' has malformed list value '" +
                                        it->second + "'");
        }
    }
    if (out.empty())
        throw std::invalid_argument("config: key '" + key + "' has an empty list value");
    return out;
}

void config_check_known(const std::map<std::string, std::string>& kv,
                        const std::vector<std::string>& known) {
    for (const auto& [k, v] : kv)
        if (std::find(known.begin(), known.end(), k) == known.end())
            throw std::invalid_argument("config: unknown key '" + k + "'");
}

}  // namespace swg
