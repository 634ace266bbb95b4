#include "rdlab/config.hpp"

#include <fstream>
#include <sstream>

#include "rdlab/errors.hpp"

namespace rdlab {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

Config parse_config(const std::string& text) {
    Config cfg;
    cfg.raw_text = text;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("unterminated section header", lineno);
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) throw ConfigError("empty section name", lineno);
            cfg.sections[section];
            continue;
        }
        std::size_t eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("expected key=value", lineno);
        if (section.empty()) throw ConfigError("key outside any section", lineno);
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("empty key", lineno);
        cfg.sections[section][key] = val;
    }
    return cfg;
}

Config load_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

bool Config::has(const std::string& s, const std::string& k) const {
    auto it = sections.find(s);
    return it != sections.end() && it->second.count(k) > 0;
}

std::string Config::get(const std::string& s, const std::string& k) const {
    auto it = sections.find(s);
    if (it == sections.end()) throw ConfigError("missing section [" + s + "]");
    auto jt = it->second.find(k);
    if (jt == it->second.end()) throw ConfigError("missing key '" + k + "' in [" + s + "]");
    return jt->second;
}

std::string Config::get_or(const std::string& s, const std::string& k,
                           const std::string& def) const {
    return has(s, k) ? get(s, k) : def;
}

double Config::get_double(const std::string& s, const std::string& k) const {
    try {
        return std::stod(get(s, k));
    } catch (const std::invalid_argument&) {
        throw ConfigError("key '" + k + "' in [" + s + "] is not a number");
    }
}

double Config::get_double_or(const std::string& s, const std::string& k, double def) const {
    return has(s, k) ? get_double(s, k) : def;
}

long Config::get_long(const std::string& s, const std::string& k) const {
    try {
        return std::stol(get(s, k));
    } catch (const std::invalid_argument&) {
        throw ConfigError("key '" + k + "' in [" + s + "] is not an integer");
    }
}

long Config::get_long_or(const std::string& s, const std::string& k, long def) const {
    return has(s, k) ? get_long(s, k) : def;
}

std::uint64_t Config::get_seed(const std::string& s, const std::string& k) const {
    try {
        return std::stoull(get(s, k));
    } catch (const std::invalid_argument&) {
        throw ConfigError("seed '" + k + "' in [" + s + "] is not an unsigned integer");
    }
}

std::vector<double> Config::get_doubles(const std::string& s, const std::string& k) const {
    std::istringstream in(get(s, k));
    std::vector<double> out;
    std::string tok;
    while (in >> tok) {
        try {
            out.push_back(std::stod(tok));
        } catch (const std::invalid_argument&) {
            throw ConfigError("non-numeric entry in '" + k + "' of [" + s + "]");
        }
    }
    if (out.empty()) throw ConfigError("empty list in '" + k + "' of [" + s + "]");
    return out;
}

std::vector<long> Config::get_longs(const std::string& s, const std::string& k) const {
    std::vector<long> out;
    for (double v : get_doubles(s, k)) out.push_back(long(v));
    return out;
}

std::vector<std::string> Config::get_words(const std::string& s, const std::string& k) const {
    std::istringstream in(get(s, k));
    std::vector<std::string> out;
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

std::vector<std::vector<double>> Config::get_matrix(const std::string& s,
                                                    const std::string& k) const {
    std::string text = get(s, k);
    std::vector<std::vector<double>> rows;
    std::string row;
    std::istringstream in(text);
    while (std::getline(in, row, ';')) {
        std::istringstream rin(row);
        std::vector<double> r;
        double v;
        while (rin >> v) r.push_back(v);
        if (!r.empty()) rows.push_back(r);
    }
    if (rows.empty()) throw ConfigError("empty matrix in '" + k + "' of [" + s + "]");
    return rows;
}

}  // namespace rdlab
