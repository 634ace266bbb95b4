#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace rdlab {

// key=value sections: [section] headers, '#' comments, values as free text
struct Config {
    std::map<std::string, std::map<std::string, std::string>> sections;
    std::string raw_text;

    bool has_section(const std::string& s) const { return sections.count(s) > 0; }
    bool has(const std::string& s, const std::string& k) const;
    std::string get(const std::string& s, const std::string& k) const;  // ConfigError if absent
    std::string get_or(const std::string& s, const std::string& k,
                       const std::string& def) const;
    double get_double(const std::string& s, const std::string& k) const;
    double get_double_or(const std::string& s, const std::string& k, double def) const;
    long get_long(const std::string& s, const std::string& k) const;
    long get_long_or(const std::string& s, const std::string& k, long def) const;
    std::uint64_t get_seed(const std::string& s, const std::string& k) const;
    std::vector<double> get_doubles(const std::string& s, const std::string& k) const;
    std::vector<long> get_longs(const std::string& s, const std::string& k) const;
    std::vector<std::string> get_words(const std::string& s, const std::string& k) const;
    // rows separated by ';', entries by spaces
    std::vector<std::vector<double>> get_matrix(const std::string& s,
                                                const std::string& k) const;
};

Config parse_config(const std::string& text);
Config load_config_file(const std::string& path);

}  // namespace rdlab
