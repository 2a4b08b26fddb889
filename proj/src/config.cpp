#include "kgfair/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "kgfair/core.hpp"

namespace kgfair {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

[[noreturn]] void bad_key(const std::string& section, const std::string& key,
                          const std::string& what) {
    throw std::invalid_argument("config: " + what + " " +
                                (section.empty() ? key : section + "." + key));
}

}  // namespace

ConfigFile ConfigFile::parse_string(const std::string& text, const std::string& origin) {
    ConfigFile cfg;
    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw std::invalid_argument(origin + ":" + std::to_string(line_no) +
                                            ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            cfg.sections[section];
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(origin + ":" + std::to_string(line_no) +
                                        ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw std::invalid_argument(origin + ":" + std::to_string(line_no) +
                                        ": empty key");
        cfg.sections[section][key] = value;  // last one wins
    }
    return cfg;
}

ConfigFile ConfigFile::parse_file(const std::string& path) {
    return parse_string(read_text_file(path), path);
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
    const auto s = sections.find(section);
    return s != sections.end() && s->second.count(key) > 0;
}

std::string ConfigFile::get_string(const std::string& section,
                                   const std::string& key) const {
    const auto s = sections.find(section);
    if (s == sections.end() || !s->second.count(key))
        bad_key(section, key, "missing required key");
    return s->second.at(key);
}

std::string ConfigFile::get_string(const std::string& section, const std::string& key,
                                   const std::string& fallback) const {
    return has(section, key) ? get_string(section, key) : fallback;
}

long ConfigFile::get_int(const std::string& section, const std::string& key) const {
    const std::string v = get_string(section, key);
    errno = 0;
    char* end = nullptr;
    const long out = std::strtol(v.c_str(), &end, 10);
    if (errno != 0 || end == v.c_str() || *end != '\0')
        bad_key(section, key, "bad integer '" + v + "' for");
    return out;
}

long ConfigFile::get_int(const std::string& section, const std::string& key,
                         long fallback) const {
    return has(section, key) ? get_int(section, key) : fallback;
}

double ConfigFile::get_real(const std::string& section, const std::string& key) const {
    const std::string v = get_string(section, key);
    errno = 0;
    char* end = nullptr;
    const double out = std::strtod(v.c_str(), &end);
    if (errno != 0 || end == v.c_str() || *end != '\0')
        bad_key(section, key, "bad real '" + v + "' for");
    return out;
}

double ConfigFile::get_real(const std::string& section, const std::string& key,
                            double fallback) const {
    return has(section, key) ? get_real(section, key) : fallback;
}

bool ConfigFile::get_bool(const std::string& section, const std::string& key,
                          bool fallback) const {
    if (!has(section, key)) return fallback;
    const std::string v = get_string(section, key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    bad_key(section, key, "bad boolean '" + v + "' for");
}

uint64_t ConfigFile::get_u64(const std::string& section, const std::string& key,
                             uint64_t fallback) const {
    if (!has(section, key)) return fallback;
    const std::string v = get_string(section, key);
    errno = 0;
    char* end = nullptr;
    const unsigned long long out = std::strtoull(v.c_str(), &end, 10);
    if (errno != 0 || end == v.c_str() || *end != '\0' || v.front() == '-')
        bad_key(section, key, "bad unsigned integer '" + v + "' for");
    return static_cast<uint64_t>(out);
}

std::vector<std::pair<std::string, std::string>> ConfigFile::flattened() const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& [section, kv] : sections)
        for (const auto& [key, value] : kv)
            out.emplace_back(section.empty() ? key : section + "." + key, value);
    std::sort(out.begin(), out.end());
    return out;
}

void Manifest::set(const std::string& key, const std::string& value) {
    entries_.emplace_back(key, value);
}

void Manifest::add_checksum(const std::string& relpath, uint64_t checksum) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(checksum));
    checksums_.emplace_back(relpath, buf);
}

void Manifest::write(const std::string& path, double wall_clock_s) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    for (const auto& [k, v] : entries_) out << k << "=" << v << "\n";
    auto sorted = checksums_;
    std::sort(sorted.begin(), sorted.end());
    for (const auto& [rel, sum] : sorted) out << "checksum." << rel << "=" << sum << "\n";
    out << "wall_clock_s=" << format_g17(wall_clock_s) << "\n";
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace kgfair
