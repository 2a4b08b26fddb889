#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace kgfair {

inline constexpr const char* kVersion = "1.0.0";

// Flat typed key=value config with [section] headers and # comments.
// Getter errors name the offending key as "section.key".
struct ConfigFile {
    std::map<std::string, std::map<std::string, std::string>> sections;

    static ConfigFile parse_file(const std::string& path);
    static ConfigFile parse_string(const std::string& text,
                                   const std::string& origin = "<string>");

    bool has(const std::string& section, const std::string& key) const;

    std::string get_string(const std::string& section, const std::string& key) const;
    std::string get_string(const std::string& section, const std::string& key,
                           const std::string& fallback) const;
    long get_int(const std::string& section, const std::string& key) const;
    long get_int(const std::string& section, const std::string& key, long fallback) const;
    double get_real(const std::string& section, const std::string& key) const;
    double get_real(const std::string& section, const std::string& key,
                    double fallback) const;
    bool get_bool(const std::string& section, const std::string& key,
                  bool fallback) const;
    uint64_t get_u64(const std::string& section, const std::string& key,
                     uint64_t fallback) const;

    // Every key as "section.key=value", sorted; feeds run manifests.
    std::vector<std::pair<std::string, std::string>> flattened() const;
};

// Run manifest: ordered key=value lines. Checksums are fnv1a-64 of the output
// bytes. wall_clock_s is the only line that varies between identical runs, so
// determinism comparisons drop it.
struct Manifest {
    void set(const std::string& key, const std::string& value);
    void add_checksum(const std::string& relpath, uint64_t checksum);
    void write(const std::string& path, double wall_clock_s) const;

  private:
    std::vector<std::pair<std::string, std::string>> entries_;
    std::vector<std::pair<std::string, std::string>> checksums_;
};

}  // namespace kgfair
