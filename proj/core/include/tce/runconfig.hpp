#pragma once

#include <map>
#include <string>

namespace tce {

inline constexpr const char* kToolVersion = "0.1.0";

/// Flat `key = value` UTF-8 config file. Keys are unordered in the file;
/// serialization is sorted so reruns diff cleanly.
class KeyValueFile {
public:
    KeyValueFile() = default;
    static KeyValueFile parse_file(const std::string& path);
    static KeyValueFile parse_text(const std::string& text, const std::string& origin = "<text>");

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    const std::string& get(const std::string& key) const;
    std::string get_or(const std::string& key, const std::string& fallback) const;
    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    const std::map<std::string, std::string>& values() const { return values_; }
    std::string serialize() const;
    void write_file(const std::string& path) const;

private:
    std::map<std::string, std::string> values_;
};

/// Resolved run description, written to the output directory before any
/// computation. The manifest is itself a valid config file, so a run can
/// be reproduced with `--config <outdir>/manifest.txt`.
struct RunManifest {
    std::string config_path;  // "" when no config file was given
    KeyValueFile resolved;
    std::uint64_t seed = 0;
    std::string output_dir;

    void write(const std::string& path) const;
};

}  // namespace tce
