#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace tvpcli {

// Thrown for malformed or unknown configuration; maps to exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct KeyInfo {
    std::string name;
    std::string default_value;
    std::string help;
};

// Every recognised key with its default. Keys are shared by all subcommands.
const std::vector<KeyInfo>& known_keys();

// Flat key = value settings. Unknown keys are rejected on every path in.
class RunConfig {
public:
    RunConfig();

    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const;
    // Lines of "key = value"; '#' starts a comment; blank lines ignored.
    void load_text(const std::string& text, const std::string& origin);
    void load_file(const std::string& path);

    std::string str(const std::string& key) const;
    long long integer(const std::string& key) const;
    double number(const std::string& key) const;
    bool flag(const std::string& key) const;
    // Comma-separated, whitespace trimmed, empty items dropped.
    std::vector<std::string> list(const std::string& key) const;
    std::vector<long long> integer_list(const std::string& key) const;
    std::vector<double> number_list(const std::string& key) const;

    // Sorted "key = value" lines; load_text of this text restores the same settings.
    std::string resolved_text() const;

private:
    std::map<std::string, std::string> values_;
};

} // namespace tvpcli
