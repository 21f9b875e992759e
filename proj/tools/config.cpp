#include "config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace tvpcli {

namespace {

std::string trim(const std::string& s)
{
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& expected)
{
    throw ConfigError("config field '" + key + "': cannot read '" + value + "' as " + expected);
}

} // namespace

const std::vector<KeyInfo>& known_keys()
{
    static const std::vector<KeyInfo> keys = {
        {"bands_level", "", "credible band level in (0, 1); empty for none"},
        {"csv", "", "simulate: results CSV path (default <output_dir>/simulation.csv)"},
        {"cv_seed", "12345", "fold assignment seed"},
        {"design", "S1", "simulate: comma list of S1..S4"},
        {"estimator", "2srr", "estimate: ridge, 2srr, glrr, grrrr or mv-grrrr"},
        {"estimators", "2srr", "simulate/bench: comma list of ridge, 2srr, glrr, grrrr"},
        {"factors", "0", "forecast: principal-component factors of the predictor panel"},
        {"folds", "5", "cross-validation folds"},
        {"grid_decades", "6", "width of the lambda grid in decades"},
        {"grid_points", "60", "points on the lambda grid"},
        {"half_and_half", "false", "forecast: add equal-weight TVP/constant averages"},
        {"horizons", "1", "forecast: comma list of horizons"},
        {"input", "", "input CSV path"},
        {"K", "6", "simulate: comma list of regressor counts"},
        {"K_list", "6", "bench: comma list of regressor counts"},
        {"lags", "2", "forecast: lags of the transformed target"},
        {"law", "rw", "law of motion: rw, rw-drift, local-level, ar:<phi>"},
        {"max_rank", "5", "grrrr: factor rank cap"},
        {"min_train", "30", "forecast: minimum training rows at the first origin"},
        {"mix_alpha", "0.5", "glrr: weight on the first-stage scale"},
        {"models", "2srr", "forecast: comma list of estimators"},
        {"noise", "low", "simulate: comma list of low, medium, high, sv-low-med, sv-low-high"},
        {"oos_start", "", "forecast: first origin row (default: half the sample)"},
        {"output_dir", ".", "output directory"},
        {"panel_transforms", "difflog", "forecast: one code per predictor or a single code for all"},
        {"regressors", "", "estimate: comma list of regressor columns (default: all but the target)"},
        {"replications", "50", "simulate: replications per setup"},
        {"retune", "true", "forecast: cross-validate at every origin"},
        {"runs", "3", "bench: fits averaged per cell"},
        {"seed", "1", "simulation seed"},
        {"selection_threshold", "1e-6", "glrr: drift scale below which a coefficient is constant"},
        {"share", "0.2", "simulate: comma list of time-varying shares"},
        {"T", "300", "simulate: comma list of sample sizes"},
        {"T_list", "300", "bench: comma list of sample sizes"},
        {"target", "", "estimate/forecast: target column(s), comma list"},
        {"threads", "", "worker threads (default: TVPRIDGE_THREADS, else all cores)"},
        {"transforms", "difflog", "forecast: one code per target or a single code for all"},
        {"variance_threshold", "0.9", "grrrr: cumulative variance share for the rank"},
        {"volatility", "true", "GARCH residual variance in the second stage"},
    };
    return keys;
}

RunConfig::RunConfig()
{
    for (const auto& k : known_keys()) values_[k.name] = k.default_value;
}

void RunConfig::set(const std::string& key, const std::string& value)
{
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second = trim(value);
}

bool RunConfig::has(const std::string& key) const
{
    return !str(key).empty();
}

void RunConfig::load_text(const std::string& text, const std::string& origin)
{
    std::istringstream is(text);
    std::string line;
    std::size_t n = 0;
    while (std::getline(is, line)) {
        ++n;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ": line " + std::to_string(n) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        try {
            set(key, line.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError(origin + ": line " + std::to_string(n) + ": " + e.what());
        }
    }
}

void RunConfig::load_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    load_text(ss.str(), path);
}

std::string RunConfig::str(const std::string& key) const
{
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    return it->second;
}

long long RunConfig::integer(const std::string& key) const
{
    const std::string v = str(key);
    long long out = 0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || r.ec != std::errc() || r.ptr != v.data() + v.size()) bad_value(key, v, "an integer");
    return out;
}

double RunConfig::number(const std::string& key) const
{
    const std::string v = str(key);
    double out = 0.0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || r.ec != std::errc() || r.ptr != v.data() + v.size()) bad_value(key, v, "a number");
    return out;
}

bool RunConfig::flag(const std::string& key) const
{
    const std::string v = str(key);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    bad_value(key, v, "a boolean");
}

std::vector<std::string> RunConfig::list(const std::string& key) const
{
    std::vector<std::string> out;
    std::istringstream is(str(key));
    std::string item;
    while (std::getline(is, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::vector<long long> RunConfig::integer_list(const std::string& key) const
{
    std::vector<long long> out;
    for (const auto& s : list(key)) {
        long long v = 0;
        const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
        if (r.ec != std::errc() || r.ptr != s.data() + s.size()) bad_value(key, s, "an integer");
        out.push_back(v);
    }
    return out;
}

std::vector<double> RunConfig::number_list(const std::string& key) const
{
    std::vector<double> out;
    for (const auto& s : list(key)) {
        double v = 0;
        const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
        if (r.ec != std::errc() || r.ptr != s.data() + s.size()) bad_value(key, s, "a number");
        out.push_back(v);
    }
    return out;
}

std::string RunConfig::resolved_text() const
{
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
}

} // namespace tvpcli
