#ifndef AGESIR_CONFIG_HPP
#define AGESIR_CONFIG_HPP

#include <cctype>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace agesir {

/** Scenario configuration. Defaults mirror the reference parameter table:
 *  L = 1, T = 20, dt = 0.001, da = 0.01. */
struct ScenarioConfig {
    // model
    std::string model = "pide";               // pide | ode
    std::string variant = "normalized";       // raw | normalized | homogeneous
    // rates
    std::string profile = "okuwa-like";       // or "tabulated"
    double beta0 = 600.0;
    std::vector<double> mu_table, beta_table, gamma_table; // tabulated option
    // grid / scheme
    double L = 1.0;
    double da = 0.01;
    double dt = 0.001;
    double T = 20.0;
    // ODE reduction
    int n_classes = 100;
    double rel_tol = 1e-8;
    double conv_tol = 1e-6;   // early-exit when sup|dx/dt| falls below this
    // controller
    std::string controller = "none";          // none | ode-feedback | pide-feedback
    double r1 = 200.0, r2 = 80.0;
    double delta = 1e-6;
    std::string gain_source = "positive-design";
    // output
    std::string output_dir = "out";
    unsigned long long seed = 0;

    int grid_nodes() const { return static_cast<int>(L / da + 0.5); }
};

namespace toml {

/** Minimal TOML-subset reader: [section] headers, key = value lines with
 *  strings, numbers, booleans and flat numeric arrays, # comments. Enough
 *  for the scenario schema; not a general TOML implementation. */
using Value = std::variant<std::string, double, bool, std::vector<double>>;

struct ParseError : std::runtime_error {
    ParseError(const std::string& msg, int line)
        : std::runtime_error("config parse error at line " + std::to_string(line) + ": " + msg) {}
};

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline Value parse_value(std::string raw, int line_no) {
    raw = trim(raw);
    if (raw.empty()) throw ParseError("missing value", line_no);
    if (raw.front() == '"') {
        if (raw.size() < 2 || raw.back() != '"') throw ParseError("unterminated string", line_no);
        return raw.substr(1, raw.size() - 2);
    }
    if (raw == "true") return true;
    if (raw == "false") return false;
    if (raw.front() == '[') {
        if (raw.back() != ']') throw ParseError("unterminated array", line_no);
        std::vector<double> arr;
        std::stringstream ss(raw.substr(1, raw.size() - 2));
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (item.empty()) continue;
            try {
                std::size_t used;
                arr.push_back(std::stod(item, &used));
                if (used != item.size()) throw std::invalid_argument("");
            } catch (...) {
                throw ParseError("bad array element '" + item + "'", line_no);
            }
        }
        return arr;
    }
    try {
        std::size_t used;
        double v = std::stod(raw, &used);
        if (used != raw.size()) throw std::invalid_argument("");
        return v;
    } catch (...) {
        throw ParseError("unrecognized value '" + raw + "'", line_no);
    }
}

inline std::map<std::string, Value> parse(std::istream& in) {
    std::map<std::string, Value> kv;
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ParseError("unterminated section header", line_no);
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        std::size_t eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("expected key = value", line_no);
        std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ParseError("empty key", line_no);
        std::string full = section.empty() ? key : section + "." + key;
        kv[full] = parse_value(line.substr(eq + 1), line_no);
    }
    return kv;
}

} // namespace toml

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

template <class T>
std::optional<T> get(const std::map<std::string, toml::Value>& kv, const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    if (const T* p = std::get_if<T>(&it->second)) return *p;
    throw ConfigError("config key '" + key + "' has the wrong type");
}

} // namespace detail

/** Load and validate a scenario config; reports the violated invariant by name. */
inline ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    auto kv = toml::parse(in);
    ScenarioConfig c;
    using detail::get;

    if (auto v = get<std::string>(kv, "model.kind")) c.model = *v;
    if (auto v = get<std::string>(kv, "model.variant")) c.variant = *v;
    if (auto v = get<std::string>(kv, "rates.profile")) c.profile = *v;
    if (auto v = get<double>(kv, "rates.beta0")) c.beta0 = *v;
    if (auto v = get<std::vector<double>>(kv, "rates.mu")) c.mu_table = *v;
    if (auto v = get<std::vector<double>>(kv, "rates.beta")) c.beta_table = *v;
    if (auto v = get<std::vector<double>>(kv, "rates.gamma")) c.gamma_table = *v;
    if (auto v = get<double>(kv, "grid.L")) c.L = *v;
    if (auto v = get<double>(kv, "grid.da")) c.da = *v;
    if (auto v = get<double>(kv, "scheme.dt")) c.dt = *v;
    if (auto v = get<double>(kv, "scheme.T")) c.T = *v;
    if (auto v = get<double>(kv, "ode.n_classes")) c.n_classes = static_cast<int>(*v);
    if (auto v = get<double>(kv, "ode.rel_tol")) c.rel_tol = *v;
    if (auto v = get<double>(kv, "ode.conv_tol")) c.conv_tol = *v;
    if (auto v = get<std::string>(kv, "controller.kind")) c.controller = *v;
    if (auto v = get<double>(kv, "controller.r1")) c.r1 = *v;
    if (auto v = get<double>(kv, "controller.r2")) c.r2 = *v;
    if (auto v = get<double>(kv, "controller.delta")) c.delta = *v;
    if (auto v = get<std::string>(kv, "controller.gain_source")) c.gain_source = *v;
    if (auto v = get<std::string>(kv, "output.dir")) c.output_dir = *v;
    if (auto v = get<double>(kv, "output.seed")) c.seed = static_cast<unsigned long long>(*v);

    // validation
    if (c.model != "pide" && c.model != "ode")
        throw ConfigError("model.kind must be 'pide' or 'ode'");
    if (c.variant != "raw" && c.variant != "normalized" && c.variant != "homogeneous")
        throw ConfigError("model.variant must be raw|normalized|homogeneous");
    if (!(c.L > 0.0) || !(c.da > 0.0) || !(c.dt > 0.0) || !(c.T > 0.0))
        throw ConfigError("grid/scheme values must be positive");
    if (c.model == "pide" && c.dt / c.da > 1.0 + 1e-15)
        throw ConfigError("CFL violated: dt/da must be <= 1 for PIDE runs");
    if (c.controller != "none" && !(c.delta > 0.0 && c.delta < 1.0))
        throw ConfigError("controller.delta must lie in (0,1)");
    if (c.controller != "none" && c.controller != "ode-feedback" && c.controller != "pide-feedback")
        throw ConfigError("controller.kind must be none|ode-feedback|pide-feedback");
    if (c.n_classes < 1) throw ConfigError("ode.n_classes must be >= 1");
    return c;
}

} // namespace agesir

#endif
