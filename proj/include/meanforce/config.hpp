// config.hpp: Run configuration, its file format and command-line overrides.
//
// The file is TOML-style: optional top-level keys, then [section] blocks of
// `key = value` lines. '#' and ';' start comments. Arrays are written as
// [a, b, c]. Keys are matched with '-' and '_' treated alike, so
// `n-max` and `n_max` name the same field.

#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "meanforce/bath.hpp"
#include "meanforce/errors.hpp"
#include "meanforce/system_model.hpp"

namespace meanforce {

struct RunConfig {
    struct System {
        std::vector<double> energies{0.0, 0.35, 0.90, 1.70, 2.30};
        int coupled_level = 4;
    } system;
    struct Bath {
        double g = 1.0;
        double omega_c = 1.0;
        int modes = 200;             // K
        double omega_max = 8.0;
        bool cutoff_interval = false; // discretize on (0, omega_c] instead of (0, omega_max]
    } bath;
    struct Grid {
        double beta = 2.0;
        int slices = 128; // N
    } grid;
    struct Mc {
        std::int64_t samples = 100000;
        std::uint64_t seed = 1;
        bool antithetic = true;
    } mc;
    struct Ed {
        int n_max = 8;
        int modes_used = 3; // K_used
    } ed;
    bool counterterm = false;
    struct Output {
        std::string path;           // empty: stdout
        std::string format = "csv"; // csv | json
    } output;

    double discretization_limit() const { return bath.cutoff_interval ? bath.omega_c : bath.omega_max; }
};

inline void validate(const RunConfig& c) {
    const auto require = [](bool ok, const std::string& what) {
        if (!ok) throw ContractViolation("config: " + what);
    };
    require(c.system.energies.size() >= 2, "system.energies needs at least two levels");
    require(c.system.coupled_level >= 0 &&
                c.system.coupled_level < static_cast<int>(c.system.energies.size()),
            "system.coupled_level out of range");
    require(c.bath.g >= 0.0, "bath.g must be >= 0");
    require(c.bath.omega_c > 0.0, "bath.omega_c must be > 0");
    require(c.bath.modes >= 1, "bath.modes must be >= 1");
    require(c.bath.omega_max > 0.0, "bath.omega_max must be > 0");
    require(c.grid.beta > 0.0, "grid.beta must be > 0");
    require(c.grid.slices >= 8, "grid.slices must be >= 8");
    require(c.mc.samples >= 100, "mc.samples must be >= 100");
    require(c.ed.n_max >= 0, "ed.n_max must be >= 0");
    require(c.ed.modes_used >= 1, "ed.modes_used must be >= 1");
    require(c.output.format == "csv" || c.output.format == "json",
            "output.format must be csv or json");
}

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::string canonical_key(std::string key) {
    std::transform(key.begin(), key.end(), key.begin(), [](unsigned char ch) {
        return ch == '-' ? '_' : static_cast<char>(std::tolower(ch));
    });
    static const std::map<std::string, std::string> aliases{
        {"bath.k", "bath.modes"},          {"bath.cutoff", "bath.omega_c"},
        {"bath.wc", "bath.omega_c"},       {"grid.n", "grid.slices"},
        {"ed.k_used", "ed.modes_used"},    {"out", "output.path"},
        {"format", "output.format"},       {"output.out", "output.path"},
        {"system.counterterm", "counterterm"}};
    const auto it = aliases.find(key);
    return it == aliases.end() ? key : it->second;
}

inline std::string unquote(const std::string& s) {
    if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front())
        return s.substr(1, s.size() - 2);
    return s;
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
    const std::string s = trim(text);
    T value{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
        throw ContractViolation("config: cannot parse '" + s + "' for " + key);
    return value;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
    std::string s = trim(text);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ContractViolation("config: cannot parse '" + s + "' as a boolean for " + key);
}

inline std::vector<double> parse_array(const std::string& key, const std::string& text) {
    std::string s = trim(text);
    if (s.size() < 2 || s.front() != '[' || s.back() != ']')
        throw ContractViolation("config: " + key + " must be an array like [0, 1.5]");
    s = s.substr(1, s.size() - 2);
    std::vector<double> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');) {
        if (trim(item).empty()) continue;
        out.push_back(parse_number<double>(key, item));
    }
    return out;
}

// Strip comments outside quotes; Boost's INI reader only knows ';' at line start.
inline std::string strip_comments(std::istream& in) {
    std::string out, line;
    while (std::getline(in, line)) {
        char quote = 0;
        std::size_t cut = line.size();
        for (std::size_t i = 0; i < line.size(); ++i) {
            const char ch = line[i];
            if (quote) {
                if (ch == quote) quote = 0;
            } else if (ch == '"' || ch == '\'') {
                quote = ch;
            } else if (ch == '#' || ch == ';') {
                cut = i;
                break;
            }
        }
        out += line.substr(0, cut);
        out += '\n';
    }
    return out;
}

} // namespace detail

// Set one field from its dotted path and textual value.
inline void apply_setting(RunConfig& c, const std::string& raw_key, const std::string& raw_value) {
    const std::string key = detail::canonical_key(detail::trim(raw_key));
    const std::string value = detail::unquote(detail::trim(raw_value));
    using detail::parse_bool;
    using detail::parse_number;
    static const std::map<std::string, std::function<void(RunConfig&, const std::string&,
                                                          const std::string&)>>
        setters{
            {"system.energies",
             [](RunConfig& r, const std::string& k, const std::string& v) {
                 r.system.energies = detail::parse_array(k, v);
             }},
            {"system.coupled_level",
             [](RunConfig& r, const std::string& k, const std::string& v) {
                 r.system.coupled_level = parse_number<int>(k, v);
             }},
            {"bath.g", [](RunConfig& r, const std::string& k,
                          const std::string& v) { r.bath.g = parse_number<double>(k, v); }},
            {"bath.omega_c", [](RunConfig& r, const std::string& k,
                                const std::string& v) { r.bath.omega_c = parse_number<double>(k, v); }},
            {"bath.modes", [](RunConfig& r, const std::string& k,
                              const std::string& v) { r.bath.modes = parse_number<int>(k, v); }},
            {"bath.omega_max",
             [](RunConfig& r, const std::string& k, const std::string& v) {
                 r.bath.omega_max = parse_number<double>(k, v);
             }},
            {"bath.cutoff_interval",
             [](RunConfig& r, const std::string& k, const std::string& v) {
                 r.bath.cutoff_interval = parse_bool(k, v);
             }},
            {"grid.beta", [](RunConfig& r, const std::string& k,
                             const std::string& v) { r.grid.beta = parse_number<double>(k, v); }},
            {"grid.slices", [](RunConfig& r, const std::string& k,
                               const std::string& v) { r.grid.slices = parse_number<int>(k, v); }},
            {"mc.samples",
             [](RunConfig& r, const std::string& k, const std::string& v) {
                 r.mc.samples = parse_number<std::int64_t>(k, v);
             }},
            {"mc.seed",
             [](RunConfig& r, const std::string& k, const std::string& v) {
                 r.mc.seed = parse_number<std::uint64_t>(k, v);
             }},
            {"mc.antithetic", [](RunConfig& r, const std::string& k,
                                 const std::string& v) { r.mc.antithetic = parse_bool(k, v); }},
            {"ed.n_max", [](RunConfig& r, const std::string& k,
                            const std::string& v) { r.ed.n_max = parse_number<int>(k, v); }},
            {"ed.modes_used", [](RunConfig& r, const std::string& k,
                                 const std::string& v) { r.ed.modes_used = parse_number<int>(k, v); }},
            {"counterterm", [](RunConfig& r, const std::string& k,
                               const std::string& v) { r.counterterm = parse_bool(k, v); }},
            {"output.path", [](RunConfig& r, const std::string&,
                               const std::string& v) { r.output.path = v; }},
            {"output.format", [](RunConfig& r, const std::string&,
                                 const std::string& v) { r.output.format = v; }},
        };
    const auto it = setters.find(key);
    if (it == setters.end()) throw ContractViolation("config: unknown key '" + raw_key + "'");
    it->second(c, key, value);
}

inline void apply_config_stream(RunConfig& c, std::istream& in) {
    std::istringstream cleaned(detail::strip_comments(in));
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::read_ini(cleaned, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ContractViolation(std::string("config: ") + e.what());
    }
    for (const auto& [name, node] : tree) {
        if (node.empty()) {
            apply_setting(c, name, node.data());
            continue;
        }
        for (const auto& [key, leaf] : node) apply_setting(c, name + "." + key, leaf.data());
    }
}

inline void apply_config_file(RunConfig& c, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ContractViolation("config: cannot open " + path);
    apply_config_stream(c, in);
}

inline SystemModel build_system(const RunConfig& c) {
    RealVector e(static_cast<Eigen::Index>(c.system.energies.size()));
    for (std::size_t i = 0; i < c.system.energies.size(); ++i)
        e(static_cast<Eigen::Index>(i)) = c.system.energies[i];
    return build_system(e, ProjectorCoupling{c.system.coupled_level});
}

inline SpectralDensity spectral_density(const RunConfig& c) {
    return SpectralDensity::ohmic_exponential(c.bath.g, c.bath.omega_c);
}

inline DiscretizedBath build_bath(const RunConfig& c) {
    return discretize(spectral_density(c), c.bath.modes, c.discretization_limit());
}

// The system as simulated: with the counterterm flag, +lambda_disc f^2 is added to H_Q.
inline SystemModel simulated_system(const RunConfig& c, const DiscretizedBath& bath) {
    const SystemModel bare = build_system(c);
    return c.counterterm ? bare.with_counterterm(bath.lambda()) : bare;
}

} // namespace meanforce
