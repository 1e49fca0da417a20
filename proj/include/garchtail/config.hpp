#pragma once

#include "garchtail/errors.hpp"
#include "garchtail/garch_spec.hpp"
#include "garchtail/innovations.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace garchtail {

/**
 * @brief Parsed value of a model file entry.
 *
 * Grammar, one entry per line:
 *   line    := blank | comment | section | entry
 *   comment := '#' anything
 *   section := '[' name ']'
 *   entry   := key '=' value [comment]
 *   value   := number | string | bool | '[' number (',' number)* ']' | '[' ']'
 *   string  := '"' chars without '"' '"'
 * Keys are [A-Za-z0-9_]+. Keys inside a section are stored as "section.key".
 */
using ConfigValue = std::variant<double, std::string, bool, std::vector<double>>;

struct ConfigEntry {
    ConfigValue value;
    int line = 0;
};

class ConfigTable {
public:
    ConfigTable(std::map<std::string, ConfigEntry> entries, std::string source)
        : entries_(std::move(entries)), source_(std::move(source)) {}

    [[nodiscard]] bool has(const std::string& key) const { return entries_.count(key) != 0; }

    [[nodiscard]] double number(const std::string& key) const { return get<double>(key, "a number"); }
    [[nodiscard]] double number(const std::string& key, double fallback) const {
        return has(key) ? number(key) : fallback;
    }
    [[nodiscard]] std::string string(const std::string& key) const { return get<std::string>(key, "a string"); }
    [[nodiscard]] std::vector<double> array(const std::string& key) const {
        if (has(key) && std::holds_alternative<double>(entries_.at(key).value)) {
            return {std::get<double>(entries_.at(key).value)};
        }
        return get<std::vector<double>>(key, "an array of numbers");
    }
    [[nodiscard]] int integer(const std::string& key) const {
        const double v = number(key);
        if (v != static_cast<double>(static_cast<int>(v))) fail(key, "must be an integer");
        return static_cast<int>(v);
    }

    /// Rejects keys outside the allowed set, naming the first offender and its line.
    void allow_only(const std::set<std::string>& keys) const {
        for (const auto& [k, e] : entries_) {
            if (keys.count(k) == 0) {
                throw Error(ErrorKind::Config, source_ + ":" + std::to_string(e.line) + ": unknown field '" + k + "'");
            }
        }
    }

    [[nodiscard]] const std::map<std::string, ConfigEntry>& entries() const noexcept { return entries_; }
    [[nodiscard]] const std::string& source() const noexcept { return source_; }

    [[noreturn]] void fail(const std::string& key, const std::string& what) const {
        const int line = has(key) ? entries_.at(key).line : 0;
        throw Error(ErrorKind::Config, source_ + ":" + std::to_string(line) + ": field '" + key + "' " + what);
    }

private:
    template <typename T>
    const T& get(const std::string& key, const char* kind) const {
        auto it = entries_.find(key);
        if (it == entries_.end()) {
            throw Error(ErrorKind::Config, source_ + ": missing required field '" + key + "'");
        }
        if (!std::holds_alternative<T>(it->second.value)) fail(key, std::string("must be ") + kind);
        return std::get<T>(it->second.value);
    }

    std::map<std::string, ConfigEntry> entries_;
    std::string source_;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::string strip_comment(const std::string& s) {
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"') quoted = !quoted;
        if (s[i] == '#' && !quoted) return s.substr(0, i);
    }
    return s;
}

inline bool valid_key(const std::string& k) {
    if (k.empty()) return false;
    for (char c : k) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
    }
    return true;
}

inline bool parse_number(const std::string& s, double& out) {
    const std::string t = trim(s);
    if (t.empty()) return false;
    const char* first = t.data();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), out);
    return ec == std::errc() && ptr == t.data() + t.size();
}

}  // namespace detail

inline ConfigTable parse_config(std::istream& in, const std::string& source) {
    std::map<std::string, ConfigEntry> entries;
    std::string section;
    std::string raw;
    int line = 0;
    auto fail = [&](const std::string& what) {
        throw Error(ErrorKind::Config, source + ":" + std::to_string(line) + ": " + what);
    };
    while (std::getline(in, raw)) {
        ++line;
        const std::string s = detail::trim(detail::strip_comment(raw));
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']') fail("unterminated section header");
            section = detail::trim(s.substr(1, s.size() - 2));
            if (!detail::valid_key(section)) fail("invalid section name '" + section + "'");
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) fail("expected 'key = value'");
        const std::string key = detail::trim(s.substr(0, eq));
        const std::string val = detail::trim(s.substr(eq + 1));
        if (!detail::valid_key(key)) fail("invalid key '" + key + "'");
        if (val.empty()) fail("missing value for '" + key + "'");
        const std::string full = section.empty() ? key : section + "." + key;
        if (entries.count(full)) fail("duplicate field '" + full + "'");
        ConfigValue v;
        if (val.front() == '"') {
            if (val.size() < 2 || val.back() != '"' || val.find('"', 1) != val.size() - 1) fail("malformed string");
            v = val.substr(1, val.size() - 2);
        } else if (val == "true" || val == "false") {
            v = val == "true";
        } else if (val.front() == '[') {
            if (val.back() != ']') fail("unterminated array");
            std::vector<double> arr;
            const std::string body = detail::trim(val.substr(1, val.size() - 2));
            if (!body.empty()) {
                std::stringstream ss(body);
                std::string item;
                while (std::getline(ss, item, ',')) {
                    double x = 0.0;
                    if (!detail::parse_number(item, x)) fail("array element '" + detail::trim(item) + "' is not a number");
                    arr.push_back(x);
                }
            }
            v = arr;
        } else {
            double x = 0.0;
            if (!detail::parse_number(val, x)) fail("value '" + val + "' is not a number, string, bool or array");
            v = x;
        }
        entries[full] = {std::move(v), line};
    }
    return ConfigTable(std::move(entries), source);
}

inline ConfigTable read_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Config, "cannot open model file '" + path + "'");
    return parse_config(in, path);
}

/// Reference values a fixture may carry under [expected].
inline const std::vector<std::string>& expected_fields() {
    static const std::vector<std::string> f{"gamma", "eta", "kappa", "theta_x2", "theta_up", "theta_lo", "delta"};
    return f;
}

struct ModelFile {
    std::string name;
    GarchSpec spec;
    std::map<std::string, double> expected;
};

/**
 * @brief Model file: p, q, alpha0, alpha, beta, [innovation] kind/nu/xi, optional name and [expected].
 *
 * Validation errors from the model or innovation are rethrown with the file and line prefixed.
 */
inline ModelFile load_model(const ConfigTable& t) {
    std::set<std::string> allowed{"name", "p", "q", "alpha0", "alpha", "beta", "innovation.kind", "innovation.nu",
                                  "innovation.xi"};
    for (const auto& f : expected_fields()) allowed.insert("expected." + f);
    t.allow_only(allowed);
    ModelFile m;
    m.name = t.has("name") ? t.string("name") : "";
    GarchSpec& s = m.spec;
    s.p = t.integer("p");
    s.q = t.integer("q");
    s.alpha0 = t.number("alpha0");
    s.alpha = t.array("alpha");
    s.beta = t.has("beta") ? t.array("beta") : std::vector<double>{};
    const std::string kind = t.has("innovation.kind") ? t.string("innovation.kind") : "gaussian";
    auto scoped = [&](const std::string& key, auto&& fn) {
        try {
            fn();
        } catch (const Error& e) {
            const int line = t.has(key) ? t.entries().at(key).line : 0;
            throw Error(e.kind(), t.source() + ":" + std::to_string(line) + ": " + e.what());
        }
    };
    scoped("innovation.kind", [&] {
        const auto k = parse_innovation_kind(kind);
        if (k == InnovationKind::Gaussian) {
            s.innovation = standardize(k);
        } else {
            if (!t.has("innovation.nu")) t.fail("innovation.nu", "is required for Student-type innovations");
            s.innovation = standardize(k, t.number("innovation.nu"), t.number("innovation.xi", 0.0));
        }
    });
    scoped("p", [&] { s.validate(); });
    for (const auto& f : expected_fields()) {
        if (t.has("expected." + f)) m.expected[f] = t.number("expected." + f);
    }
    return m;
}

inline ModelFile load_model_file(const std::string& path) { return load_model(read_config(path)); }

}  // namespace garchtail
