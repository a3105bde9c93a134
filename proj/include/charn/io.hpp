#pragma once

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "charn/error.hpp"
#include "charn/model.hpp"

namespace charn::io {

/// Shortest text that reads back to the same double (17 significant digits).
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) out.push_back(trim(cur));
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

/// Parses a whole field as a finite double.
inline bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    errno = 0;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size() && errno == 0 && std::isfinite(out);
}

/// Reads CSV text: one numeric column, or a "t" label column plus a "value" column.
/// A header row is optional. Blank or non-numeric rows raise ParseError citing the
/// line; blank lines after the last data row are ignored.
inline TimeSeries parse_csv(const std::string& text) {
    std::vector<std::string> lines;
    {
        std::istringstream in(text);
        std::string line;
        while (std::getline(in, line)) lines.push_back(line);
    }
    while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
    if (lines.empty()) throw ParseError(0, 0, "empty file");
    if (lines.front().size() >= 3 && lines.front().compare(0, 3, "\xEF\xBB\xBF") == 0) lines.front().erase(0, 3);

    std::size_t value_col = 0;
    std::optional<std::size_t> t_col;
    std::size_t first = 0;
    const auto head = split(lines.front(), ',');
    double probe = 0.0;
    if (!parse_double(head.front(), probe)) {
        first = 1;
        bool found = false;
        for (std::size_t c = 0; c < head.size(); ++c) {
            if (head[c] == "value") {
                value_col = c;
                found = true;
            } else if (head[c] == "t") {
                t_col = c;
            }
        }
        if (!found) {
            if (head.size() != 1) throw ParseError(1, 1, "header must name a 'value' column");
            value_col = 0;
        }
    } else if (head.size() == 2) {
        t_col = 0;
        value_col = 1;
    } else if (head.size() != 1) {
        throw ParseError(1, 1, "expected one column, or two columns t,value");
    }
    const std::size_t width = first == 1 ? head.size() : (t_col ? 2 : 1);

    std::vector<double> values;
    std::optional<long> origin;
    for (std::size_t i = first; i < lines.size(); ++i) {
        const std::size_t row = i + 1;
        if (trim(lines[i]).empty()) throw ParseError(row, 1, "blank row " + std::to_string(row));
        const auto fields = split(lines[i], ',');
        if (fields.size() != width)
            throw ParseError(row, 1, "row " + std::to_string(row) + " has " + std::to_string(fields.size()) +
                                         " fields, expected " + std::to_string(width));
        double v = 0.0;
        if (!parse_double(fields[value_col], v))
            throw ParseError(row, value_col + 1, "row " + std::to_string(row) + ": '" + fields[value_col] + "' is not a finite number");
        if (t_col && !origin) {
            double t = 0.0;
            if (!parse_double(fields[*t_col], t)) throw ParseError(row, *t_col + 1, "row " + std::to_string(row) + ": bad t label");
            origin = static_cast<long>(t);
        }
        values.push_back(v);
    }
    if (values.empty()) throw ParseError(lines.size(), 0, "no data rows");
    return TimeSeries(std::move(values), origin);
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    out << text;
    if (!out) throw ConfigError("write failed for '" + path + "'");
}

inline TimeSeries load_csv(const std::string& path) { return parse_csv(read_file(path)); }

inline std::string to_csv(const TimeSeries& x) {
    std::string out = "t,value\n";
    const long origin = x.origin_label().value_or(1);
    for (std::size_t i = 0; i < x.size(); ++i) out += std::to_string(origin + static_cast<long>(i)) + "," + format_double(x[i]) + "\n";
    return out;
}

inline void save_csv(const std::string& path, const TimeSeries& x) { write_file(path, to_csv(x)); }

/// Plain table with a header row.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    void add(std::vector<std::string> row) {
        if (row.size() != columns.size()) throw ConfigError("table row width does not match header");
        rows.push_back(std::move(row));
    }

    [[nodiscard]] std::string to_csv() const {
        std::string out;
        auto line = [&](const std::vector<std::string>& r) {
            for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + r[i];
            out += "\n";
        };
        line(columns);
        for (const auto& r : rows) line(r);
        return out;
    }
};

enum class EndpointMode { Shrink, Drop };

struct DetrendResult {
    TimeSeries residual;
    TimeSeries trend;
    std::size_t offset = 0;  // index of the first returned point minus 1 (Drop mode skips order/2 points)
};

/// Centred moving average of odd `order`. Near the ends the window shrinks
/// symmetrically (Shrink) or the points are dropped (Drop).
inline DetrendResult detrend_ma(const TimeSeries& x, std::size_t order = 5, EndpointMode mode = EndpointMode::Shrink) {
    const std::size_t n = x.size();
    if (order % 2 == 0) throw ConfigError("moving-average order must be odd");
    if (order >= n) throw ConfigError("moving-average order must be < n");
    const std::size_t half = order / 2;
    std::vector<double> trend;
    std::vector<double> resid;
    const std::size_t from = mode == EndpointMode::Drop ? half : 0;
    const std::size_t to = mode == EndpointMode::Drop ? n - half : n;
    for (std::size_t i = from; i < to; ++i) {
        const std::size_t h = std::min({half, i, n - 1 - i});
        // Summing deviations from the centre keeps constant stretches exact.
        double s = 0.0;
        for (std::size_t j = i - h; j <= i + h; ++j) s += x[j] - x[i];
        const double m = x[i] + s / static_cast<double>(2 * h + 1);
        trend.push_back(m);
        resid.push_back(x[i] - m);
    }
    std::optional<long> origin;
    if (x.origin_label()) origin = *x.origin_label() + static_cast<long>(from);
    return {TimeSeries(std::move(resid), origin), TimeSeries(std::move(trend), origin), from};
}

/// Flat `key = value` configuration; '#' starts a comment.
class Config {
public:
    Config() = default;

    /// Parses text, rejecting keys outside `allowed` and repeated keys.
    static Config parse(const std::string& text, const std::set<std::string>& allowed) {
        Config c;
        std::istringstream in(text);
        std::string line;
        std::size_t no = 0;
        while (std::getline(in, line)) {
            ++no;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(no) + ": expected key = value");
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            if (!allowed.count(key)) throw ConfigError("config line " + std::to_string(no) + ": unknown key '" + key + "'");
            if (c.values_.count(key)) throw ConfigError("config line " + std::to_string(no) + ": duplicate key '" + key + "'");
            c.values_[key] = value;
        }
        return c;
    }

    [[nodiscard]] bool has(const std::string& key) const { return values_.count(key) != 0; }
    [[nodiscard]] const std::map<std::string, std::string>& values() const noexcept { return values_; }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    [[nodiscard]] std::string get(const std::string& key, const std::string& fallback) const {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    [[nodiscard]] double get_double(const std::string& key, double fallback) const {
        if (!has(key)) return fallback;
        double v = 0.0;
        if (!parse_double(values_.at(key), v)) throw ConfigError("'" + key + "' must be a number");
        return v;
    }

    [[nodiscard]] std::size_t get_size(const std::string& key, std::size_t fallback) const {
        if (!has(key)) return fallback;
        return to_size(key, values_.at(key));
    }

    [[nodiscard]] bool get_bool(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const auto& v = values_.at(key);
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        throw ConfigError("'" + key + "' must be true or false");
    }

    [[nodiscard]] std::vector<double> get_doubles(const std::string& key) const {
        std::vector<double> out;
        if (!has(key) || values_.at(key).empty()) return out;
        for (const auto& f : split(values_.at(key), ',')) {
            double v = 0.0;
            if (!parse_double(f, v)) throw ConfigError("'" + key + "' must be a comma-separated list of numbers");
            out.push_back(v);
        }
        return out;
    }

    [[nodiscard]] std::vector<std::size_t> get_sizes(const std::string& key) const {
        std::vector<std::size_t> out;
        if (!has(key) || values_.at(key).empty()) return out;
        for (const auto& f : split(values_.at(key), ',')) out.push_back(to_size(key, f));
        return out;
    }

private:
    static std::size_t to_size(const std::string& key, const std::string& s) {
        if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
            throw ConfigError("'" + key + "' must be a non-negative integer");
        return static_cast<std::size_t>(std::stoull(s));
    }

    std::map<std::string, std::string> values_;
};

}  // namespace charn::io
