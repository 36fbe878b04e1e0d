#pragma once

// Machine-readable output: fixed-decimal numbers with at least nine
// significant digits, ordered JSON objects and CSV tables.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace ringtrace::report {

inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    int decimals = 9;
    if (v != 0.0) decimals = std::clamp(8 - static_cast<int>(std::floor(std::log10(std::fabs(v)))), 0, 60);
    std::ostringstream out;
    out << std::fixed << std::setprecision(decimals) << v;
    return out.str();
}

inline std::string quote(const std::string& s) { return nlohmann::json(s).dump(); }

class JsonObject {
public:
    JsonObject& number(const std::string& key, double v) {
        return raw(key, std::isfinite(v) ? format_number(v) : "null");
    }
    JsonObject& integer(const std::string& key, long long v) { return raw(key, std::to_string(v)); }
    JsonObject& text(const std::string& key, const std::string& v) { return raw(key, quote(v)); }
    JsonObject& boolean(const std::string& key, bool v) { return raw(key, v ? "true" : "false"); }
    JsonObject& null(const std::string& key) { return raw(key, "null"); }
    JsonObject& object(const std::string& key, const JsonObject& v) {
        items_.emplace_back(key, Item{v.render_nested(), true});
        return *this;
    }
    JsonObject& numbers(const std::string& key, const std::vector<double>& v) {
        std::string s = "[";
        for (std::size_t k = 0; k < v.size(); ++k) s += (k ? ", " : "") + (std::isfinite(v[k]) ? format_number(v[k]) : "null");
        return raw(key, s + "]");
    }
    JsonObject& texts(const std::string& key, const std::vector<std::string>& v) {
        std::string s = "[";
        for (std::size_t k = 0; k < v.size(); ++k) s += (k ? ", " : "") + quote(v[k]);
        return raw(key, s + "]");
    }
    JsonObject& objects(const std::string& key, const std::vector<JsonObject>& v) {
        std::vector<std::string> parts;
        for (const auto& o : v) parts.push_back(o.render_nested());
        items_.emplace_back(key, Item{join_array(parts), true});
        return *this;
    }
    JsonObject& raw(const std::string& key, std::string rendered) {
        items_.emplace_back(key, Item{std::move(rendered), false});
        return *this;
    }

    bool empty() const { return items_.empty(); }

    // Two-space indented, one key per line.
    std::string render() const { return indent(render_nested(), 0) + "\n"; }

private:
    struct Item {
        std::string text;
        bool nested;
    };
    std::vector<std::pair<std::string, Item>> items_;

    static std::string join_array(const std::vector<std::string>& parts) {
        std::string s = "[";
        for (std::size_t k = 0; k < parts.size(); ++k) s += (k ? ",\n" : "\n") + parts[k];
        return s + (parts.empty() ? "]" : "\n]");
    }

    std::string render_nested() const {
        std::string s = "{";
        for (std::size_t k = 0; k < items_.size(); ++k) {
            s += (k ? ",\n" : "\n") + quote(items_[k].first) + ": " + items_[k].second.text;
        }
        return s + (items_.empty() ? "}" : "\n}");
    }

    // Re-indent by bracket depth; strings never contain raw newlines.
    static std::string indent(const std::string& s, int depth) {
        std::string out;
        bool in_string = false, escaped = false;
        for (std::size_t k = 0; k < s.size(); ++k) {
            const char c = s[k];
            if (in_string) {
                out += c;
                if (escaped) escaped = false;
                else if (c == '\\') escaped = true;
                else if (c == '"') in_string = false;
                continue;
            }
            if (c == '"') in_string = true;
            if (c == '\n') {
                const char next = k + 1 < s.size() ? s[k + 1] : '\0';
                const int d = (next == '}' || next == ']') ? depth - 1 : depth;
                out += '\n' + std::string(static_cast<std::size_t>(2 * std::max(d, 0)), ' ');
                continue;
            }
            if (c == '{' || c == '[') ++depth;
            if (c == '}' || c == ']') --depth;
            out += c;
        }
        return out;
    }
};

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    void write_csv(std::ostream& out) const {
        for (std::size_t k = 0; k < columns.size(); ++k) out << (k ? "," : "") << columns[k];
        out << '\n';
        for (const auto& row : rows) {
            for (std::size_t k = 0; k < row.size(); ++k) out << (k ? "," : "") << format_number(row[k]);
            out << '\n';
        }
    }

    std::vector<JsonObject> json_rows() const {
        std::vector<JsonObject> out;
        for (const auto& row : rows) {
            JsonObject o;
            for (std::size_t k = 0; k < row.size(); ++k) o.number(columns[k], row[k]);
            out.push_back(std::move(o));
        }
        return out;
    }
};

}  // namespace ringtrace::report
