#pragma once

// CSV artifacts (17 significant digits, '.' separator, '\n' endings, atomic
// writes) and the JSON configuration formats for sequences and coupling models.

#include "memloss/coupling.hpp"
#include "memloss/errors.hpp"
#include "memloss/maps.hpp"
#include "memloss/sequences.hpp"
#include "memloss/tail_table.hpp"

#include <json.hpp> // vendored nlohmann/json

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

namespace memloss {

using json = nlohmann::json;

inline std::string format_double(double v) {
    if (std::isnan(v)) return "";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
    if (s.empty()) return std::nan("");
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw FormatError("not a number: '" + s + "'");
    return v;
}

struct Csv {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    [[nodiscard]] std::size_t column_index(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw FormatError("missing column '" + name + "'");
    }

    [[nodiscard]] std::vector<double> column(const std::string& name) const {
        const std::size_t i = column_index(name);
        std::vector<double> out;
        out.reserve(rows.size());
        for (const auto& r : rows) out.push_back(parse_double(r.at(i)));
        return out;
    }

    [[nodiscard]] std::string header_line() const {
        std::string s;
        for (std::size_t i = 0; i < header.size(); ++i) s += (i ? "," : "") + header[i];
        return s;
    }

    [[nodiscard]] std::string text() const {
        std::string s = header_line() + "\n";
        for (const auto& r : rows) {
            for (std::size_t i = 0; i < r.size(); ++i) {
                if (i) s += ',';
                s += r[i];
            }
            s += '\n';
        }
        return s;
    }
};

// Writes to a temporary sibling and renames it over the target.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw FormatError("cannot open " + tmp.string() + " for writing");
        out << content;
        if (!out) throw FormatError("write to " + tmp.string() + " failed");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw FormatError("cannot rename " + tmp.string() + ": " + ec.message());
}

inline Csv parse_csv(const std::string& text, const std::string& origin = "<csv>") {
    Csv csv;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::size_t start = 0;
        for (;;) {
            const std::size_t comma = line.find(',', start);
            cells.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (csv.header.empty()) {
            csv.header = std::move(cells);
        } else {
            if (cells.size() != csv.header.size())
                throw FormatError(origin + ":" + std::to_string(line_no) + ": expected " +
                                  std::to_string(csv.header.size()) + " fields");
            csv.rows.push_back(std::move(cells));
        }
    }
    if (csv.header.empty()) throw FormatError(origin + ": empty CSV");
    return csv;
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline Csv read_csv(const std::filesystem::path& path) { return parse_csv(read_text(path), path.string()); }

// `n,value,stderr` table; stderr cells are empty for exact tables.
inline Csv tail_csv(const TailTable& t) {
    Csv csv{{"n", "value", "stderr"}, {}};
    for (std::size_t n = 0; n < t.values.size(); ++n)
        csv.rows.push_back({std::to_string(n), format_double(t.values[n]),
                            t.has_std_error() ? format_double(t.std_error[n]) : std::string()});
    return csv;
}

// Reads a `n,value[,...]` table with rows n = 0, 1, 2, ...
inline TailTable tail_from_csv(const Csv& csv, TailLabel label = TailLabel::HK) {
    const auto n = csv.column("n");
    const auto v = csv.column("value");
    if (v.empty()) throw FormatError("tail table has no rows");
    for (std::size_t i = 0; i < n.size(); ++i)
        if (n[i] != static_cast<double>(i)) throw FormatError("tail table rows must be n = 0, 1, 2, ...");
    return TailTable(1, label, v);
}

inline json load_json(const std::filesystem::path& path) {
    const std::string text = read_text(path);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

namespace detail {

inline void reject_unknown_keys(const json& j, const std::set<std::string>& allowed, const char* what) {
    if (!j.is_object()) throw FormatError(std::string(what) + " config must be a JSON object");
    for (const auto& [key, _] : j.items())
        if (!allowed.count(key)) throw FormatError(std::string(what) + " config: unknown key '" + key + "'");
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("key '") + key + "': " + e.what());
    }
}

template <class T>
T get_required(const json& j, const char* key, const char* what) {
    if (!j.contains(key)) throw FormatError(std::string(what) + " config: missing key '" + key + "'");
    return get_or<T>(j, key, T{});
}

} // namespace detail

// Map parameters of one family from its gamma value (and beta for Cui).
inline MapParams params_for(Family f, double gamma, double beta = 1.0) {
    switch (f) {
    case Family::LSV: return MapParams::lsv(gamma);
    case Family::Cui: return MapParams::cui(gamma, beta);
    case Family::Pikovsky: return MapParams::pikovsky(gamma);
    case Family::GrossmannHorner: {
        auto p = MapParams::grossmann_horner();
        p.gamma = gamma;
        return p;
    }
    }
    return {};
}

// Sequence config:
//   {"kind": "iid"|"markov"|"periodic"|"explicit", "family": "lsv"|"cui"|"pikovsky"|"gh",
//    "support": [gamma...], "probs": [...], "transition": [[...]], "seed": int,
//    "cycle": [gamma...], "beta": number}
inline ParamSequence sequence_from_json(const json& j) {
    detail::reject_unknown_keys(j, {"kind", "family", "support", "probs", "transition", "seed", "cycle", "beta"},
                                "sequence");
    const auto kind = detail::get_required<std::string>(j, "kind", "sequence");
    const Family family = parse_family(detail::get_required<std::string>(j, "family", "sequence"));
    const double beta = detail::get_or<double>(j, "beta", 1.0);
    const auto seed = detail::get_or<std::uint64_t>(j, "seed", 0);
    auto to_params = [&](const std::vector<double>& gammas) {
        std::vector<MapParams> out;
        for (double g : gammas) out.push_back(params_for(family, g, beta));
        return out;
    };
    if (kind == "periodic" || kind == "explicit") {
        const auto cycle = to_params(detail::get_required<std::vector<double>>(j, "cycle", "sequence"));
        return kind == "periodic" ? ParamSequence::periodic(cycle) : ParamSequence::explicit_list(cycle);
    }
    const auto support = to_params(detail::get_required<std::vector<double>>(j, "support", "sequence"));
    const auto probs = detail::get_or<std::vector<double>>(j, "probs", {});
    if (kind == "iid") return ParamSequence::iid(support, probs, seed);
    if (kind == "markov") {
        const auto P = detail::get_required<std::vector<std::vector<double>>>(j, "transition", "sequence");
        return ParamSequence::markov(support, P, probs, seed);
    }
    throw FormatError("sequence config: unknown kind '" + kind + "'");
}

// "synthetic:power:<beta>", "synthetic:step:<L>" or "file:<path>" (relative
// paths resolve against base_dir).
inline TailTable tail_from_spec(const std::string& spec, std::size_t depth, const std::filesystem::path& base_dir) {
    auto fail = [&] { throw FormatError("tails spec '" + spec + "' not understood"); };
    if (spec.rfind("synthetic:power:", 0) == 0) return synthetic_power_tail(parse_double(spec.substr(16)), depth);
    if (spec.rfind("synthetic:step:", 0) == 0) {
        const double L = parse_double(spec.substr(15));
        if (!(L >= 1.0) || L != std::floor(L)) fail();
        return synthetic_step_tail(static_cast<std::size_t>(L), depth);
    }
    if (spec.rfind("file:", 0) == 0) {
        std::filesystem::path p = spec.substr(5);
        if (p.is_relative()) p = base_dir / p;
        return tail_from_csv(read_csv(p));
    }
    fail();
    return {};
}

// Coupling config: {"theta", "n0", "beta", "beta_prime", "C_beta", "C_beta_prime",
// "Theta": [...], "tails": spec, "r": spec (defaults to tails), "K", "lambda",
// "diam_X", "delta0", "k"}. Missing C_beta / C_beta_prime default to the smallest
// constants valid on the tabulated range.
inline CouplingModel coupling_model_from_json(const json& j, std::size_t horizon,
                                              const std::filesystem::path& base_dir = ".") {
    detail::reject_unknown_keys(j,
                                {"theta", "n0", "beta", "beta_prime", "C_beta", "C_beta_prime", "Theta", "tails",
                                 "r", "K", "lambda", "diam_X", "delta0", "k"},
                                "coupling");
    const auto c = CouplingConstants::make(detail::get_or<double>(j, "theta", 0.25),
                                           detail::get_or<std::size_t>(j, "n0", 1), detail::get_or<double>(j, "K", 0.0),
                                           detail::get_or<double>(j, "lambda", 2.0),
                                           detail::get_or<double>(j, "diam_X", 1.0),
                                           detail::get_or<double>(j, "delta0", 1.0));
    const std::size_t depth = 2 * horizon + 4;
    const auto tails = detail::get_required<std::string>(j, "tails", "coupling");
    TailTable h = tail_from_spec(tails, depth, base_dir);
    TailTable r = tail_from_spec(detail::get_or<std::string>(j, "r", tails), depth, base_dir);
    TailBounds b;
    b.beta = detail::get_or<double>(j, "beta", 2.0);
    b.beta_prime = detail::get_or<double>(j, "beta_prime", b.beta);
    b.Theta = detail::get_or<std::vector<double>>(j, "Theta", {});
    const auto k = detail::get_or<std::size_t>(j, "k", 1);
    const double th = b.Theta.empty() ? 0.0 : b.Theta.front();
    b.C_beta = detail::get_or<double>(j, "C_beta", std::max(1.0, minimal_constant(h, b.beta, th * double(k))));
    b.C_beta_prime =
        detail::get_or<double>(j, "C_beta_prime", std::max(1.0, minimal_constant(r, b.beta_prime, th * double(k))));
    return CouplingModel(c, TailFamily(k, {std::move(h)}, std::move(r), b), horizon);
}

} // namespace memloss
