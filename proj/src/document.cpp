#include "cqa/document.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace cqa {

namespace {

using nlohmann::json;

bool is_identifier(const std::string& s) {
    if (s.empty()) return false;
    if (!std::isalpha(static_cast<unsigned char>(s[0])) && s[0] != '_') return false;
    return std::all_of(s.begin(), s.end(), [](unsigned char c) {
        return std::isalnum(c) || c == '_';
    });
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& ctx) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) ok = true;
        if (!ok) throw ValidationError("unknown key '" + it.key() + "' in " + ctx);
    }
}

int get_label(const json& j, const std::string& ctx) {
    if (!j.is_number_integer())
        throw ValidationError(ctx + " must be an integer");
    long v = j.get<long>();
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
        throw ValidationError(ctx + " out of range");
    return static_cast<int>(v);
}

std::string get_expr_text(const json& j, const std::string& ctx) {
    if (!j.is_string() || j.get<std::string>().empty())
        throw ValidationError(ctx + " must be a nonempty string");
    return j.get<std::string>();
}

FamilyDecl decode_family(const json& j, const std::string& ctx) {
    if (!j.is_object()) throw ValidationError(ctx + ": family must be an object");
    check_keys(j, {"base", "range", "expr", "coefficients", "tailBound"}, ctx);
    FamilyDecl f;
    if (!j.contains("base") || !j.contains("range") || !j.contains("expr"))
        throw ValidationError(ctx + ": family needs 'base', 'range' and 'expr'");
    f.base = get_label(j.at("base"), ctx + ".base");
    const json& r = j.at("range");
    if (!r.is_array() || r.size() != 2)
        throw ValidationError(ctx + ".range must be [lo, hi] with hi a number or \"inf\"");
    if (!r[0].is_number_integer()) throw ValidationError(ctx + ".range lower bound must be an integer");
    f.lo = r[0].get<long>();
    if (r[1].is_string()) {
        if (r[1].get<std::string>() != "inf")
            throw ValidationError(ctx + ".range upper bound must be an integer or \"inf\"");
    } else if (r[1].is_number_integer()) {
        f.hi = r[1].get<long>();
    } else {
        throw ValidationError(ctx + ".range upper bound must be an integer or \"inf\"");
    }
    f.source = get_expr_text(j.at("expr"), ctx + ".expr");
    if (j.contains("coefficients")) {
        const json& c = j.at("coefficients");
        if (!c.is_object()) throw ValidationError(ctx + ".coefficients must be an object");
        for (auto it = c.begin(); it != c.end(); ++it) {
            if (!is_identifier(it.key()))
                throw ValidationError(ctx + ": coefficient name '" + it.key() + "' is not an identifier");
            f.coefficients[it.key()] = get_expr_text(it.value(), ctx + ".coefficients." + it.key());
        }
    }
    if (j.contains("tailBound")) {
        if (!j.at("tailBound").is_number())
            throw ValidationError(ctx + ".tailBound must be a number");
        f.tail_bound = j.at("tailBound").get<double>();
    }
    return f;
}

std::vector<EntryDecl> decode_entries(const json& j, const std::string& ctx) {
    if (!j.is_array()) throw ValidationError(ctx + " must be an array");
    std::vector<EntryDecl> out;
    int pos = 0;
    for (const json& e : j) {
        std::string ectx = ctx + "[" + std::to_string(pos++) + "]";
        if (!e.is_object()) throw ValidationError(ectx + " must be an object");
        EntryDecl d;
        if (e.contains("family")) {
            check_keys(e, {"family"}, ectx);
            d.family = decode_family(e.at("family"), ectx + ".family");
        } else {
            check_keys(e, {"label", "expr"}, ectx);
            if (!e.contains("label") || !e.contains("expr"))
                throw ValidationError(ectx + " needs 'label' and 'expr' (or a 'family')");
            d.label = get_label(e.at("label"), ectx + ".label");
            d.source = get_expr_text(e.at("expr"), ectx + ".expr");
        }
        out.push_back(std::move(d));
    }
    return out;
}

// Realized label interval of an entry; second item is empty for unbounded.
std::pair<long, std::optional<long>> label_interval(const EntryDecl& e) {
    if (!e.is_family()) return {*e.label, *e.label};
    const FamilyDecl& f = *e.family;
    if (f.hi) return {f.base, f.base + (*f.hi - f.lo)};
    return {f.base, std::nullopt};
}

}  // namespace

void ProblemDocument::validate_structure() const {
    if (version != "1") throw ValidationError("unsupported document version '" + version + "'");
    if (n < 1) throw ValidationError("n must be >= 1");
    if (!is_identifier(index_symbol))
        throw ValidationError("index symbol '" + index_symbol + "' is not an identifier");

    std::vector<std::pair<long, std::optional<long>>> intervals;
    auto scan = [&](const std::vector<EntryDecl>& entries, const char* kind) {
        int pos = 0;
        for (const EntryDecl& e : entries) {
            std::string ctx = std::string(kind) + "[" + std::to_string(pos++) + "]";
            if (e.is_family()) {
                const FamilyDecl& f = *e.family;
                if (f.lo < 1) throw ValidationError(ctx + ": family lower bound must be >= 1");
                if (f.hi && *f.hi < f.lo) throw ValidationError(ctx + ": empty family range");
                if (f.tail_bound && !(*f.tail_bound < 0))
                    throw ValidationError(ctx + ": tailBound must be negative");
                if (f.coefficients.count(index_symbol))
                    throw ValidationError(ctx + ": coefficient shadows the index symbol");
            }
            intervals.push_back(label_interval(e));
        }
    };
    scan(equalities, "equalities");
    scan(inequalities, "inequalities");

    std::sort(intervals.begin(), intervals.end(), [](const auto& a, const auto& b) {
        return a.first < b.first;
    });
    for (std::size_t i = 1; i < intervals.size(); ++i) {
        const auto& prev = intervals[i - 1];
        bool overlap = !prev.second || *prev.second >= intervals[i].first;
        if (overlap)
            throw ValidationError("overlapping labels: intervals starting at " +
                                  std::to_string(prev.first) + " and " +
                                  std::to_string(intervals[i].first) + " collide");
    }

    for (const auto& [name, p] : points) {
        if (p.size() != n)
            throw ValidationError("point '" + name + "' has dimension " +
                                  std::to_string(p.size()) + ", expected " + std::to_string(n));
    }
}

ProblemDocument document_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw IoError(std::string("document is not valid JSON: ") + e.what());
    }
    try {
        if (!j.is_object()) throw ValidationError("document root must be an object");
        check_keys(j, {"version", "n", "indexSymbol", "equalities", "inequalities", "objective", "points"},
                   "document");
        ProblemDocument doc;
        if (!j.contains("version") || !j.at("version").is_string())
            throw ValidationError("document needs a string 'version'");
        doc.version = j.at("version").get<std::string>();
        if (!j.contains("n") || !j.at("n").is_number_integer())
            throw ValidationError("document needs an integer 'n'");
        doc.n = get_label(j.at("n"), "n");
        if (j.contains("indexSymbol")) {
            if (!j.at("indexSymbol").is_string())
                throw ValidationError("indexSymbol must be a string");
            doc.index_symbol = j.at("indexSymbol").get<std::string>();
        }
        if (j.contains("equalities")) doc.equalities = decode_entries(j.at("equalities"), "equalities");
        if (j.contains("inequalities"))
            doc.inequalities = decode_entries(j.at("inequalities"), "inequalities");
        if (j.contains("objective")) doc.objective = get_expr_text(j.at("objective"), "objective");
        if (j.contains("points")) {
            const json& pts = j.at("points");
            if (!pts.is_object()) throw ValidationError("points must be an object");
            for (auto it = pts.begin(); it != pts.end(); ++it) {
                if (!it.value().is_array())
                    throw ValidationError("point '" + it.key() + "' must be an array of numbers");
                Eigen::VectorXd v(it.value().size());
                Eigen::Index k = 0;
                for (const json& c : it.value()) {
                    if (!c.is_number())
                        throw ValidationError("point '" + it.key() + "' must be an array of numbers");
                    v[k++] = c.get<double>();
                }
                doc.points[it.key()] = std::move(v);
            }
        }
        doc.validate_structure();
        return doc;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed document: ") + e.what());
    }
}

ProblemDocument load_document(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw IoError("read failure on '" + path + "'");
    return document_from_json_text(buf.str());
}

}  // namespace cqa
