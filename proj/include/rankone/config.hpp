#pragma once

// Flat key=value documents with [section] headers, used for run configs and
// forcing certificate dumps. Also parses the small textual grammars for
// tower sets ("2:0,3") and step functions ("2:0 - 1/2*2:1,3").

#include "construction.hpp"
#include "forcing.hpp"
#include "presets.hpp"
#include "rational.hpp"
#include "stepcalc.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <deque>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace rankone {

/// A config problem; key() is "section.key" (or the section name alone).
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key, const std::string& what) : std::runtime_error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}
    const std::string& key() const { return key_; }

private:
    std::string key_;
};

inline std::string trim(std::string_view s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return std::string(s.substr(a, b - a));
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, sep);) out.push_back(trim(item));
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

class Section {
public:
    explicit Section(std::string name = {}) : name_(std::move(name)) {}

    const std::string& name() const { return name_; }
    bool has(const std::string& key) const { return index_.count(key) > 0; }

    void set(const std::string& key, std::string value) {
        auto it = index_.find(key);
        if (it != index_.end()) {
            entries_[it->second].second = std::move(value);
            return;
        }
        index_[key] = entries_.size();
        entries_.emplace_back(key, std::move(value));
    }

    const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

    std::string qualified(const std::string& key) const { return name_ + "." + key; }

    const std::string& get(const std::string& key) const {
        auto it = index_.find(key);
        if (it == index_.end()) throw ConfigError(qualified(key), "missing required key");
        return entries_[it->second].second;
    }
    std::string get_or(const std::string& key, const std::string& fallback) const { return has(key) ? get(key) : fallback; }

    /// Runs a parser on the value and rewraps any failure with the key name.
    template <class F>
    auto parse(const std::string& key, F&& f) const -> decltype(f(std::string())) {
        const std::string& v = get(key);
        try {
            return f(v);
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw ConfigError(qualified(key), std::string("invalid value '") + v + "': " + e.what());
        }
    }
    template <class F>
    auto parse_or(const std::string& key, F&& f, decltype(f(std::string())) fallback) const -> decltype(f(std::string())) {
        return has(key) ? parse(key, std::forward<F>(f)) : fallback;
    }

    std::int64_t integer(const std::string& key) const {
        return parse(key, [](const std::string& s) {
            std::size_t used = 0;
            const long long v = std::stoll(s, &used);
            if (used != s.size()) throw std::invalid_argument("not an integer");
            return static_cast<std::int64_t>(v);
        });
    }
    std::int64_t integer_or(const std::string& key, std::int64_t fallback) const { return has(key) ? integer(key) : fallback; }
    Rational rational(const std::string& key) const { return parse(key, [](const std::string& s) { return parse_rational(s); }); }
    Rational rational_or(const std::string& key, const Rational& fallback) const { return has(key) ? rational(key) : fallback; }

private:
    std::string name_;
    std::vector<std::pair<std::string, std::string>> entries_;
    std::map<std::string, std::size_t> index_;
};

class Document {
public:
    static Document parse(std::istream& in) {
        Document doc;
        Section* current = nullptr;
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            const std::string text = trim(hash == std::string::npos ? line : line.substr(0, hash));
            if (text.empty()) continue;
            if (text.front() == '[') {
                if (text.back() != ']') throw ConfigError("", "line " + std::to_string(lineno) + ": unterminated section header");
                const std::string name = trim(text.substr(1, text.size() - 2));
                if (name.empty()) throw ConfigError("", "line " + std::to_string(lineno) + ": empty section name");
                if (doc.has(name)) throw ConfigError(name, "section appears twice");
                current = &doc.add(name);
                continue;
            }
            const auto eq = text.find('=');
            if (eq == std::string::npos) throw ConfigError("", "line " + std::to_string(lineno) + ": expected key = value");
            const std::string key = trim(text.substr(0, eq));
            if (key.empty()) throw ConfigError("", "line " + std::to_string(lineno) + ": empty key");
            if (!current) throw ConfigError(key, "key outside any section");
            if (current->has(key)) throw ConfigError(current->qualified(key), "key appears twice");
            current->set(key, trim(text.substr(eq + 1)));
        }
        if (doc.sections_.empty()) throw ConfigError("", "config is empty");
        return doc;
    }

    static Document parse(const std::string& text) {
        std::istringstream in(text);
        return parse(in);
    }

    bool has(const std::string& name) const {
        return std::any_of(sections_.begin(), sections_.end(), [&](const Section& s) { return s.name() == name; });
    }
    const Section& section(const std::string& name) const {
        for (const auto& s : sections_)
            if (s.name() == name) return s;
        throw ConfigError(name, "missing section [" + name + "]");
    }
    Section& add(const std::string& name) {
        sections_.emplace_back(name);
        return sections_.back();
    }
    const std::deque<Section>& sections() const { return sections_; }

    void write(std::ostream& out) const {
        bool first = true;
        for (const auto& s : sections_) {
            if (!first) out << '\n';
            first = false;
            out << '[' << s.name() << "]\n";
            for (const auto& [k, v] : s.entries()) out << k << " = " << v << '\n';
        }
    }

private:
    std::deque<Section> sections_;
};

// ---------------------------------------------------------------------------
// Sets and step functions.
// ---------------------------------------------------------------------------

/// Level list with optional ranges: "0,2,5..7".
inline std::vector<Level> parse_levels(const std::string& text) {
    if (trim(text).empty()) throw std::invalid_argument("empty level list");
    std::vector<Level> out;
    for (const auto& item : split(text, ',')) {
        if (item.empty()) throw std::invalid_argument("empty level in '" + text + "'");
        const auto dots = item.find("..");
        auto num = [&](const std::string& s) {
            std::size_t used = 0;
            const long long v = std::stoll(s, &used);
            if (used != s.size() || v < 0) throw std::invalid_argument("bad level '" + s + "'");
            return static_cast<Level>(v);
        };
        if (dots == std::string::npos) {
            out.push_back(num(item));
        } else {
            const Level a = num(trim(item.substr(0, dots)));
            const Level b = num(trim(item.substr(dots + 2)));
            if (b < a) throw std::invalid_argument("empty range '" + item + "'");
            for (Level l = a; l <= b; ++l) out.push_back(l);
        }
    }
    return out;
}

/// "J:l1,l2,..." -> levels of stage J.
inline TowerSet parse_set(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw std::invalid_argument("set '" + text + "' must look like stage:levels");
    std::size_t used = 0;
    const std::string st = trim(text.substr(0, colon));
    const int stage = std::stoi(st, &used);
    if (used != st.size() || stage < 1) throw std::invalid_argument("bad stage in '" + text + "'");
    return TowerSet::of(stage, parse_levels(trim(text.substr(colon + 1))));
}

inline std::string format_levels(const std::vector<Level>& levels) {
    std::string s;
    for (std::size_t i = 0; i < levels.size();) {
        std::size_t k = i;
        while (k + 1 < levels.size() && levels[k + 1] == levels[k] + 1) ++k;
        if (!s.empty()) s += ',';
        s += std::to_string(levels[i]);
        if (k > i + 1)
            s += ".." + std::to_string(levels[k]);
        else if (k == i + 1)
            s += ',' + std::to_string(levels[k]);
        i = k + 1;
    }
    return s;
}

inline std::string format_set(const TowerSet& A) { return std::to_string(A.stage) + ":" + format_levels(A.levels); }

struct FunctionTerm {
    Rational coef;
    TowerSet set;
};

/// Signed sum of terms "[coef*]J:levels", e.g. "2:0 - 2:1" or "1/2*3:0,4 + 2:1".
inline std::vector<FunctionTerm> parse_function_terms(const std::string& text) {
    std::vector<FunctionTerm> terms;
    std::size_t i = 0;
    int sign = 1;
    bool expect_term = true;
    const std::string s = trim(text);
    if (s.empty()) throw std::invalid_argument("empty function");
    while (i < s.size()) {
        if (std::isspace(static_cast<unsigned char>(s[i]))) {
            ++i;
            continue;
        }
        if (expect_term) {
            if (s[i] == '-' || s[i] == '+') {
                if (s[i] == '-') sign = -sign;
                ++i;
                continue;
            }
            std::size_t end = i;
            // a term runs until a '+' or a '-' that follows whitespace
            while (end < s.size() && s[end] != '+' && !(s[end] == '-' && end > i && std::isspace(static_cast<unsigned char>(s[end - 1])))) ++end;
            const std::string term = trim(s.substr(i, end - i));
            const auto star = term.find('*');
            Rational coef = 1;
            std::string set = term;
            if (star != std::string::npos) {
                coef = parse_rational(trim(term.substr(0, star)));
                set = trim(term.substr(star + 1));
            }
            terms.push_back({sign * coef, parse_set(set)});
            sign = 1;
            expect_term = false;
            i = end;
        } else {
            if (s[i] != '+' && s[i] != '-') throw std::invalid_argument("expected + or - in '" + text + "'");
            sign = s[i] == '-' ? -1 : 1;
            expect_term = true;
            ++i;
        }
    }
    if (expect_term) throw std::invalid_argument("dangling operator in '" + text + "'");
    return terms;
}

inline StepFunction build_function(const Construction& c, const std::vector<FunctionTerm>& terms) {
    StepFunction f;
    bool first = true;
    for (const auto& t : terms) {
        t.set.validate(c);
        StepFunction g = scale(t.coef, StepFunction::indicator(t.set));
        g.stage = t.set.stage;
        f = first ? g : add(c, f, g);
        first = false;
    }
    return f;
}

inline StepFunction parse_function(const Construction& c, const std::string& text) { return build_function(c, parse_function_terms(text)); }

/// Residual-free step function as a sum of level sets grouped by value.
inline std::string format_function(const StepFunction& f) {
    if (!f.exact()) throw std::invalid_argument("only residual-free functions can be written out");
    std::map<Rational, std::vector<Level>> groups;
    for (const auto& [l, v] : f.values) groups[v].push_back(l);
    std::string s;
    for (const auto& [v, ls] : groups) {
        const Rational a = rankone::abs(v);
        if (s.empty())
            s += v < 0 ? "-" : "";
        else
            s += v < 0 ? " - " : " + ";
        if (a != 1) s += a.get_str() + "*";
        s += std::to_string(f.stage) + ":" + format_levels(ls);
    }
    return s.empty() ? "0*" + std::to_string(f.stage) + ":0" : s;
}

inline std::vector<std::int64_t> parse_int_list(const std::string& text) {
    std::vector<std::int64_t> out;
    if (trim(text).empty()) return out;
    for (const auto& item : split(text, ',')) {
        std::size_t used = 0;
        const long long v = std::stoll(item, &used);
        if (used != item.size()) throw std::invalid_argument("bad integer '" + item + "'");
        out.push_back(v);
    }
    return out;
}

inline std::string format_int_list(const std::vector<std::int64_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

inline std::vector<Rational> parse_rational_list(const std::string& text) {
    std::vector<Rational> out;
    for (const auto& item : split(text, ',')) out.push_back(parse_rational(item));
    return out;
}

// ---------------------------------------------------------------------------
// Presets from a section.
//
//   kind = chacon | odometer | staircase | modified_staircase | custom
//   h1 = 1                      staircase, modified_staircase, custom
//   cuts = affine:1,1           staircase, modified_staircase
//   eps = 1/2, plateau = const:2, first_stage = 1     modified_staircase
//   default = 3:0,1,0, stage.N = r:s1,..,sr            custom
// ---------------------------------------------------------------------------

inline StageParams parse_stage_params(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw std::invalid_argument("cut must look like r:s1,...,sr");
    StageParams p;
    std::size_t used = 0;
    const std::string r = trim(text.substr(0, colon));
    p.cuts = std::stoll(r, &used);
    if (used != r.size()) throw std::invalid_argument("bad column count '" + r + "'");
    p.spacers = parse_int_list(text.substr(colon + 1));
    return p;
}

inline std::string format_stage_params(const StageParams& p) { return std::to_string(p.cuts) + ":" + format_int_list(p.spacers); }

inline Preset preset_from(const Section& s) {
    static const std::vector<std::string> kinds{"chacon", "odometer", "staircase", "modified_staircase", "custom"};
    const std::string kind = s.get("kind");
    if (std::find(kinds.begin(), kinds.end(), kind) == kinds.end()) throw ConfigError(s.qualified("kind"), "unknown preset kind '" + kind + "'");
    auto schedule = [&](const std::string& key, const std::string& fallback) {
        const auto parse = [](const std::string& v) { return IntSchedule::parse(v); };
        return s.has(key) ? s.parse(key, parse) : parse(fallback);
    };
    const std::int64_t h1 = s.integer_or("h1", 1);
    if (h1 < 1) throw ConfigError(s.qualified("h1"), "initial height must be >= 1");
    try {
        if (kind == "chacon") return make_chacon();
        if (kind == "odometer") return make_odometer();
        if (kind == "staircase") return make_staircase({schedule("cuts", "affine:1,1"), h1});
        if (kind == "modified_staircase") {
            ModifiedStaircaseRule rule;
            rule.eps = s.rational_or("eps", Rational(1, 2));
            rule.cuts = schedule("cuts", "affine:1,1");
            rule.plateau = schedule("plateau", "const:0");
            rule.h1 = h1;
            rule.first_stage = static_cast<int>(s.integer_or("first_stage", 1));
            return make_modified_staircase(rule);
        }
    } catch (const ConstructionError& e) {
        throw ConfigError(s.qualified(kind == "modified_staircase" ? "plateau" : "cuts"), e.what());
    } catch (const PresetError& e) {
        throw ConfigError(s.qualified(kind == "modified_staircase" ? "eps" : "cuts"), e.what());
    }

    // custom
    const StageParams fallback = s.parse("default", parse_stage_params);
    std::map<int, StageParams> overrides;
    for (const auto& [k, v] : s.entries()) {
        if (k.rfind("stage.", 0) != 0) continue;
        const int j = s.parse(k, [&](const std::string&) {
            std::size_t used = 0;
            const std::string num = k.substr(6);
            const int v = std::stoi(num, &used);
            if (used != num.size() || v < 1) throw std::invalid_argument("bad stage index");
            return v;
        });
        overrides[j] = s.parse(k, parse_stage_params);
    }
    Preset out;
    out.kind = PresetKind::custom;
    out.params.h1 = h1;
    out.params.rule = [fallback, overrides](int j, std::int64_t) {
        auto it = overrides.find(j);
        return it == overrides.end() ? fallback : it->second;
    };
    // past the last override each stage adds S spacers of width w_j / r: the tail is geometric
    const int last = overrides.empty() ? 0 : overrides.rbegin()->first;
    const Rational S = from_int(fallback.spacer_total());
    const Rational r = from_int(fallback.cuts);
    std::vector<Rational> tail(static_cast<std::size_t>(last + 2), Rational(0));
    Rational w_last;
    try {
        Construction probe(out.params);
        probe.stage(last + 2);
        w_last = probe.width(last + 1);
        tail[static_cast<std::size_t>(last + 1)] = S * w_last / (r - 1);
        for (int j = last; j >= 1; --j)
            tail[static_cast<std::size_t>(j)] = tail[static_cast<std::size_t>(j + 1)] + probe.width(j + 1) * from_int(probe.cut(j).spacer_total());
    } catch (const ConstructionError& e) {
        throw ConfigError(s.qualified(e.stage() > last ? "default" : "stage." + std::to_string(e.stage())), e.what());
    }
    out.params.tail_spacer_mass_bound = [tail, last, S, r, w_last](int J) {
        if (J <= last + 1) return tail[static_cast<std::size_t>(J)];
        Rational w = w_last;
        for (int j = last + 1; j < J; ++j) w /= r;
        return Rational(S * w / (r - 1));
    };
    return out;
}

// ---------------------------------------------------------------------------
// Forcing certificates.
// ---------------------------------------------------------------------------

inline std::string format_enclosure(const Enclosure& e) { return e.lo().get_str() + " " + e.hi().get_str(); }

inline Enclosure parse_enclosure(const std::string& text) {
    const auto parts = split(text, ' ');
    std::vector<std::string> nonempty;
    for (const auto& p : parts)
        if (!p.empty()) nonempty.push_back(p);
    if (nonempty.size() != 2) throw std::invalid_argument("enclosure must be 'lo hi'");
    return {parse_rational(nonempty[0]), parse_rational(nonempty[1])};
}

inline Document certificate_document(const ForcingCertificate& cert) {
    Document doc;
    Section& head = doc.add("certificate");
    head.set("h1", std::to_string(cert.h1));
    head.set("cuts", cert.cuts.describe());
    head.set("psi", cert.psi.describe());
    head.set("functions", std::to_string(cert.functions.size()));
    for (std::size_t i = 0; i < cert.functions.size(); ++i) head.set("function." + std::to_string(i + 1), format_function(cert.functions[i]));
    head.set("requested_rounds", std::to_string(cert.requested_rounds));
    head.set("failed_round", cert.failed_round ? std::to_string(*cert.failed_round) : "none");
    head.set("committed_stages", std::to_string(cert.committed.size()));
    head.set("rounds", std::to_string(cert.rounds.size()));
    for (std::size_t j = 0; j < cert.committed.size(); ++j) head.set("cut." + std::to_string(j + 1), format_stage_params(cert.committed[j]));
    for (const auto& r : cert.rounds) {
        Section& s = doc.add("round." + std::to_string(r.k));
        s.set("eps", r.eps.get_str());
        s.set("stage", std::to_string(r.stage));
        s.set("plateau", std::to_string(r.plateau));
        s.set("time", std::to_string(r.time));
        s.set("working_stage", std::to_string(r.working_stage));
        s.set("psi", format_enclosure(r.psi));
        for (std::size_t i = 0; i < r.correlations.size(); ++i) s.set("correlation." + std::to_string(i + 1), format_enclosure(r.correlations[i]));
    }
    return doc;
}

inline ForcingCertificate certificate_from(const Document& doc) {
    const Section& head = doc.section("certificate");
    ForcingCertificate cert;
    cert.h1 = head.integer("h1");
    cert.cuts = head.parse("cuts", [](const std::string& v) { return IntSchedule::parse(v); });
    cert.psi = head.parse("psi", [](const std::string& v) { return DecaySchedule::parse(v); });
    cert.requested_rounds = static_cast<int>(head.integer("requested_rounds"));
    if (head.get("failed_round") != "none") cert.failed_round = static_cast<int>(head.integer("failed_round"));
    const auto committed = head.integer("committed_stages");
    for (std::int64_t j = 1; j <= committed; ++j) cert.committed.push_back(head.parse("cut." + std::to_string(j), parse_stage_params));

    // functions are stored as level sets, independent of any construction
    const auto nf = head.integer("functions");
    for (std::int64_t i = 1; i <= nf; ++i) {
        const auto terms = head.parse("function." + std::to_string(i), parse_function_terms);
        StepFunction f;
        int stage = 1;
        for (const auto& t : terms) stage = std::max(stage, t.set.stage);
        for (const auto& t : terms)
            if (t.set.stage != stage) throw ConfigError(head.qualified("function." + std::to_string(i)), "all terms must use one stage");
        f.stage = stage;
        for (const auto& t : terms)
            for (Level l : t.set.levels) f.values[l] += t.coef;
        f.drop_zeros();
        cert.functions.push_back(std::move(f));
    }

    const auto nr = head.integer("rounds");
    for (std::int64_t k = 1; k <= nr; ++k) {
        const Section& s = doc.section("round." + std::to_string(k));
        ForcingRound r;
        r.k = static_cast<int>(k);
        r.eps = s.rational("eps");
        r.stage = static_cast<int>(s.integer("stage"));
        r.plateau = s.integer("plateau");
        r.time = s.integer("time");
        r.working_stage = static_cast<int>(s.integer("working_stage"));
        r.psi = s.parse("psi", parse_enclosure);
        for (int i = 1; s.has("correlation." + std::to_string(i)); ++i) r.correlations.push_back(s.parse("correlation." + std::to_string(i), parse_enclosure));
        cert.rounds.push_back(std::move(r));
    }
    return cert;
}

}  // namespace rankone
