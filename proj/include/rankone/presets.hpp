#pragma once

// Parameter families: staircase, staircase with a plateau block, Chacon,
// the dyadic odometer, plus decay schedules psi(n).

#include "construction.hpp"
#include "enclosure.hpp"
#include "rational.hpp"

#include <mpfr.h>

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rankone {

class PresetError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Integer sequence indexed by stage: constant, affine a*j+b, an explicit table
/// (last entry repeats), or an arbitrary function of (j, h_j).
class IntSchedule {
public:
    enum class Kind { constant, affine, table, custom };

    static IntSchedule constant(std::int64_t v) { return IntSchedule(Kind::constant, 0, v, {}, {}); }
    static IntSchedule affine(std::int64_t a, std::int64_t b) {
        if (a < 0) throw PresetError("affine schedule needs a nonnegative slope");
        return IntSchedule(Kind::affine, a, b, {}, {});
    }
    static IntSchedule table(std::vector<std::int64_t> values) {
        if (values.empty()) throw PresetError("empty schedule table");
        return IntSchedule(Kind::table, 0, 0, std::move(values), {});
    }
    static IntSchedule custom(std::function<std::int64_t(int, std::int64_t)> fn) { return IntSchedule(Kind::custom, 0, 0, {}, std::move(fn)); }

    /// "const:V", "affine:A,B" or "table:V1,V2,...".
    static IntSchedule parse(const std::string& text) {
        const auto colon = text.find(':');
        if (colon == std::string::npos) throw PresetError("schedule '" + text + "' needs a kind prefix");
        const std::string kind = text.substr(0, colon);
        std::vector<std::int64_t> nums;
        std::stringstream ss(text.substr(colon + 1));
        for (std::string item; std::getline(ss, item, ',');) {
            try {
                std::size_t used = 0;
                nums.push_back(std::stoll(item, &used));
                if (used != item.size()) throw std::invalid_argument(item);
            } catch (const std::exception&) {
                throw PresetError("schedule '" + text + "' has a non-integer entry '" + item + "'");
            }
        }
        if (kind == "const" && nums.size() == 1) return constant(nums[0]);
        if (kind == "affine" && nums.size() == 2) return affine(nums[0], nums[1]);
        if (kind == "table" && !nums.empty()) return table(std::move(nums));
        throw PresetError("unrecognized schedule '" + text + "'");
    }

    Kind kind() const { return kind_; }

    std::int64_t operator()(int j, std::int64_t height = 0) const {
        switch (kind_) {
            case Kind::constant: return b_;
            case Kind::affine: return a_ * j + b_;
            case Kind::table: return table_[static_cast<std::size_t>(std::min<int>(j, static_cast<int>(table_.size())) - 1)];
            case Kind::custom: return fn_(j, height);
        }
        return 0;
    }

    /// From stage `from` on the schedule equals slope*j + intercept with slope >= 0.
    struct AffineTail {
        int from;
        std::int64_t slope;
        std::int64_t intercept;
    };
    std::optional<AffineTail> affine_tail() const {
        switch (kind_) {
            case Kind::constant: return AffineTail{1, 0, b_};
            case Kind::affine: return AffineTail{1, a_, b_};
            case Kind::table: return AffineTail{static_cast<int>(table_.size()), 0, table_.back()};
            case Kind::custom: return std::nullopt;
        }
        return std::nullopt;
    }

    bool bounded() const { return kind_ != Kind::custom && (kind_ != Kind::affine || a_ == 0); }

    std::string describe() const {
        switch (kind_) {
            case Kind::constant: return "const:" + std::to_string(b_);
            case Kind::affine: return "affine:" + std::to_string(a_) + "," + std::to_string(b_);
            case Kind::table: {
                std::string s = "table:";
                for (std::size_t i = 0; i < table_.size(); ++i) s += (i ? "," : "") + std::to_string(table_[i]);
                return s;
            }
            case Kind::custom: return "custom";
        }
        return {};
    }

private:
    IntSchedule(Kind k, std::int64_t a, std::int64_t b, std::vector<std::int64_t> t, std::function<std::int64_t(int, std::int64_t)> fn)
        : kind_(k), a_(a), b_(b), table_(std::move(t)), fn_(std::move(fn)) {}

    Kind kind_;
    std::int64_t a_ = 0;
    std::int64_t b_ = 0;
    std::vector<std::int64_t> table_;
    std::function<std::int64_t(int, std::int64_t)> fn_;
};

enum class PresetKind { staircase, modified_staircase, chacon, odometer, custom };

inline std::string to_string(PresetKind k) {
    switch (k) {
        case PresetKind::staircase: return "staircase";
        case PresetKind::modified_staircase: return "modified_staircase";
        case PresetKind::chacon: return "chacon";
        case PresetKind::odometer: return "odometer";
        case PresetKind::custom: return "custom";
    }
    return "custom";
}

struct Preset {
    PresetKind kind = PresetKind::custom;
    ConstructionParams params;
    /// v_j, for presets whose rigidity times are h_j + v_j.
    std::optional<IntSchedule> plateau;
    std::vector<std::string> notes;
};

inline std::vector<std::int64_t> staircase_spacers(std::int64_t r) {
    std::vector<std::int64_t> s(static_cast<std::size_t>(std::max<std::int64_t>(r, 0)));
    for (std::int64_t i = 0; i < r; ++i) s[static_cast<std::size_t>(i)] = i + 1;
    return s;
}

/// floor((1 - eps) * r): columns keeping the staircase spacer s(i) = i.
inline std::int64_t staircase_block(const Rational& eps, std::int64_t r) {
    Rational x = (1 - eps) * from_int(r);
    mpz_class q;
    mpz_fdiv_q(q.get_mpz_t(), x.get_num_mpz_t(), x.get_den_mpz_t());
    return q.get_si();
}

/// Largest plateau value keeping the closing spacer s(r) nonnegative, or
/// nullopt when there are no plateau columns.
inline std::optional<std::int64_t> max_plateau(const Rational& eps, std::int64_t r) {
    const std::int64_t q = staircase_block(eps, r);
    const std::int64_t plateau_columns = r - 1 - q;
    if (plateau_columns <= 0) return std::nullopt;
    return (r * (r + 1) / 2 - q * (q + 1) / 2) / plateau_columns;
}

/// s(i) = i for i <= q, s(i) = v for q < i < r, and s(r) chosen so that the
/// spacer total equals the staircase total r(r+1)/2.
inline std::vector<std::int64_t> modified_staircase_spacers(const Rational& eps, std::int64_t r, std::int64_t v, int stage = 0) {
    if (!(eps > 0 && eps < 1)) throw ConstructionError(stage, "plateau fraction must lie in (0,1), got " + eps.get_str());
    if (r < 2) throw ConstructionError(stage, "number of columns must be >= 2, got " + std::to_string(r));
    if (v < 0) throw ConstructionError(stage, "plateau spacer must be >= 0, got " + std::to_string(v));
    const std::int64_t q = staircase_block(eps, r);
    std::vector<std::int64_t> s(static_cast<std::size_t>(r));
    std::int64_t used = 0;
    for (std::int64_t i = 1; i < r; ++i) {
        s[static_cast<std::size_t>(i - 1)] = i <= q ? i : v;
        used += s[static_cast<std::size_t>(i - 1)];
    }
    const std::int64_t closing = r * (r + 1) / 2 - used;
    if (closing < 0) {
        const auto vmax = max_plateau(eps, r);
        throw ConstructionError(stage, "closing spacer s(" + std::to_string(r) + ") = " + std::to_string(closing) +
                                           " is negative; admissible plateau values are 0.." + std::to_string(vmax.value_or(0)));
    }
    s.back() = closing;
    return s;
}

namespace detail {

/// Sum over j >= J of (spacers added at stage j) * w_{j+1} for a staircase
/// spacer profile, using a geometric majorant once the ratio of consecutive
/// terms is certifiably below 1.
inline Rational staircase_tail(std::int64_t h1, const IntSchedule& cuts, int J) {
    const auto tail = cuts.affine_tail();
    if (!tail) throw std::logic_error("staircase tail needs an eventually affine schedule");
    Rational w = Rational(1) / from_int(h1);
    for (int j = 1; j < J; ++j) w /= from_int(cuts(j));
    Rational acc = 0;
    for (int j = J;; ++j) {
        const std::int64_t r = cuts(j);
        const Rational term = from_int(r + 1) * w / 2;
        if (j >= tail->from) {
            // ratio of consecutive terms is (r_{j+1}+1) / ((r_j+1) r_j), nonincreasing in j
            const Rational q = make_rational(r + tail->slope + 1, (r + 1) * r);
            if (q < 1) return acc + term / (1 - q);
        }
        acc += term;
        w /= from_int(r);
        if (j - J > 100000) throw std::logic_error("staircase tail does not contract");
    }
}

inline void check_cuts(const IntSchedule& cuts) {
    if (auto t = cuts.affine_tail()) {
        for (int j = 1; j <= t->from; ++j)
            if (cuts(j) < 2) throw PresetError("cut schedule gives r_" + std::to_string(j) + " = " + std::to_string(cuts(j)) + " < 2");
    }
}

}  // namespace detail

struct StaircaseRule {
    IntSchedule cuts = IntSchedule::affine(1, 1);
    std::int64_t h1 = 1;
};

/// Relative spacer mass (r_j+1)/(2 h_j) over the first stages; used to reject
/// custom staircases whose total mass diverges.
inline std::vector<Rational> staircase_mass_ratios(const StaircaseRule& rule, int depth) {
    std::vector<Rational> out;
    std::int64_t h = rule.h1;
    Rational w = Rational(1) / from_int(rule.h1);
    Rational mass = 1;
    for (int j = 1; j <= depth; ++j) {
        const std::int64_t r = rule.cuts(j, h);
        if (r < 2) throw PresetError("cut schedule gives r_" + std::to_string(j) + " = " + std::to_string(r) + " < 2");
        // staircase spacers total r(r+1)/2 levels of width w/r
        const Rational added = from_int(r + 1) * w / 2;
        out.push_back(added / mass);
        mass += added;
        w /= from_int(r);
        const __int128 next = static_cast<__int128>(h) * r + static_cast<__int128>(r) * (r + 1) / 2;
        if (next > std::numeric_limits<std::int64_t>::max()) break;
        h = static_cast<std::int64_t>(next);
    }
    return out;
}

inline Preset make_staircase(const StaircaseRule& rule) {
    detail::check_cuts(rule.cuts);
    Preset out;
    out.kind = PresetKind::staircase;
    out.params.h1 = rule.h1;
    out.params.rule = [cuts = rule.cuts](int j, std::int64_t h) {
        const std::int64_t r = cuts(j, h);
        return StageParams{r, staircase_spacers(r)};
    };
    if (rule.cuts.affine_tail()) {
        out.params.tail_spacer_mass_bound = [h1 = rule.h1, cuts = rule.cuts](int J) { return detail::staircase_tail(h1, cuts, J); };
    } else {
        const auto ratios = staircase_mass_ratios(rule, 8);
        if (ratios.size() >= 3 && std::all_of(ratios.end() - 3, ratios.end(), [](const Rational& x) { return x >= Rational(1, 4); }))
            throw PresetError("staircase total mass diverges: relative spacer mass stays >= 1/4 (last " + to_decimal(ratios.back(), 4) + ")");
        out.notes.push_back("custom column schedule: no tail bound, total mass known only from below");
    }
    if (rule.cuts.bounded()) out.notes.push_back("bounded column counts: staircase mixing needs r_j -> infinity");
    return out;
}

struct ModifiedStaircaseRule {
    Rational eps{1, 2};
    IntSchedule cuts = IntSchedule::affine(1, 1);
    IntSchedule plateau = IntSchedule::constant(0);
    std::int64_t h1 = 1;
    /// Stages below this one use plain staircase spacers.
    int first_stage = 1;
};

/// Plateau construction; heights match the staircase with the same cuts at every stage.
inline Preset make_modified_staircase(const ModifiedStaircaseRule& rule, int validate_depth = 6) {
    if (!(rule.eps > 0 && rule.eps < 1)) throw PresetError("plateau fraction must lie in (0,1), got " + rule.eps.get_str());
    detail::check_cuts(rule.cuts);
    Preset out;
    out.kind = PresetKind::modified_staircase;
    out.plateau = rule.plateau;
    out.params.h1 = rule.h1;
    out.params.rule = [rule](int j, std::int64_t h) {
        const std::int64_t r = rule.cuts(j, h);
        if (j < rule.first_stage) return StageParams{r, staircase_spacers(r)};
        return StageParams{r, modified_staircase_spacers(rule.eps, r, rule.plateau(j, h), j)};
    };
    if (rule.cuts.affine_tail())
        out.params.tail_spacer_mass_bound = [h1 = rule.h1, cuts = rule.cuts](int J) { return detail::staircase_tail(h1, cuts, J); };
    Construction probe(out.params);
    for (int j = 1; j <= validate_depth; ++j) {
        try {
            probe.stage(j + 1);
        } catch (const ConstructionError& e) {
            if (std::string(e.what()).find("overflow") != std::string::npos) break;
            throw;
        }
    }
    if (rule.cuts.bounded()) out.notes.push_back("bounded column counts: mixing needs r_j -> infinity");
    return out;
}

inline Preset make_chacon() {
    Preset out;
    out.kind = PresetKind::chacon;
    out.params.h1 = 1;
    out.params.rule = [](int, std::int64_t) { return StageParams{3, {0, 1, 0}}; };
    // one spacer of width 3^{-j} per stage: sum_{j>=J} 3^{-j} = 3^{1-J}/2
    out.params.tail_spacer_mass_bound = [](int J) {
        mpz_class p;
        mpz_ui_pow_ui(p.get_mpz_t(), 3, static_cast<unsigned long>(J - 1));
        return Rational(mpz_class(1), 2 * p);
    };
    return out;
}

inline Preset make_odometer() {
    Preset out;
    out.kind = PresetKind::odometer;
    out.params.h1 = 1;
    out.params.rule = [](int, std::int64_t) { return StageParams{2, {0, 0}}; };
    out.params.tail_spacer_mass_bound = [](int) { return Rational(0); };
    return out;
}

struct StructuredTime {
    int stage;
    std::int64_t time;
};

/// Rigidity candidate times: h_j + v_j for plateau presets, h_j for Chacon and the odometer.
inline std::vector<StructuredTime> structured_times(const Construction& c, const Preset& preset, int j_lo, int j_hi) {
    std::vector<StructuredTime> out;
    for (int j = j_lo; j <= j_hi; ++j) {
        const std::int64_t h = c.height(j);
        switch (preset.kind) {
            case PresetKind::modified_staircase: out.push_back({j, h + (*preset.plateau)(j, h)}); break;
            case PresetKind::chacon:
            case PresetKind::odometer: out.push_back({j, h}); break;
            default: throw PresetError("no structured times for preset kind '" + to_string(preset.kind) + "'");
        }
    }
    return out;
}

/// Stages below P follow `head`, later stages follow `tail`.
inline ConstructionParams splice(const ConstructionParams& head, const ConstructionParams& tail, int P, std::optional<TailMassBound> bound = std::nullopt) {
    if (head.h1 != tail.h1) throw PresetError("spliced constructions need the same initial height");
    ConstructionParams out;
    out.h1 = head.h1;
    out.rule = [h = head.rule, t = tail.rule, P](int j, std::int64_t height) { return j < P ? h(j, height) : t(j, height); };
    out.tail_spacer_mass_bound = std::move(bound);
    return out;
}

/// Explicit cutting data for stages 1..prefix.size(), then `continuation`.
inline ConstructionParams with_prefix(std::int64_t h1, std::vector<StageParams> prefix, StageRule continuation, std::optional<TailMassBound> bound = std::nullopt) {
    ConstructionParams out;
    out.h1 = h1;
    out.rule = [prefix = std::move(prefix), cont = std::move(continuation)](int j, std::int64_t h) {
        return static_cast<std::size_t>(j) <= prefix.size() ? prefix[static_cast<std::size_t>(j - 1)] : cont(j, h);
    };
    out.tail_spacer_mass_bound = std::move(bound);
    return out;
}

// ---------------------------------------------------------------------------
// Decay schedules psi(n) -> 0, evaluated as certified rational enclosures.
// ---------------------------------------------------------------------------

namespace detail {

inline Rational mpfr_to_rational(const mpfr_t x) {
    Rational q;
    mpfr_get_q(q.get_mpq_t(), x);
    return q;
}

class MpfrValue {
public:
    explicit MpfrValue(mpfr_prec_t prec = 128) { mpfr_init2(v_, prec); }
    ~MpfrValue() { mpfr_clear(v_); }
    MpfrValue(const MpfrValue&) = delete;
    MpfrValue& operator=(const MpfrValue&) = delete;
    mpfr_ptr get() { return v_; }

private:
    mpfr_t v_;
};

}  // namespace detail

class DecaySchedule {
public:
    enum class Kind { inverse_log, power, table };

    /// 1 / ln(n + 2)
    static DecaySchedule inverse_log() { return DecaySchedule(Kind::inverse_log, 0, {}); }
    /// n^(-p), p > 0 rational
    static DecaySchedule power(Rational p) {
        if (p <= 0) throw PresetError("power schedule needs p > 0");
        return DecaySchedule(Kind::power, std::move(p), {});
    }
    /// psi(n) = values[n-1]; the last entry repeats.
    static DecaySchedule table(std::vector<Rational> values) {
        if (values.empty()) throw PresetError("empty decay table");
        for (const auto& v : values)
            if (v <= 0) throw PresetError("decay table entries must be positive");
        return DecaySchedule(Kind::table, 0, std::move(values));
    }

    /// "inverse-log", "power:P" or "table:V1,V2,...".
    static DecaySchedule parse(const std::string& text) {
        if (text == "inverse-log") return inverse_log();
        if (text.rfind("power:", 0) == 0) return power(parse_rational(text.substr(6)));
        if (text.rfind("table:", 0) == 0) {
            std::vector<Rational> vals;
            std::stringstream ss(text.substr(6));
            for (std::string item; std::getline(ss, item, ',');) vals.push_back(parse_rational(item));
            return table(std::move(vals));
        }
        throw PresetError("unrecognized decay schedule '" + text + "'");
    }

    Kind kind() const { return kind_; }

    std::string describe() const {
        switch (kind_) {
            case Kind::inverse_log: return "inverse-log";
            case Kind::power: return "power:" + p_.get_str();
            case Kind::table: {
                std::string s = "table:";
                for (std::size_t i = 0; i < table_.size(); ++i) s += (i ? "," : "") + table_[i].get_str();
                return s;
            }
        }
        return {};
    }

    /// Certified enclosure of psi(n); n < 1 is evaluated at n = 1.
    Enclosure at(std::int64_t n) const {
        n = std::max<std::int64_t>(n, 1);
        switch (kind_) {
            case Kind::table: return Enclosure(table_[static_cast<std::size_t>(std::min<std::int64_t>(n, static_cast<std::int64_t>(table_.size())) - 1)]);
            case Kind::inverse_log: {
                detail::MpfrValue lo, hi;
                mpfr_set_si(lo.get(), n + 2, MPFR_RNDN);
                mpfr_set_si(hi.get(), n + 2, MPFR_RNDN);
                mpfr_log(lo.get(), lo.get(), MPFR_RNDD);
                mpfr_log(hi.get(), hi.get(), MPFR_RNDU);
                return {1 / detail::mpfr_to_rational(hi.get()), 1 / detail::mpfr_to_rational(lo.get())};
            }
            case Kind::power: {
                const mpz_class a = p_.get_num();
                const mpz_class b = p_.get_den();
                mpz_class base;
                mpz_pow_ui(base.get_mpz_t(), mpz_class(std::to_string(n)).get_mpz_t(), a.get_ui());
                if (b == 1) return Enclosure(Rational(mpz_class(1), base));
                detail::MpfrValue lo, hi;
                mpfr_set_z(lo.get(), base.get_mpz_t(), MPFR_RNDD);
                mpfr_set_z(hi.get(), base.get_mpz_t(), MPFR_RNDU);
                mpfr_rootn_ui(lo.get(), lo.get(), b.get_ui(), MPFR_RNDD);
                mpfr_rootn_ui(hi.get(), hi.get(), b.get_ui(), MPFR_RNDU);
                return {1 / detail::mpfr_to_rational(hi.get()), 1 / detail::mpfr_to_rational(lo.get())};
            }
        }
        return {};
    }

private:
    DecaySchedule(Kind k, Rational p, std::vector<Rational> t) : kind_(k), p_(std::move(p)), table_(std::move(t)) {}

    Kind kind_;
    Rational p_;
    std::vector<Rational> table_;
};

}  // namespace rankone
