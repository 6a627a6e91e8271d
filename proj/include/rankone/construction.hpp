#pragma once

// Tower hierarchy of a rank-one (cutting-and-stacking) transformation.
//
// Stage j is a tower of h_j disjoint levels of common width w_j; T moves each
// level onto the next one, except the top level where T is not yet defined.
// Stage j is cut into r_j columns, s_j(i) spacer levels are put on top of
// column i and the columns are stacked left to right into stage j+1.

#include "enclosure.hpp"
#include "rational.hpp"

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rankone {

/// Cutting data applied to one stage: r_j columns and spacers s_j(1..r_j).
struct StageParams {
    std::int64_t cuts = 2;
    std::vector<std::int64_t> spacers;

    std::int64_t spacer_total() const { return std::accumulate(spacers.begin(), spacers.end(), std::int64_t{0}); }
    friend bool operator==(const StageParams&, const StageParams&) = default;
};

/// rule(j, h_j) gives the cutting data for stage j. Rules may look at the
/// current height; they must be deterministic.
using StageRule = std::function<StageParams(int j, std::int64_t height)>;

/// J -> upper bound for the mass of all spacers added from stage J on.
using TailMassBound = std::function<Rational(int J)>;

struct ConstructionParams {
    std::int64_t h1 = 1;
    StageRule rule;
    std::optional<TailMassBound> tail_spacer_mass_bound;
};

struct Stage {
    int index = 1;
    std::int64_t height = 1;
    Rational width;
    /// Start level (in this stage) of each column of stage index-1. Empty for stage 1.
    std::vector<Level> offsets;
    Rational total_mass;
};

class ConstructionError : public std::runtime_error {
public:
    ConstructionError(int stage, const std::string& what)
        : std::runtime_error("stage " + std::to_string(stage) + ": " + what), stage_(stage) {}
    int stage() const { return stage_; }

private:
    int stage_;
};

/// Lower bound and, when a tail bound is known, upper bound on mu(X).
struct TotalMass {
    Rational lo;
    std::optional<Rational> hi;

    bool known() const { return hi.has_value(); }
    Enclosure enclosure() const {
        if (!hi) throw std::logic_error("total mass has no upper bound");
        return {lo, *hi};
    }
};

/// Lazily materialized stage hierarchy. Stages are append-only and the rule is
/// consulted once per stage; concurrent readers are safe, growth is serialized.
class Construction {
public:
    explicit Construction(ConstructionParams params) : params_(std::move(params)), lock_(std::make_unique<std::shared_mutex>()) {
        if (params_.h1 < 1) throw ConstructionError(1, "initial height must be >= 1, got " + std::to_string(params_.h1));
        if (!params_.rule) throw ConstructionError(1, "missing stage rule");
        Stage first;
        first.index = 1;
        first.height = params_.h1;
        first.width = Rational(1, 1) / from_int(params_.h1);
        first.width.canonicalize();
        first.total_mass = 1;
        stages_.push_back(std::move(first));
    }

    const ConstructionParams& params() const { return params_; }

    const Stage& stage(int j) const {
        if (j < 1) throw std::out_of_range("stage index must be >= 1");
        {
            std::shared_lock read(*lock_);
            if (static_cast<std::size_t>(j) <= stages_.size()) return stages_[static_cast<std::size_t>(j - 1)];
        }
        std::unique_lock write(*lock_);
        while (stages_.size() < static_cast<std::size_t>(j)) grow();
        return stages_[static_cast<std::size_t>(j - 1)];
    }

    /// Cutting data used to pass from stage j to stage j+1.
    const StageParams& cut(int j) const {
        stage(j + 1);
        std::shared_lock read(*lock_);
        return cuts_[static_cast<std::size_t>(j - 1)];
    }

    std::int64_t height(int j) const { return stage(j).height; }
    const Rational& width(int j) const { return stage(j).width; }

    /// Stages currently materialized.
    int materialized() const {
        std::shared_lock read(*lock_);
        return static_cast<int>(stages_.size());
    }

private:
    // Called with the write lock held.
    void grow() const {
        const Stage& cur = stages_.back();
        const int j = cur.index;
        StageParams p = params_.rule(j, cur.height);
        if (p.cuts < 2) throw ConstructionError(j, "number of columns must be >= 2, got " + std::to_string(p.cuts));
        if (static_cast<std::int64_t>(p.spacers.size()) != p.cuts)
            throw ConstructionError(j, "expected " + std::to_string(p.cuts) + " spacer counts, got " + std::to_string(p.spacers.size()));
        for (std::size_t i = 0; i < p.spacers.size(); ++i)
            if (p.spacers[i] < 0)
                throw ConstructionError(j, "negative spacer count s(" + std::to_string(i + 1) + ") = " + std::to_string(p.spacers[i]));

        Stage next;
        next.index = j + 1;
        next.offsets.reserve(p.spacers.size());
        std::int64_t at = 0;
        for (std::int64_t s : p.spacers) {
            next.offsets.push_back(at);
            if (__builtin_add_overflow(at, cur.height, &at) || __builtin_add_overflow(at, s, &at))
                throw ConstructionError(j + 1, "height overflows 64 bits");
        }
        next.height = at;
        next.width = cur.width / from_int(p.cuts);
        next.total_mass = cur.total_mass + next.width * from_int(p.spacer_total());
        cuts_.push_back(std::move(p));
        stages_.push_back(std::move(next));
    }

    ConstructionParams params_;
    std::unique_ptr<std::shared_mutex> lock_;
    mutable std::deque<Stage> stages_;
    mutable std::deque<StageParams> cuts_;
};

inline Construction build(ConstructionParams params) { return Construction(std::move(params)); }

/// Levels of stage j+1 that make up level l of stage j, ascending.
inline std::vector<Level> refine_level(const Construction& c, int j, Level l) {
    const Stage& s = c.stage(j);
    if (l < 0 || l >= s.height)
        throw std::out_of_range("level " + std::to_string(l) + " outside stage " + std::to_string(j) + " of height " + std::to_string(s.height));
    const Stage& next = c.stage(j + 1);
    std::vector<Level> out;
    out.reserve(next.offsets.size());
    for (Level o : next.offsets) out.push_back(o + l);
    return out;
}

/// Levels of stage j+1 that are spacers added while cutting stage j.
inline std::vector<Level> spacer_levels(const Construction& c, int j) {
    const Stage& s = c.stage(j);
    const Stage& next = c.stage(j + 1);
    const StageParams& p = c.cut(j);
    std::vector<Level> out;
    out.reserve(static_cast<std::size_t>(p.spacer_total()));
    for (std::size_t i = 0; i < next.offsets.size(); ++i)
        for (std::int64_t k = 0; k < p.spacers[i]; ++k) out.push_back(next.offsets[i] + s.height + k);
    return out;
}

inline TotalMass total_mass_enclosure(const Construction& c, int J) {
    const Stage& s = c.stage(J);
    TotalMass m{s.total_mass, std::nullopt};
    if (c.params().tail_spacer_mass_bound) m.hi = s.total_mass + (*c.params().tail_spacer_mass_bound)(J);
    return m;
}

}  // namespace rankone
