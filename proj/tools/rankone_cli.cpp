// Batch front end: reads a construction config, runs one experiment, writes
// CSV tables (exact rational columns plus decimal columns) into --out-dir.

#include <rankone/rankone.hpp>

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

using namespace rankone;
namespace fs = std::filesystem;

namespace {

enum Exit { ok = 0, verify_failed = 1, config_error = 2, budget_exhausted = 3, internal_error = 4 };

struct Globals {
    std::string config;
    std::string out_dir = ".";
    std::string tol;
    int max_stage = 0;
    unsigned threads = 1;
    std::string verify;
};

/// A failure that is the user's input rather than a bug.
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class Csv {
public:
    Csv(const fs::path& path, const std::vector<std::string>& header) : out_(path, std::ios::binary) {
        if (!out_) throw InputError("cannot write " + path.string());
        row(header);
    }
    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
        out_ << "\n";
    }

private:
    std::ofstream out_;
};

std::string dec(const Rational& x) { return to_decimal(x, 12); }

/// name_lo, name_hi, name_lo_dec, name_hi_dec
std::vector<std::string> enclosure_columns(const std::string& name) { return {name + "_lo", name + "_hi", name + "_lo_dec", name + "_hi_dec"}; }

std::vector<std::string> enclosure_cells(const Enclosure& e) { return {e.lo().get_str(), e.hi().get_str(), dec(e.lo()), dec(e.hi())}; }

template <class... Parts>
std::vector<std::string> cat(Parts&&... parts) {
    std::vector<std::string> out;
    (out.insert(out.end(), parts.begin(), parts.end()), ...);
    return out;
}

std::vector<std::string> cells(std::initializer_list<std::string> xs) { return xs; }

Document load(const Globals& g) {
    if (g.config.empty()) throw ConfigError("", "no --config given");
    std::ifstream in(g.config);
    if (!in) throw ConfigError("", "cannot read config '" + g.config + "'");
    return Document::parse(in);
}

const Section& experiment(const Document& doc) {
    static const Section empty("experiment");
    return doc.has("experiment") ? doc.section("experiment") : empty;
}

Rational tol_of(const Globals& g, const Section& ex) {
    const Rational t = g.tol.empty() ? ex.rational_or("tol", Rational(1, 1000)) : [&] {
        try {
            return parse_rational(g.tol);
        } catch (const std::exception& e) {
            throw ConfigError("--tol", e.what());
        }
    }();
    if (t <= 0) throw ConfigError(g.tol.empty() ? "experiment.tol" : "--tol", "tolerance must be positive");
    return t;
}

Budget budget_of(const Globals& g, const Section& ex) {
    Budget b;
    b.max_stage = g.max_stage > 0 ? g.max_stage : static_cast<int>(ex.integer_or("max_stage", b.max_stage));
    if (b.max_stage < 1) throw ConfigError("experiment.max_stage", "must be >= 1");
    const std::int64_t lv = ex.integer_or("max_levels", static_cast<std::int64_t>(b.max_levels));
    if (lv < 1) throw ConfigError("experiment.max_levels", "must be >= 1");
    b.max_levels = static_cast<std::size_t>(lv);
    return b;
}

ScanOptions scan_options(const Globals& g, const Section& ex) {
    ScanOptions o;
    o.tol = tol_of(g, ex);
    o.budget = budget_of(g, ex);
    o.threads = std::max(1u, g.threads);
    return o;
}

bool parse_bool(const std::string& s) {
    if (s == "true" || s == "yes" || s == "1") return true;
    if (s == "false" || s == "no" || s == "0") return false;
    throw std::invalid_argument("expected true or false");
}

TowerSet set_key(const Section& s, const std::string& key, const Construction& c) {
    const TowerSet A = s.parse(key, [](const std::string& v) { return parse_set(v); });
    try {
        A.validate(c);
    } catch (const std::exception& e) {
        throw ConfigError(s.qualified(key), e.what());
    }
    return A;
}

StepFunction function_key(const Section& s, const std::string& key, const Construction& c) {
    return s.parse(key, [&](const std::string& v) { return parse_function(c, v); });
}

std::int64_t positive_key(const Section& s, const std::string& key, std::int64_t fallback, std::int64_t min = 1) {
    const std::int64_t v = s.integer_or(key, fallback);
    if (v < min) throw ConfigError(s.qualified(key), "must be >= " + std::to_string(min));
    return v;
}

fs::path out_file(const Globals& g, const std::string& name) {
    fs::create_directories(g.out_dir);
    return fs::path(g.out_dir) / name;
}

// ---------------------------------------------------------------------------

int run_describe(const Globals& g) {
    const Document doc = load(g);
    const Preset p = preset_from(doc.section("preset"));
    Construction c(p.params);
    const int stages = static_cast<int>(positive_key(experiment(doc), "stages", 6));
    Csv csv(out_file(g, "describe.csv"), {"j", "h", "w", "mass", "w_dec", "mass_dec", "cuts", "spacers"});
    for (int j = 1; j <= stages; ++j) {
        const StageParams& cut = c.cut(j);
        csv.row({std::to_string(j), std::to_string(c.height(j)), c.width(j).get_str(), c.stage(j).total_mass.get_str(), dec(c.width(j)),
                 dec(c.stage(j).total_mass), std::to_string(cut.cuts), "\"" + format_int_list(cut.spacers) + "\""});
    }
    const TotalMass m = total_mass_enclosure(c, stages);
    std::cout << to_string(p.kind) << ": " << stages << " stages, mu(X) in [" << dec(m.lo) << ", " << (m.hi ? dec(*m.hi) : std::string("unbounded")) << "]\n";
    for (const auto& note : p.notes) std::cout << "note: " << note << "\n";
    return ok;
}

int run_correlate(const Globals& g) {
    const Document doc = load(g);
    Construction c(preset_from(doc.section("preset")).params);
    const Section& ex = doc.section("experiment");
    const StepFunction f = function_key(ex, "function", c);
    const bool centered = ex.parse_or("centered", parse_bool, true);
    const DecaySchedule psi = ex.parse_or("psi", [](const std::string& s) { return DecaySchedule::parse(s); }, DecaySchedule::power(1));
    const std::int64_t n_max = positive_key(ex, "n_max", 0, 0);
    const ScanOptions opt = scan_options(g, ex);
    const DecayScan scan = decay_scan(c, Observable::from(f, centered), psi, n_max, opt);

    Csv csv(out_file(g, "correlate.csv"), cat(cells({"n"}), enclosure_columns("corr"), enclosure_columns("psi"), cells({"verdict", "stage", "converged"})));
    bool all_converged = true;
    for (const auto& r : scan.rows) {
        csv.row(cat(cells({std::to_string(r.n)}), enclosure_cells(r.correlation), enclosure_cells(r.psi),
                    cells({to_string(r.verdict), std::to_string(r.stage), r.converged ? "1" : "0"})));
        all_converged = all_converged && r.converged;
    }
    std::cout << "psi " << psi.describe() << ", " << scan.exceedances.size() << " exceedances\n";
    return all_converged ? ok : budget_exhausted;
}

int run_rigidity(const Globals& g) {
    const Document doc = load(g);
    const Preset p = preset_from(doc.section("preset"));
    Construction c(p.params);
    const Section& ex = doc.section("experiment");
    const StepFunction f = function_key(ex, "function", c);
    std::vector<StructuredTime> times;
    if (ex.has("times")) {
        for (std::int64_t t : ex.parse("times", parse_int_list)) times.push_back({0, t});
    } else {
        const int lo = static_cast<int>(positive_key(ex, "j_lo", 2));
        const int hi = static_cast<int>(positive_key(ex, "j_hi", 5));
        if (hi < lo) throw ConfigError("experiment.j_hi", "must be >= j_lo");
        try {
            times = structured_times(c, p, lo, hi);
        } catch (const PresetError& e) {
            throw ConfigError("experiment.times", e.what());
        }
    }
    const std::optional<Rational> target = ex.has("target") ? std::optional<Rational>(ex.rational("target")) : std::nullopt;
    const ScanOptions opt = scan_options(g, ex);
    const RigidityScan scan = rigidity_scan(c, Observable::from(f, true), times, opt);

    auto header = cat(cells({"stage", "time"}), enclosure_columns("corr"), enclosure_columns("ratio"), cells({"working_stage", "converged"}));
    if (target) header.push_back("gap");
    Csv csv(out_file(g, "rigidity.csv"), header);
    bool all_converged = true;
    for (const auto& r : scan.rows) {
        auto row = cat(cells({std::to_string(r.stage), std::to_string(r.time)}), enclosure_cells(r.correlation),
                       r.ratio ? enclosure_cells(*r.ratio) : std::vector<std::string>(4, ""), cells({std::to_string(r.working_stage), r.converged ? "1" : "0"}));
        if (target) {
            const auto gap = rigidity_gap(r, *target);
            row.push_back(gap ? dec(*gap) : "");
        }
        csv.row(row);
        all_converged = all_converged && r.converged;
    }
    std::cout << "variance [" << dec(scan.variance.lo()) << ", " << dec(scan.variance.hi()) << "], " << scan.rows.size() << " times\n";
    return all_converged ? ok : budget_exhausted;
}

int run_mild(const Globals& g) {
    const Document doc = load(g);
    Construction c(preset_from(doc.section("preset")).params);
    const Section& ex = doc.section("experiment");
    const TowerSet A = set_key(ex, "set", c);
    const std::int64_t k_max = positive_key(ex, "k_max", 100);
    const Rational theta = ex.rational_or("theta", Rational(1, 100));
    const ScanOptions opt = scan_options(g, ex);
    MildMixingScan scan;
    try {
        scan = mild_mixing_scan(c, A, k_max, theta, opt);
    } catch (const std::invalid_argument& e) {
        throw ConfigError("experiment.set", e.what());
    }
    Csv csv(out_file(g, "mild.csv"), cat(cells({"k"}), enclosure_columns("distance"), cells({"candidate"})));
    bool all_converged = true;
    for (const auto& [k, d] : scan.distances) {
        csv.row(cat(cells({std::to_string(k)}), enclosure_cells(d), cells({d.hi() < theta ? "1" : "0"})));
        all_converged = all_converged && d.width() <= opt.tol;
    }
    std::cout << scan.candidates.size() << " candidates below " << theta << "; minimum distance ";
    if (scan.minimum) std::cout << "[" << dec(scan.minimum->lo()) << ", " << dec(scan.minimum->hi()) << "] at k = " << scan.argmin << "\n";
    else std::cout << "none\n";
    return all_converged ? ok : budget_exhausted;
}

int run_cesaro(const Globals& g) {
    const Document doc = load(g);
    Construction c(preset_from(doc.section("preset")).params);
    const Section& ex = doc.section("experiment");
    const TowerSet A = set_key(ex, "set", c);
    const auto k_seq = ex.parse("times", parse_int_list);
    if (k_seq.empty()) throw ConfigError("experiment.times", "needs at least one time");
    std::vector<CorrelationResult> e;
    try {
        e = cesaro_check(c, A, k_seq, scan_options(g, ex));
    } catch (const std::invalid_argument& err) {
        throw ConfigError("experiment.set", err.what());
    }
    Csv csv(out_file(g, "cesaro.csv"), cat(cells({"N", "k_N"}), enclosure_columns("e"), cells({"stage", "converged"})));
    bool all_converged = true;
    for (std::size_t i = 0; i < e.size(); ++i) {
        csv.row(cat(cells({std::to_string(i + 1), std::to_string(k_seq[i])}), enclosure_cells(e[i].value), cells({std::to_string(e[i].stage), e[i].converged ? "1" : "0"})));
        all_converged = all_converged && e[i].converged;
    }
    std::cout << "e_" << e.size() << " <= " << dec(e.back().value.hi()) << "\n";
    return all_converged ? ok : budget_exhausted;
}

int run_metrics(const Globals& g) {
    const Document doc = load(g);
    Construction S(preset_from(doc.section("preset")).params);
    Construction T(preset_from(doc.section("compare")).params);
    const Section& ex = experiment(doc);
    const int P = static_cast<int>(positive_key(ex, "P", 1));
    const int D = static_cast<int>(positive_key(ex, "D", 8));
    const int N = static_cast<int>(positive_key(ex, "N", 4));
    MetricOptions opt;
    opt.tol = tol_of(g, ex);
    opt.budget = budget_of(g, ex);
    MetricBound r;
    try {
        r = at_metric_lower(S, T, P, D, N, opt);
    } catch (const PrefixMismatch& e) {
        throw ConfigError("experiment.P", e.what());
    }
    Csv csv(out_file(g, "metrics.csv"), cat(cells({"quantity", "n"}), enclosure_columns("value")));
    csv.row(cat(cells({"rho", ""}), enclosure_cells(r.rho)));
    for (std::size_t n = 0; n < r.dw.size(); ++n) csv.row(cat(cells({"d_w", std::to_string(n + 1)}), enclosure_cells(r.dw[n])));
    csv.row(cat(cells({"r_lower", ""}), enclosure_cells(r.value)));
    std::cout << "rho [" << dec(r.rho.lo()) << ", " << dec(r.rho.hi()) << "]; r >= " << dec(r.value.lo()) << " (powers 1.." << N << " only)\n";
    return ok;
}

void write_report(std::ostream& out, const ForcingCertificate& cert, const VerificationReport* check) {
    out << "forcing certificate\n";
    out << "  h1 = " << cert.h1 << ", cuts " << cert.cuts.describe() << ", psi " << cert.psi.describe() << "\n";
    for (std::size_t i = 0; i < cert.functions.size(); ++i) out << "  f" << i + 1 << " = " << format_function(cert.functions[i]) << "\n";
    out << "  rounds " << cert.rounds.size() << "/" << cert.requested_rounds;
    if (cert.failed_round) out << ", round " << *cert.failed_round << " not certified within budget";
    out << "\n";
    for (const auto& r : cert.rounds) {
        out << "round " << r.k << ": eps " << r.eps << ", plateau stage " << r.stage << ", v " << r.plateau << ", m " << r.time << ", working stage "
            << r.working_stage << ", psi(m) <= " << dec(r.psi.hi()) << "\n";
        for (std::size_t i = 0; i < r.correlations.size(); ++i) {
            const Enclosure& e = r.correlations[i];
            out << "  (T^m f" << i + 1 << ", f" << i + 1 << ") in [" << e.lo() << ", " << e.hi() << "] ~ [" << dec(e.lo()) << ", " << dec(e.hi())
                << "], |.| > psi(m): " << (e.abs().lo() > r.psi.hi() ? "yes" : "no") << "\n";
        }
        if (check) {
            for (const auto& rc : check->rounds)
                if (rc.k == r.k) out << "  re-verification: " << (rc.pass ? "PASS" : "FAIL") << (rc.reason.empty() ? "" : " (" + rc.reason + ")") << "\n";
        }
    }
}

int run_verify(const Globals& g) {
    std::ifstream in(g.verify);
    if (!in) throw ConfigError("--verify", "cannot read '" + g.verify + "'");
    const ForcingCertificate cert = certificate_from(Document::parse(in));
    const VerificationReport report = verify_certificate(cert);
    Csv csv(out_file(g, "verify.csv"), {"round", "pass", "reason"});
    for (const auto& rc : report.rounds) csv.row({std::to_string(rc.k), rc.pass ? "PASS" : "FAIL", rc.reason});
    std::ofstream rep(out_file(g, "verify_report.txt"), std::ios::binary);
    write_report(rep, cert, &report);
    for (const auto& rc : report.rounds) std::cout << "round " << rc.k << ": " << (rc.pass ? "PASS" : "FAIL") << "\n";
    return report.all_pass() && !report.rounds.empty() ? ok : verify_failed;
}

int run_force(const Globals& g) {
    if (!g.verify.empty()) return run_verify(g);
    const Document doc = load(g);
    const Section& s = doc.section("force");
    ForcingProblem p;
    p.h1 = positive_key(s, "h1", 1);
    p.cuts = s.parse_or("cuts", [](const std::string& v) { return IntSchedule::parse(v); }, p.cuts);
    p.plateau = s.parse_or("plateau", [](const std::string& v) { return IntSchedule::parse(v); }, p.plateau);
    p.psi = s.parse_or("psi", [](const std::string& v) { return DecaySchedule::parse(v); }, p.psi);
    if (s.has("eps")) p.eps = s.parse("eps", parse_rational_list);
    for (const Rational& e : p.eps)
        if (!(e > 0 && e < 1)) throw ConfigError("force.eps", "entries must lie in (0,1)");
    p.rounds = static_cast<int>(positive_key(s, "rounds", 1, 0));
    p.max_candidates = static_cast<int>(positive_key(s, "max_candidates", p.max_candidates));
    p.budget = budget_of(g, s);
    if (g.max_stage <= 0 && !s.has("max_stage")) p.budget.max_stage = 8;

    Construction probe(with_prefix(p.h1, {}, detail::staircase_rule(p.cuts)));
    for (int i = 1; s.has("function." + std::to_string(i)); ++i) p.functions.push_back(function_key(s, "function." + std::to_string(i), probe));
    if (p.functions.empty()) throw ConfigError("force.function.1", "missing required key");
    for (std::size_t i = 0; i < p.functions.size(); ++i)
        if (p.functions[i].values.empty()) throw ConfigError("force.function." + std::to_string(i + 1), "function is zero");

    const ForcingCertificate cert = force_slow_decay(p);
    {
        std::ofstream dump(out_file(g, "certificate.conf"), std::ios::binary);
        certificate_document(cert).write(dump);
    }
    std::ofstream rep(out_file(g, "force_report.txt"), std::ios::binary);
    write_report(rep, cert, nullptr);
    write_report(std::cout, cert, nullptr);
    return cert.complete() ? ok : budget_exhausted;
}

int run_oracle_check(const Globals& g) {
    const Document doc = load(g);
    const Preset preset = preset_from(doc.section("preset"));
    Construction c(preset.params);
    const Section& ex = experiment(doc);
    const int J = static_cast<int>(positive_key(ex, "stage", 4));
    const std::int64_t n_max = positive_key(ex, "n_max", 20, 0);
    std::vector<std::pair<TowerSet, TowerSet>> pairs;
    if (ex.has("set_a") || ex.has("set_b")) {
        pairs.emplace_back(set_key(ex, "set_a", c), set_key(ex, "set_b", c));
        if (std::max(pairs[0].first.stage, pairs[0].second.stage) > J) throw ConfigError("experiment.stage", "must be >= the stages of set_a and set_b");
    } else {
        std::mt19937_64 rng(static_cast<std::uint64_t>(positive_key(ex, "seed", 1, 0)));
        const std::int64_t count = positive_key(ex, "pairs", 10);
        auto draw = [&](std::int64_t lo, std::int64_t hi) { return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng); };
        auto random_set = [&] {
            const int s = static_cast<int>(draw(1, J));
            std::vector<Level> levels;
            const std::int64_t k = draw(1, c.height(s));
            for (std::int64_t i = 0; i < k; ++i) levels.push_back(draw(0, c.height(s) - 1));
            return TowerSet::of(s, std::move(levels));
        };
        for (std::int64_t i = 0; i < count; ++i) {
            TowerSet a = random_set();
            pairs.emplace_back(std::move(a), random_set());
        }
    }
    OraclePowers oracle(c, J);
    Csv csv(out_file(g, "oracle_check.csv"), cat(cells({"pair", "set_a", "set_b", "n"}), enclosure_columns("stepcalc"), enclosure_columns("oracle"), cells({"contained"})));
    std::size_t misses = 0, checks = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto& [A, B] = pairs[i];
        for (std::int64_t n = 0; n <= n_max; ++n) {
            const Enclosure s = correlation_at(c, n, A, B, J);
            const OracleResult o = oracle.correlation(n, A, B);
            const Enclosure t(o.value, o.value + o.undefined_mass);
            const bool in = s.contains(t);
            misses += in ? 0 : 1;
            ++checks;
            csv.row(cat(cells({std::to_string(i + 1), "\"" + format_set(A) + "\"", "\"" + format_set(B) + "\"", std::to_string(n)}), enclosure_cells(s),
                        enclosure_cells(t), cells({in ? "1" : "0"})));
        }
    }
    std::cout << checks - misses << "/" << checks << " oracle intervals contained at stage " << J << "\n";
    if (misses) {
        std::cerr << "internal invariant breach: stepcalc enclosure misses the oracle interval; please report with the config and oracle_check.csv\n";
        return internal_error;
    }
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"exact-arithmetic experiments on rank-one constructions"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config, "construction and experiment config");
    app.add_option("--out-dir", g.out_dir, "directory for CSV and report files");
    app.add_option("--tol", g.tol, "target enclosure width p/q");
    app.add_option("--max-stage", g.max_stage, "deepest working stage")->check(CLI::PositiveNumber);
    app.add_option("--threads", g.threads, "worker threads for scans")->check(CLI::PositiveNumber);

    std::vector<std::pair<CLI::App*, int (*)(const Globals&)>> commands{
        {app.add_subcommand("describe", "stage table j, h_j, w_j, mu(X_j)"), run_describe},
        {app.add_subcommand("correlate", "decay scan against psi"), run_correlate},
        {app.add_subcommand("rigidity", "correlation ratios at structured times"), run_rigidity},
        {app.add_subcommand("mild", "||T^k 1_A - 1_A||_1 scan"), run_mild},
        {app.add_subcommand("cesaro", "Cesaro deviations along a time sequence"), run_cesaro},
        {app.add_subcommand("metrics", "rho, d_w and a lower bound for r"), run_metrics},
        {app.add_subcommand("force", "build or verify a slow-decay certificate"), run_force},
        {app.add_subcommand("oracle-check", "compare enclosures with the interval oracle"), run_oracle_check},
    };
    for (auto& [sub, fn] : commands) sub->fallthrough();
    commands[6].first->add_option("--verify", g.verify, "re-verify a certificate dump instead of building one");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return config_error;
    }

    try {
        for (auto& [sub, fn] : commands)
            if (sub->parsed()) return fn(g);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return config_error;
    } catch (const PresetError& e) {
        std::cerr << "config error: preset: " << e.what() << "\n";
        return config_error;
    } catch (const ConstructionError& e) {
        std::cerr << "config error: preset: " << e.what() << "\n";
        return config_error;
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return config_error;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\nthis is a bug; please report it with the config that triggered it\n";
        return internal_error;
    }
    return internal_error;
}
