// evgp - moment statistics and EVGP diagnostics for random ReLU nets.
//
// Subcommands: analyze, moments, verify, sweep, advise. Every run is fully
// determined by its config (embedded in the output); all randomness flows
// from --seed, and a missing --seed picks a random one that is logged so the
// run stays reproducible after the fact. Worker count never changes results.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <thread>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "evgp/analyzer.hpp"
#include "evgp/exact.hpp"
#include "evgp/format.hpp"
#include "evgp/json_io.hpp"
#include "evgp/mc.hpp"
#include "evgp/net.hpp"
#include "evgp/version.hpp"

namespace {

using namespace evgp;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitPropertyFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitGuard = 3;

std::vector<int> parse_int_list(const std::string& csv, const char* what) {
    std::vector<int> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            size_t pos = 0;
            int v = std::stoi(item, &pos);
            if (pos != item.size()) throw std::invalid_argument(item);
            out.push_back(v);
        } catch (const std::exception&) {
            throw ConfigError(std::string(what) + ": \"" + item + "\" is not an integer");
        }
    }
    if (out.empty()) throw ConfigError(std::string(what) + ": empty list");
    return out;
}

std::vector<double> parse_double_list(const std::string& csv, const char* what) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            size_t pos = 0;
            double v = std::stod(item, &pos);
            if (pos != item.size()) throw std::invalid_argument(item);
            out.push_back(v);
        } catch (const std::exception&) {
            throw ConfigError(std::string(what) + ": \"" + item + "\" is not a number");
        }
    }
    if (out.empty()) throw ConfigError(std::string(what) + ": empty list");
    return out;
}

std::vector<std::vector<int>> parse_layouts(const std::string& s, const char* what) {
    std::vector<std::vector<int>> out;
    std::stringstream ss(s);
    std::string group;
    while (std::getline(ss, group, ';'))
        if (!group.empty()) out.push_back(parse_int_list(group, what));
    return out;
}

std::vector<MixedTerm> parse_mixed_terms(const std::string& s) {
    std::vector<MixedTerm> out;
    for (const auto& triple : parse_layouts(s, "--mixed")) {
        if (triple.size() != 3)
            throw ConfigError("--mixed: each term must be p,q,K (got " +
                              std::to_string(triple.size()) + " fields)");
        out.push_back({triple[0], triple[1], triple[2]});
    }
    if (out.empty()) throw ConfigError("--mixed: no terms given");
    return out;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += "\"\"";
        else q += c;
    }
    return q + "\"";
}

// Common architecture/spec options shared by most subcommands.
struct ArchSpecArgs {
    std::string widths_csv;
    std::string arch_json_path;
    std::string spec_json_path;
    std::string weights = "gaussian";
    std::string bias = "gaussian";
    double bias_scale = 0.1;

    void attach(CLI::App* cmd) {
        auto* w = cmd->add_option("--widths", widths_csv, "layer widths n0,...,nd");
        auto* aj = cmd->add_option("--arch-json", arch_json_path,
                                   "JSON file with {\"widths\": [...]}");
        w->excludes(aj);
        cmd->add_option("--weights", weights,
                        "weight law: gaussian|signed_bernoulli|uniform")
            ->capture_default_str();
        cmd->add_option("--bias", bias, "bias law: gaussian|uniform|zero")
            ->capture_default_str();
        cmd->add_option("--bias-scale", bias_scale, "bias scale (atomless laws)")
            ->capture_default_str();
        cmd->add_option("--spec-json", spec_json_path,
                        "per-layer laws: {\"layers\": [{\"weights\": ..., \"bias\": ...}]}");
    }

    Architecture architecture() const {
        if (!arch_json_path.empty()) {
            std::ifstream in(arch_json_path);
            if (!in) throw ConfigError("--arch-json: cannot open " + arch_json_path);
            json j;
            in >> j;
            return architecture_from_json(j);
        }
        if (widths_csv.empty()) throw ConfigError("--widths: required (or --arch-json)");
        return Architecture(parse_int_list(widths_csv, "--widths"));
    }

    BiasLaw bias_law() const {
        if (bias == "zero") return BiasLaw::zero(true);
        if (bias == "gaussian") return BiasLaw::gaussian(bias_scale);
        if (bias == "uniform") return BiasLaw::uniform(bias_scale);
        throw ConfigError("--bias: unknown law \"" + bias + "\"");
    }

    DistributionSpec spec(const Architecture& arch) const {
        if (!spec_json_path.empty()) {
            std::ifstream in(spec_json_path);
            if (!in) throw ConfigError("--spec-json: cannot open " + spec_json_path);
            json j;
            in >> j;
            return spec_from_json(j, arch);
        }
        return make_spec(arch, weight_kind_from_string(weights), bias_law());
    }

    json config_json() const {
        json j{{"widths", widths_csv.empty() ? arch_json_path : widths_csv},
               {"weights", weights},
               {"bias", bias},
               {"bias_scale", bias_scale}};
        if (!spec_json_path.empty()) j["spec_json"] = spec_json_path;
        return j;
    }
};

int default_workers() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& seed) {
    if (seed) return *seed;
    std::random_device rd;
    std::uint64_t s = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    std::cerr << "note: --seed not given; using seed " << s
              << " (recorded in the output for reproducibility)\n";
    return s;
}

void emit(const std::string& out_path, const std::string& content) {
    if (out_path.empty()) {
        std::cout << content;
        return;
    }
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw ConfigError("--out: cannot open " + out_path + " for writing");
    out << content;
}

json run_metadata(const char* command, json config) {
    return json{{"tool", "evgp"}, {"version", kVersion}, {"command", command},
                {"config", std::move(config)}};
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

std::string render_report_text(const EvgpReport& r, const json& meta) {
    std::ostringstream os;
    os << "evgp " << kVersion << " - architecture report\n";
    os << "config            : " << meta["config"].dump() << "\n";
    os << "architecture      : [" << meta["config"]["widths"].get<std::string>() << "]\n";
    char buf[256];
    std::snprintf(buf, sizeof(buf), "beta              : %.12g\n", r.beta);
    os << buf;
    os << "E[Z^2]            : " << to_fraction_string(r.second_moment) << " (exact)\n";
    os << "E[Z^4]            : " << format_positive_from_log(r.fourth_exact.log_value)
       << " (transfer matrix)\n";
    std::snprintf(buf, sizeof(buf), "E[Z^4] bracket    : [%.12g, %.12g]   mu4~max = %.12g\n",
                  r.annealed.lower, r.annealed.upper, r.annealed.mu4_tilde_max);
    os << buf;
    for (const auto& [k, b] : r.k_upper) {
        const std::string label = "E[Z^" + std::to_string(2 * k) + "] upper";
        std::snprintf(buf, sizeof(buf), "%-18s: %s   (C = %.12g)\n", label.c_str(),
                      format_positive_from_log(b.log_upper).c_str(), b.constant);
        os << buf;
    }
    for (int k : r.k_skipped) {
        const std::string label = "E[Z^" + std::to_string(2 * k) + "] upper";
        std::snprintf(buf, sizeof(buf), "%-18s: skipped (K >= min hidden width)\n",
                      label.c_str());
        os << buf;
    }
    if (r.has_quenched) {
        os << "E[Var^[Z^2]]      : "
           << format_positive_from_log(r.empirical_variance.log_value) << "\n";
        std::snprintf(buf, sizeof(buf),
                      "quenched bracket  : [%.12g, %.12g]   (lower variants: statement %.12g, "
                      "proof %.12g)\n",
                      r.quenched.lower_min(), r.quenched.upper, r.quenched.lower_statement,
                      r.quenched.lower_proof);
        os << buf;
        os << "eta               : " << to_fraction_string(r.quenched.eta)
           << "   M = " << r.quenched.m_pairs << "\n";
    } else {
        os << "E[Var^[Z^2]]      : 0 (" << r.empirical_variance.notice << ")\n";
    }
    os << "chi_1 per layer   :";
    for (double c : r.chi1_per_layer) {
        std::snprintf(buf, sizeof(buf), " %.12g", c);
        os << buf;
    }
    os << (r.chi1_all_unit ? "   (edge of chaos)\n" : "   (NOT all 1)\n");
    os << "annealed          : " << r.annealed_summary << "\n";
    os << "quenched          : " << r.quenched_summary << "\n";
    for (const auto& w : r.warnings) os << "warning           : " << w << "\n";
    return os.str();
}

int cmd_analyze(const ArchSpecArgs& as, const std::string& k_csv, const std::string& format,
                const std::string& out_path) {
    Architecture arch = as.architecture();
    DistributionSpec spec = as.spec(arch);
    std::vector<int> ks;
    if (!k_csv.empty()) ks = parse_int_list(k_csv, "--k");
    EvgpReport report = analyze(arch, spec, ks);

    json meta = run_metadata("analyze", as.config_json());
    if (format == "json") {
        json j = meta;
        j["report"] = to_json(report);
        emit(out_path, j.dump(2) + "\n");
    } else if (format == "text") {
        emit(out_path, render_report_text(report, meta));
    } else {
        throw ConfigError("--format: analyze supports text or json");
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// moments
// ---------------------------------------------------------------------------

struct MomentsArgs {
    ArchSpecArgs as;
    int k = 1;
    int p = 1, q = 1;
    std::string method = "exact";
    std::string mixed;
    std::string input_csv;  // MC evaluation point; default all-ones
    std::int64_t samples = 100000;
    std::optional<std::uint64_t> seed;
    int workers = 0;  // 0: use all available cores
    double guard = 1e8;
    std::string format = "json";
    std::string out_path;
    std::string dump_path;
    std::string dump_net_path;
};

json moments_exact_record(const Architecture& arch, const DistributionSpec& spec, int k) {
    if (k == 1)
        return exact_result_json(exact_second_moment(arch));
    if (k == 2)
        return exact_result_json(dp_fourth_moment(arch, spec));
    throw ConfigError(
        "--method exact supports K = 1 (closed form) and K = 2 (transfer matrix); higher K "
        "is only available from --method oracle on tiny architectures");
}

int cmd_moments(const MomentsArgs& ma) {
    Architecture arch = ma.as.architecture();
    DistributionSpec spec = ma.as.spec(arch);
    if (ma.k < 1) throw ConfigError("--k: must be >= 1");
    if (ma.p < 1 || ma.p > arch.input_dim()) throw ConfigError("--p: out of range");
    if (ma.q < 1 || ma.q > arch.output_dim()) throw ConfigError("--q: out of range");
    const std::uint64_t seed = resolve_seed(ma.seed);
    const int workers = ma.workers > 0 ? ma.workers : default_workers();

    OracleOptions oopts;
    oopts.guard = ma.guard;
    oopts.workers = workers;

    std::vector<MixedTerm> mixed_terms;
    if (!ma.mixed.empty()) mixed_terms = parse_mixed_terms(ma.mixed);

    json config = ma.as.config_json();
    config["k"] = ma.k;
    config["p"] = ma.p;
    config["q"] = ma.q;
    config["method"] = ma.method;
    config["samples"] = ma.samples;
    config["seed"] = seed;
    config["guard"] = ma.guard;
    if (!ma.input_csv.empty()) config["input"] = ma.input_csv;
    if (!ma.mixed.empty()) config["mixed"] = ma.mixed;
    json out = run_metadata("moments", config);
    json records = json::array();

    auto run_oracle = [&]() {
        if (!mixed_terms.empty())
            return oracle_mixed_moment(arch, spec, mixed_terms, oopts);
        return oracle_moment(arch, spec, ma.p, ma.q, ma.k, oopts);
    };
    std::vector<double> eval_input = ones_input(arch);
    if (!ma.input_csv.empty()) {
        eval_input = parse_double_list(ma.input_csv, "--input");
        if (static_cast<int>(eval_input.size()) != arch.input_dim())
            throw ConfigError("--input: length does not match n_0");
    }
    if (!ma.dump_net_path.empty()) {
        std::ofstream nf(ma.dump_net_path, std::ios::binary);
        if (!nf) throw ConfigError("--dump-net: cannot open " + ma.dump_net_path);
        nf << to_json(instantiate(arch, spec, seed)).dump(2) << "\n";
    }

    auto run_mc = [&]() {
        McOptions mopts;
        mopts.n_samples = ma.samples;
        mopts.seed = seed;
        mopts.workers = workers;
        std::ofstream dump_file;
        if (!ma.dump_path.empty()) {
            dump_file.open(ma.dump_path, std::ios::binary);
            if (!dump_file) throw ConfigError("--dump: cannot open " + ma.dump_path);
            dump_file << "sample_index,observation\n";
            mopts.dump = [&dump_file](std::int64_t i, std::span<const double> obs) {
                dump_file << i << "," << format_double(obs[0]) << "\n";
            };
        }
        const int klist[1] = {ma.k};
        return estimate_moments(arch, spec, eval_input, klist, mopts)[0];
    };

    if (ma.method == "exact" || ma.method == "all") {
        if (mixed_terms.empty()) {
            records.push_back({{"method", "exact"},
                               {"k", ma.k},
                               {"result", moments_exact_record(arch, spec, ma.k)}});
        } else if (mixed_terms.size() == 2 && mixed_terms[0].K == 1 && mixed_terms[1].K == 1) {
            records.push_back(
                {{"method", "exact"},
                 {"mixed", ma.mixed},
                 {"result", exact_result_json(mixed_fourth_general(
                                arch, spec, mixed_terms[0].p, mixed_terms[0].q,
                                mixed_terms[1].p, mixed_terms[1].q))}});
        } else if (ma.method == "exact") {
            throw ConfigError("--method exact supports --mixed only for two K=1 terms");
        }
    }
    if (ma.method == "oracle" || ma.method == "all") {
        if (ma.method == "all") {
            try {
                records.push_back({{"method", "oracle"}, {"result", exact_result_json(run_oracle())}});
            } catch (const GuardExceededError& e) {
                records.push_back({{"method", "oracle"},
                                   {"skipped", "guard exceeded"},
                                   {"cost_estimate", e.cost_estimate}});
            }
        } else {
            records.push_back({{"method", "oracle"}, {"result", exact_result_json(run_oracle())}});
        }
    }
    if (ma.method == "mc" || ma.method == "all") {
        if (!mixed_terms.empty() && ma.method == "mc")
            throw ConfigError("--method mc does not support --mixed terms");
        if (mixed_terms.empty())
            records.push_back({{"method", "mc"}, {"result", to_json(run_mc())}});
    }
    if (records.empty()) throw ConfigError("--method: unknown method \"" + ma.method + "\"");
    out["records"] = records;

    if (ma.format == "json") {
        emit(ma.out_path, out.dump(2) + "\n");
    } else if (ma.format == "text") {
        std::ostringstream os;
        os << "E[Z^" << 2 * ma.k << "] on [" << arch.to_string() << "]\n";
        for (const auto& rec : records) {
            os << "  " << rec["method"].get<std::string>() << ": ";
            if (rec.contains("skipped")) {
                os << "skipped (guard exceeded, cost ~ "
                   << format_double(rec["cost_estimate"].get<double>()) << ")";
            } else if (rec["result"].contains("estimate")) {
                os << format_double(rec["result"]["estimate"].get<double>()) << " +- "
                   << format_double(rec["result"]["std_error"].get<double>());
            } else {
                os << rec["result"]["value"].get<std::string>();
            }
            os << "\n";
        }
        emit(ma.out_path, os.str());
    } else if (ma.format == "csv") {
        std::ostringstream os;
        os << "method,value,std_error\n";
        for (const auto& rec : records) {
            const std::string method = rec["method"].get<std::string>();
            if (rec.contains("skipped")) {
                os << method << ",skipped,\n";
            } else if (rec["result"].contains("estimate")) {
                os << method << "," << format_double(rec["result"]["estimate"].get<double>())
                   << "," << format_double(rec["result"]["std_error"].get<double>()) << "\n";
            } else {
                os << method << "," << csv_field(rec["result"]["value"].get<std::string>())
                   << ",\n";
            }
        }
        emit(ma.out_path, os.str());
    } else {
        throw ConfigError("--format: moments supports json, text or csv");
    }
    return kExitOk;
}

// ---------------------------------------------------------------------------
// verify: randomized oracle == DP == MC equivalence and bracket suite
// ---------------------------------------------------------------------------

struct VerifyArgs {
    int max_width = 3;
    int max_depth = 4;
    int trials = 10;
    std::optional<std::uint64_t> seed;
    std::int64_t samples = 20000;
    int workers = 0;  // 0: use all available cores
    bool inject_dp_bug = false;
    std::string artifacts_path;
    std::string out_path;
};

int cmd_verify(const VerifyArgs& va) {
    if (va.trials < 1) throw ConfigError("--trials: must be >= 1");
    if (va.max_width < 1 || va.max_width > 4)
        throw ConfigError("--max-width: must be in 1..4 (oracle cost)");
    if (va.max_depth < 1 || va.max_depth > 4)
        throw ConfigError("--max-depth: must be in 1..4 (oracle cost)");
    const std::uint64_t seed = resolve_seed(va.seed);
    const int workers = va.workers > 0 ? va.workers : default_workers();

    OracleOptions oopts;
    oopts.workers = workers;
    DpOptions dopts;
    if (va.inject_dp_bug) dopts.coeff_perturbation = 0.02;

    json failures = json::array();
    int checks = 0;
    auto fail = [&](const Architecture& arch, const char* check, const std::string& expected,
                    const std::string& actual, double diff) {
        failures.push_back({{"arch", arch.widths()},
                            {"check", check},
                            {"expected", expected},
                            {"actual", actual},
                            {"difference", diff}});
    };

    static const WeightKind kinds[] = {WeightKind::Gaussian, WeightKind::SignedBernoulli,
                                       WeightKind::Uniform};
    for (int t = 0; t < va.trials; ++t) {
        RngStream pick = RngStream::keyed(seed, 0xbead, t);
        const int d = 1 + static_cast<int>(pick.next_u64() % va.max_depth);
        std::vector<int> widths;
        for (int j = 0; j <= d; ++j)
            widths.push_back(1 + static_cast<int>(pick.next_u64() % va.max_width));
        Architecture arch(widths);
        WeightKind kind = kinds[pick.next_u64() % 3];
        DistributionSpec spec = make_spec(arch, kind, BiasLaw::gaussian(0.1));

        // oracle == DP, exact rational vs log-space transfer matrix
        const Rational oracle = oracle_moment(arch, spec, 1, 1, 2, oopts);
        const DpValue dp = dp_fourth_moment(arch, spec, 1, 1, dopts);
        const double rel = std::abs(std::exp(dp.log_value - log_rational(oracle)) - 1.0);
        ++checks;
        if (rel > 1e-12)
            fail(arch, "oracle_vs_dp_fourth", to_fraction_string(oracle),
                 format_positive_from_log(dp.log_value), rel);

        // mixed endpoint cases realizable on this arch
        auto check_mixed = [&](int p1, int q1, int p2, int q2, const char* name) {
            const MixedTerm terms[2] = {{p1, q1, 1}, {p2, q2, 1}};
            const Rational om = oracle_mixed_moment(arch, spec, terms, oopts);
            const DpValue md = mixed_fourth_general(arch, spec, p1, q1, p2, q2);
            const double r2 = std::abs(std::exp(md.log_value - log_rational(om)) - 1.0);
            ++checks;
            if (r2 > 1e-12)
                fail(arch, name, to_fraction_string(om),
                     format_positive_from_log(md.log_value), r2);
        };
        if (arch.input_dim() >= 2) check_mixed(1, 1, 2, 1, "oracle_vs_dp_mixed_same_q");
        if (arch.output_dim() >= 2) check_mixed(1, 1, 1, 2, "oracle_vs_dp_mixed_same_p");
        if (arch.input_dim() >= 2 && arch.output_dim() >= 2)
            check_mixed(1, 1, 2, 2, "oracle_vs_dp_mixed_distinct");

        // fourth-moment bracket
        const AnnealedBounds ab = annealed_bounds_fourth(arch, spec);
        ++checks;
        if (!(dp.log_value >= std::log(ab.lower) - 1e-9 &&
              dp.log_value <= ab.log_upper + 1e-9))
            fail(arch, "fourth_moment_bracket",
                 "[" + format_double(ab.lower) + ", " + format_double(ab.upper) + "]",
                 format_positive_from_log(dp.log_value), 0.0);

        // quenched bracket for the exact expected empirical variance
        if (static_cast<std::int64_t>(arch.input_dim()) * arch.output_dim() >= 2) {
            const QuenchedBounds qb = quenched_bounds(arch, spec);
            const EmpiricalVarianceExact ev = expected_empirical_variance_exact(arch, spec);
            ++checks;
            if (!(ev.value >= qb.lower_min() - 1e-9 && ev.log_value <= qb.log_upper + 1e-9))
                fail(arch, "quenched_bracket",
                     "[" + format_double(qb.lower_min()) + ", " + format_double(qb.upper) + "]",
                     format_double(ev.value), 0.0);
        }

        // MC coverage of the exact fourth moment
        McOptions mopts;
        mopts.n_samples = va.samples;
        mopts.seed = mix_key(seed, 0x3c0de, t);
        mopts.workers = workers;
        const int klist[1] = {2};
        const MomentResult mc = estimate_moments(arch, spec, ones_input(arch), klist, mopts)[0];
        const double z = mc.std_error > 0
                             ? std::abs(mc.estimate - dp.value()) / mc.std_error
                             : 0.0;
        ++checks;
        if (z > 4.0)
            fail(arch, "mc_coverage_4se", format_positive_from_log(dp.log_value),
                 format_double(mc.estimate) + " +- " + format_double(mc.std_error), z);
    }

    json out = run_metadata("verify", json{{"max_width", va.max_width},
                                           {"max_depth", va.max_depth},
                                           {"trials", va.trials},
                                           {"samples", va.samples},
                                           {"seed", seed},
                                           {"inject_dp_bug", va.inject_dp_bug}});
    out["checks"] = checks;
    out["failures"] = failures;
    out["passed"] = failures.empty();
    emit(va.out_path, out.dump(2) + "\n");
    if (!failures.empty() && !va.artifacts_path.empty()) {
        std::ofstream af(va.artifacts_path, std::ios::binary);
        af << out.dump(2) << "\n";
    }
    return failures.empty() ? kExitOk : kExitPropertyFailure;
}

// ---------------------------------------------------------------------------
// sweep: CSV over a width/depth grid
// ---------------------------------------------------------------------------

struct SweepArgs {
    std::string family = "constant";
    int width_min = 4, width_max = 4;
    int depth_min = 2, depth_max = 8;
    double coef = 1.0, power = 1.0, ratio = 2.0;
    int n0 = 0, nd = 0;  // 0: default to the first/last generated hidden width
    std::string weights = "gaussian";
    std::string bias = "gaussian";
    double bias_scale = 0.1;
    std::int64_t samples = 0;  // 0: no MC columns
    std::optional<std::uint64_t> seed;
    int workers = 0;  // 0: use all available cores
    std::string out_path;
};

int cmd_sweep(const SweepArgs& sa) {
    if (sa.depth_min < 1 || sa.depth_max < sa.depth_min)
        throw ConfigError("--depth-min/--depth-max: need 1 <= min <= max");
    if (sa.width_min < 1 || sa.width_max < sa.width_min)
        throw ConfigError("--width-min/--width-max: need 1 <= min <= max");
    const bool with_mc = sa.samples > 0;
    const std::uint64_t seed = with_mc ? resolve_seed(sa.seed) : sa.seed.value_or(0);

    WidthFamily family = WidthFamily::constant(sa.width_min);
    const bool constant_family = sa.family == "constant";
    if (sa.family == "polynomial") family = WidthFamily::polynomial(sa.coef, sa.power);
    else if (sa.family == "geometric") family = WidthFamily::geometric(sa.coef, sa.ratio);
    else if (!constant_family) throw ConfigError("--family: constant, polynomial or geometric");

    std::ostringstream os;
    os << "d,widths,beta,exact_fourth,lower_bound,upper_bound";
    if (with_mc) os << ",mc_estimate,mc_se";
    os << "\n";

    const int wlo = constant_family ? sa.width_min : 1;
    const int whi = constant_family ? sa.width_max : 1;
    for (int w = wlo; w <= whi; ++w) {
        if (constant_family) family = WidthFamily::constant(w);
        for (int d = sa.depth_min; d <= sa.depth_max; ++d) {
            std::vector<int> widths;
            const int first_hidden = d >= 2 ? family.width_at(1) : 0;
            widths.push_back(sa.n0 > 0 ? sa.n0 : (d >= 2 ? first_hidden : 1));
            for (int j = 1; j < d; ++j) widths.push_back(family.width_at(j));
            widths.push_back(sa.nd > 0 ? sa.nd
                                       : (d >= 2 ? family.width_at(d - 1) : widths[0]));
            Architecture arch(widths);
            DistributionSpec spec =
                make_spec(arch, weight_kind_from_string(sa.weights),
                          sa.bias == "zero" ? BiasLaw::zero(true)
                          : sa.bias == "uniform" ? BiasLaw::uniform(sa.bias_scale)
                                                 : BiasLaw::gaussian(sa.bias_scale));
            const DpValue dp = dp_fourth_moment(arch, spec);
            const AnnealedBounds ab = annealed_bounds_fourth(arch, spec);
            char betabuf[32];
            std::snprintf(betabuf, sizeof(betabuf), "%.12g", arch.beta());
            os << d << "," << csv_field(arch.to_string()) << "," << betabuf << ","
               << format_positive_from_log(dp.log_value) << ","
               << format_positive_from_log(ab.log_lower) << ","
               << format_positive_from_log(ab.log_upper);
            if (with_mc) {
                McOptions mopts;
                mopts.n_samples = sa.samples;
                mopts.seed = mix_key(seed, 0x53eb, static_cast<std::uint64_t>(w) << 16 | d);
                mopts.workers = sa.workers > 0 ? sa.workers : default_workers();
                const int klist[1] = {2};
                const MomentResult mc =
                    estimate_moments(arch, spec, ones_input(arch), klist, mopts)[0];
                os << "," << format_double(mc.estimate) << "," << format_double(mc.std_error);
            }
            os << "\n";
        }
    }
    emit(sa.out_path, os.str());
    return kExitOk;
}

// ---------------------------------------------------------------------------
// advise
// ---------------------------------------------------------------------------

int cmd_advise(const std::string& budget_kind, std::int64_t budget, int depth, int input_dim,
               int output_dim, const std::string& compare, const std::string& format,
               const std::string& out_path) {
    AdviseRequest req;
    if (budget_kind == "neurons") req.kind = BudgetKind::Neurons;
    else if (budget_kind == "parameters") req.kind = BudgetKind::Parameters;
    else throw ConfigError("--budget-kind: neurons or parameters");
    req.budget = budget;
    req.depth = depth;
    req.input_dim = input_dim;
    req.output_dim = output_dim;
    if (!compare.empty()) req.alternatives = parse_layouts(compare, "--compare");
    Advice advice = advise(req);

    json out = run_metadata("advise", json{{"budget_kind", budget_kind},
                                           {"budget", budget},
                                           {"depth", depth},
                                           {"input_dim", input_dim},
                                           {"output_dim", output_dim},
                                           {"compare", compare}});
    out["advice"] = to_json(advice);
    if (format == "json") {
        emit(out_path, out.dump(2) + "\n");
    } else if (format == "text") {
        std::ostringstream os;
        os << "proposed hidden widths:";
        for (int w : advice.hidden) os << " " << w;
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.12g", advice.beta);
        os << "\nbeta = " << buf << "   budget used = " << advice.budget_used << "\n";
        for (const auto& [alt, b] : advice.alternative_betas) {
            os << "alternative";
            for (int w : alt) os << " " << w;
            std::snprintf(buf, sizeof(buf), "%.12g", b);
            os << " : beta = " << buf << (b + 1e-15 < advice.beta ? "  (lower)" : "") << "\n";
        }
        emit(out_path, os.str());
    } else {
        throw ConfigError("--format: advise supports text or json");
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"moment statistics and EVGP diagnostics for random ReLU networks"};
    app.require_subcommand(1);

    // analyze
    auto* analyze_cmd = app.add_subcommand("analyze", "closed-form architecture report");
    ArchSpecArgs analyze_as;
    analyze_as.attach(analyze_cmd);
    std::string analyze_k, analyze_format = "text", analyze_out;
    analyze_cmd->add_option("--k", analyze_k, "extra 2K-moment bound orders, e.g. 3,4,5");
    analyze_cmd->add_option("--format", analyze_format, "text|json")->capture_default_str();
    analyze_cmd->add_option("--out", analyze_out, "output path (default stdout)");

    // moments
    auto* moments_cmd = app.add_subcommand("moments", "exact / oracle / MC moment values");
    MomentsArgs ma;
    ma.as.attach(moments_cmd);
    moments_cmd->add_option("--k", ma.k, "moment order K (estimates E[Z^{2K}])")
        ->capture_default_str();
    moments_cmd->add_option("--p", ma.p, "input endpoint (1-based)")->capture_default_str();
    moments_cmd->add_option("--q", ma.q, "output endpoint (1-based)")->capture_default_str();
    moments_cmd->add_option("--method", ma.method, "exact|oracle|mc|all")->capture_default_str();
    moments_cmd->add_option("--mixed", ma.mixed, "mixed terms p,q,K;p,q,K (oracle/exact)");
    moments_cmd->add_option("--input", ma.input_csv,
                            "MC evaluation input (default: all ones)");
    moments_cmd->add_option("--samples", ma.samples, "MC sample count")->capture_default_str();
    std::uint64_t m_seed = 0;
    auto* m_seed_opt = moments_cmd->add_option("--seed", m_seed, "RNG seed");
    moments_cmd->add_option("--workers", ma.workers, "worker threads (0 = all cores)")->capture_default_str();
    moments_cmd->add_option("--guard", ma.guard, "oracle enumeration guard")
        ->capture_default_str();
    moments_cmd->add_option("--format", ma.format, "json|text|csv")->capture_default_str();
    moments_cmd->add_option("--out", ma.out_path, "output path");
    moments_cmd->add_option("--dump", ma.dump_path, "CSV stream of per-sample observations (mc)");
    moments_cmd->add_option("--dump-net", ma.dump_net_path,
                            "debug: dump one sampled net's matrices as JSON");

    // verify
    auto* verify_cmd = app.add_subcommand("verify", "randomized equivalence/bracket suite");
    VerifyArgs va;
    verify_cmd->add_option("--max-width", va.max_width, "max layer width (<= 4)")
        ->capture_default_str();
    verify_cmd->add_option("--max-depth", va.max_depth, "max depth (<= 4)")
        ->capture_default_str();
    verify_cmd->add_option("--trials", va.trials, "number of random architectures")
        ->capture_default_str();
    std::uint64_t v_seed = 0;
    auto* v_seed_opt = verify_cmd->add_option("--seed", v_seed, "RNG seed");
    verify_cmd->add_option("--samples", va.samples, "MC samples per trial")
        ->capture_default_str();
    verify_cmd->add_option("--workers", va.workers, "worker threads (0 = all cores)")->capture_default_str();
    verify_cmd->add_flag("--inject-dp-bug", va.inject_dp_bug,
                         "test mode: perturb a DP coefficient; the suite must catch it");
    verify_cmd->add_option("--artifacts", va.artifacts_path, "failure artifact JSON path");
    verify_cmd->add_option("--out", va.out_path, "output path");

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "CSV of exact values and bounds over a grid");
    SweepArgs sa;
    sweep_cmd->add_option("--family", sa.family, "constant|polynomial|geometric")
        ->capture_default_str();
    sweep_cmd->add_option("--width-min", sa.width_min, "constant family: min width")
        ->capture_default_str();
    sweep_cmd->add_option("--width-max", sa.width_max, "constant family: max width")
        ->capture_default_str();
    sweep_cmd->add_option("--depth-min", sa.depth_min, "min depth d")->capture_default_str();
    sweep_cmd->add_option("--depth-max", sa.depth_max, "max depth d")->capture_default_str();
    sweep_cmd->add_option("--coef", sa.coef, "family coefficient c")->capture_default_str();
    sweep_cmd->add_option("--power", sa.power, "polynomial exponent p")->capture_default_str();
    sweep_cmd->add_option("--ratio", sa.ratio, "geometric ratio r")->capture_default_str();
    sweep_cmd->add_option("--n0", sa.n0, "input width (default: first hidden width)")
        ->capture_default_str();
    sweep_cmd->add_option("--nd", sa.nd, "output width (default: last hidden width)")
        ->capture_default_str();
    sweep_cmd->add_option("--weights", sa.weights, "weight law")->capture_default_str();
    sweep_cmd->add_option("--bias", sa.bias, "bias law")->capture_default_str();
    sweep_cmd->add_option("--bias-scale", sa.bias_scale, "bias scale")->capture_default_str();
    sweep_cmd->add_option("--samples", sa.samples, "MC samples per row (0: no MC columns)")
        ->capture_default_str();
    std::uint64_t s_seed = 0;
    auto* s_seed_opt = sweep_cmd->add_option("--seed", s_seed, "RNG seed");
    sweep_cmd->add_option("--workers", sa.workers, "worker threads (0 = all cores)")->capture_default_str();
    sweep_cmd->add_option("--out", sa.out_path, "output CSV path");

    // advise
    auto* advise_cmd = app.add_subcommand("advise", "budgeted architecture proposal");
    std::string adv_kind = "neurons", adv_compare, adv_format = "text", adv_out;
    std::int64_t adv_budget = 0;
    int adv_depth = 2, adv_in = 0, adv_out_dim = 0;
    advise_cmd->add_option("--budget-kind", adv_kind, "neurons|parameters")
        ->capture_default_str();
    advise_cmd->add_option("--budget", adv_budget, "budget size")->required();
    advise_cmd->add_option("--depth", adv_depth, "network depth d")->required();
    advise_cmd->add_option("--input-dim", adv_in, "n_0 (required for parameters budget)");
    advise_cmd->add_option("--output-dim", adv_out_dim, "n_d (required for parameters budget)");
    advise_cmd->add_option("--compare", adv_compare, "alternative hidden layouts a,b,c;d,e,f");
    advise_cmd->add_option("--format", adv_format, "text|json")->capture_default_str();
    advise_cmd->add_option("--out", adv_out, "output path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (analyze_cmd->parsed())
            return cmd_analyze(analyze_as, analyze_k, analyze_format, analyze_out);
        if (moments_cmd->parsed()) {
            if (m_seed_opt->count() > 0) ma.seed = m_seed;
            return cmd_moments(ma);
        }
        if (verify_cmd->parsed()) {
            if (v_seed_opt->count() > 0) va.seed = v_seed;
            return cmd_verify(va);
        }
        if (sweep_cmd->parsed()) {
            if (s_seed_opt->count() > 0) sa.seed = s_seed;
            return cmd_sweep(sa);
        }
        if (advise_cmd->parsed())
            return cmd_advise(adv_kind, adv_budget, adv_depth, adv_in, adv_out_dim, adv_compare,
                              adv_format, adv_out);
        std::cerr << "error: no subcommand\n";
        return kExitConfig;
    } catch (const GuardExceededError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitGuard;
    } catch (const HypothesisViolatedError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DegenerateInputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitPropertyFailure;
    }
}
