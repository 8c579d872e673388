// Acceptance suite: one binary, one PASS/FAIL line per criterion, nonzero
// exit when anything fails. Every tolerance is pinned in code.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "evgp/analyzer.hpp"
#include "evgp/exact.hpp"
#include "evgp/mc.hpp"
#include "evgp/net.hpp"

using namespace evgp;

namespace {

int g_failures = 0;

struct Criterion {
    const char* name;
    std::chrono::steady_clock::time_point start;
    bool ok = true;
    std::string detail;

    explicit Criterion(const char* n) : name(n), start(std::chrono::steady_clock::now()) {}

    void require(bool cond, const std::string& what) {
        if (!cond && ok) {
            ok = false;
            detail = what;
        }
    }

    ~Criterion() {
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (ok) {
            std::printf("PASS  %-58s (%.1fs)\n", name, secs);
        } else {
            std::printf("FAIL  %-58s (%.1fs)  %s\n", name, secs, detail.c_str());
            ++g_failures;
        }
        std::fflush(stdout);
    }
};

DistributionSpec spec_of(const Architecture& a, WeightKind kind) {
    return make_spec(a, kind, BiasLaw::gaussian(0.1));
}

double rel_to_rational(double log_value, const Rational& r) {
    return std::abs(std::exp(log_value - log_rational(r)) - 1.0);
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

// 1. Oracle-DP equivalence on every architecture with hidden widths <= 3,
//    d <= 4, boundary widths in {1, 2}, Gaussian and SignedBernoulli weights;
//    all four endpoint cases of the mixed moment. Tolerance 1e-12 relative.
void criterion_1() {
    Criterion c("1 oracle-dp equivalence (widths<=3, d<=4, all endpoint cases)");
    OracleOptions opts;
    opts.workers = 2;
    int checks = 0;
    for (int d = 1; d <= 4; ++d) {
        std::vector<int> h(d > 1 ? d - 1 : 0, 1);
        bool more = true;
        while (more) {
            for (int n0 : {1, 2, 3})
                for (int nd : {1, 2, 3})
                    for (auto kind : {WeightKind::Gaussian, WeightKind::SignedBernoulli}) {
                        std::vector<int> w;
                        w.push_back(n0);
                        for (int x : h) w.push_back(x);
                        w.push_back(nd);
                        Architecture arch(w);
                        const auto spec = spec_of(arch, kind);
                        const Rational o = oracle_moment(arch, spec, 1, 1, 2, opts);
                        ++checks;
                        c.require(rel_to_rational(dp_fourth_moment(arch, spec).log_value, o) <=
                                      1e-12,
                                  "diagonal mismatch on [" + arch.to_string() + "]");
                        auto mixed = [&](int p1, int q1, int p2, int q2) {
                            const MixedTerm t[2] = {{p1, q1, 1}, {p2, q2, 1}};
                            const Rational om = oracle_mixed_moment(arch, spec, t, opts);
                            const DpValue md =
                                mixed_fourth_general(arch, spec, p1, q1, p2, q2);
                            ++checks;
                            c.require(rel_to_rational(md.log_value, om) <= 1e-12,
                                      "mixed mismatch on [" + arch.to_string() + "]");
                        };
                        if (n0 >= 2) mixed(1, 1, 2, 1);
                        if (nd >= 2) mixed(1, 1, 1, 2);
                        if (n0 >= 2 && nd >= 2) mixed(1, 1, 2, 2);
                    }
            more = false;
            for (std::size_t i = 0; i < h.size(); ++i) {
                if (++h[i] <= 3) { more = true; break; }
                h[i] = 1;
            }
        }
    }
    c.require(checks > 500, "sweep unexpectedly small");
}

// 2. MC second moment on [3,5,4,2], 1e5 samples, within 3 SE of exactly 1/3.
void criterion_2() {
    Criterion c("2 second moment: [3,5,4,2] MC within 3 SE of 1/3");
    Architecture arch({3, 5, 4, 2});
    McOptions opts;
    opts.n_samples = 100000;
    opts.seed = 20240314;
    opts.workers = 2;
    const int klist[1] = {1};
    const MomentResult r =
        estimate_moments(arch, spec_of(arch, WeightKind::Gaussian), ones_input(arch), klist,
                         opts)[0];
    const double z = std::abs(r.estimate - 1.0 / 3.0) / r.std_error;
    c.require(z <= 3.0, "z = " + fmt(z) + " (estimate " + fmt(r.estimate) + ")");
}

// 3. Fourth-moment anchor 21 on [1,2,1]: oracle exact, DP to 1e-12, and MC
//    coverage within 3 SE at 1e6 samples.
void criterion_3() {
    Criterion c("3 fourth-moment anchor: [1,2,1] = 21 (oracle, dp, mc)");
    Architecture arch({1, 2, 1});
    const auto spec = spec_of(arch, WeightKind::Gaussian);
    c.require(oracle_moment(arch, spec, 1, 1, 2) == Rational(21), "oracle != 21");
    c.require(rel_to_rational(dp_fourth_moment(arch, spec).log_value, Rational(21)) <= 1e-12,
              "dp mismatch");
    McOptions opts;
    opts.n_samples = 1000000;
    opts.seed = 271828;
    opts.workers = 2;
    const int klist[1] = {2};
    const MomentResult r = estimate_moments(arch, spec, ones_input(arch), klist, opts)[0];
    const double z = std::abs(r.estimate - 21.0) / r.std_error;
    c.require(z <= 3.0, "mc z = " + fmt(z));
}

// 4. Fourth-moment bracket on 50 random architectures (widths 1..16, d <= 32).
void criterion_4() {
    Criterion c("4 bound sandwich on 50 randomized architectures");
    for (int t = 0; t < 50; ++t) {
        RngStream pick = RngStream::keyed(0xacce97, t);
        const int d = 1 + static_cast<int>(pick.next_u64() % 32);
        std::vector<int> widths;
        for (int j = 0; j <= d; ++j)
            widths.push_back(1 + static_cast<int>(pick.next_u64() % 16));
        Architecture arch(widths);
        const auto kind = (t % 3 == 0)   ? WeightKind::Gaussian
                          : (t % 3 == 1) ? WeightKind::SignedBernoulli
                                         : WeightKind::Uniform;
        const auto spec = spec_of(arch, kind);
        const double lv = dp_fourth_moment(arch, spec).log_value;
        const AnnealedBounds b = annealed_bounds_fourth(arch, spec);
        c.require(lv >= b.log_lower - 1e-9 && lv <= b.log_upper + 1e-9,
                  "bracket violated on [" + arch.to_string() + "]");
    }
}

// 5. Width-1 Gaussian chain: exact fourth moment 6^d for d = 1..12 in the
//    log-space DP, equal to the per-layer product oracle at d <= 3.
void criterion_5() {
    Criterion c("5 exponential growth: width-1 chain = 6^d, d = 1..12");
    for (int d = 1; d <= 12; ++d) {
        std::vector<int> w(static_cast<std::size_t>(d) + 1, 1);
        Architecture chain(w);
        const auto spec = spec_of(chain, WeightKind::Gaussian);
        const double lv = dp_fourth_moment(chain, spec).log_value;
        c.require(std::abs(lv - d * std::log(6.0)) <= 1e-10 * std::max(1, d),
                  "dp != 6^" + std::to_string(d));
        if (d <= 3)
            c.require(oracle_moment(chain, spec, 1, 1, 2) ==
                          rational_pow(Rational(6), static_cast<unsigned>(d)),
                      "oracle != 6^" + std::to_string(d));
    }
}

// 6. Quenched bracket on 10 randomized architectures with M >= 2: the exact
//    expected empirical variance and the MC estimate (3 SE) both land between
//    min(lower variants) and the upper bound; eta matches exactly.
void criterion_6() {
    Criterion c("6 quenched bracket on 10 randomized architectures");
    int done = 0;
    for (std::uint64_t t = 0; done < 10; ++t) {
        RngStream pick = RngStream::keyed(0x9e3779, t);
        const int d = 1 + static_cast<int>(pick.next_u64() % 4);
        std::vector<int> widths;
        for (int j = 0; j <= d; ++j)
            widths.push_back(1 + static_cast<int>(pick.next_u64() % 5));
        Architecture arch(widths);
        if (static_cast<std::int64_t>(arch.input_dim()) * arch.output_dim() < 2) continue;
        ++done;
        const auto kind = (t % 3 == 0)   ? WeightKind::Gaussian
                          : (t % 3 == 1) ? WeightKind::SignedBernoulli
                                         : WeightKind::Uniform;
        const auto spec = spec_of(arch, kind);
        const QuenchedBounds qb = quenched_bounds(arch, spec);
        c.require(qb.eta == frac(arch.input_dim() - 1,
                                 static_cast<long>(arch.input_dim()) * arch.output_dim() - 1),
                  "eta mismatch on [" + arch.to_string() + "]");
        const EmpiricalVarianceExact ev = expected_empirical_variance_exact(arch, spec);
        c.require(ev.value >= qb.lower_min() - 1e-12 && ev.log_value <= qb.log_upper + 1e-9,
                  "exact value outside bracket on [" + arch.to_string() + "]");
        McOptions opts;
        opts.n_samples = 150000;
        opts.seed = mix_key(0x6a09e667, t);
        opts.workers = 2;
        const MomentResult mc = estimate_empirical_variance(arch, spec, ones_input(arch), opts);
        c.require(mc.estimate + 3.0 * mc.std_error >= qb.lower_min() &&
                      mc.estimate - 3.0 * mc.std_error <= qb.upper,
                  "mc estimate outside bracket on [" + arch.to_string() + "]");
    }
}

// 7. Jacobian triple agreement on 100 random tiny nets: backprop vs path sum
//    to 1e-12 relative, backprop vs central differences to 1e-6 absolute.
void criterion_7() {
    Criterion c("7 jacobian triple agreement (backprop, path sum, fd)");
    int nets = 0;
    for (std::uint64_t seed = 0; nets < 100; ++seed) {
        RngStream pick = RngStream::keyed(seed, 0x7ac0b1a);
        const int d = 1 + static_cast<int>(pick.next_u64() % 4);
        std::vector<int> widths;
        for (int j = 0; j <= d; ++j)
            widths.push_back(1 + static_cast<int>(pick.next_u64() % 3));
        Architecture arch(widths);
        const SampledNet net =
            instantiate(arch, spec_of(arch, WeightKind::Gaussian), seed);

        std::vector<double> x(static_cast<std::size_t>(arch.input_dim()));
        Matrix fd(static_cast<std::size_t>(arch.output_dim()),
                  static_cast<std::size_t>(arch.input_dim()));
        bool smooth = false;
        const double h = 1e-6;
        for (int attempt = 0; attempt < 50 && !smooth; ++attempt) {
            for (double& v : x) v = pick.next_gaussian();
            smooth = true;
            for (int p = 0; p < arch.input_dim() && smooth; ++p) {
                std::vector<double> xp = x, xm = x;
                xp[static_cast<std::size_t>(p)] += h;
                xm[static_cast<std::size_t>(p)] -= h;
                const ForwardTrace tp = forward(net, xp);
                const ForwardTrace tm = forward(net, xm);
                for (std::size_t j = 1; j <= arch.depth() && smooth; ++j)
                    for (std::size_t b = 0; b < tp.preactivations[j].size(); ++b)
                        if ((tp.preactivations[j][b] > 0.0) !=
                            (tm.preactivations[j][b] > 0.0)) {
                            smooth = false;
                            break;
                        }
                if (smooth)
                    for (int q = 0; q < arch.output_dim(); ++q)
                        fd(q, p) = (tp.activations.back()[static_cast<std::size_t>(q)] -
                                    tm.activations.back()[static_cast<std::size_t>(q)]) /
                                   (2.0 * h);
            }
        }
        if (!smooth) continue;  // hopeless net (everything dead); next seed
        ++nets;
        const Matrix zb = jacobian_backprop(net, x);
        const Matrix zp = jacobian_pathsum(net, x);
        const double scale = std::max(1.0, max_abs(zb));
        c.require(max_abs_diff(zb, zp) <= 1e-12 * scale,
                  "backprop vs path sum on [" + arch.to_string() + "]");
        c.require(max_abs_diff(zb, fd) <= 1e-6,
                  "backprop vs fd on [" + arch.to_string() + "]");
    }
}

// 8. Frobenius identity: MC mean of ||J||_F^2 within 3 SE of n_d on [3,5,2].
void criterion_8() {
    Criterion c("8 frobenius identity: [3,5,2] MC within 3 SE of 2");
    Architecture arch({3, 5, 2});
    McOptions opts;
    opts.n_samples = 100000;
    opts.seed = 314159;
    opts.workers = 2;
    const MomentResult r =
        estimate_frobenius(arch, spec_of(arch, WeightKind::Gaussian), ones_input(arch), opts);
    const double z = std::abs(r.estimate - 2.0) / r.std_error;
    c.require(z <= 3.0, "z = " + fmt(z));
}

// 9. Determinism: identical configs with --workers 1 and --workers 8 produce
//    byte-identical outputs across all subcommands.
void criterion_9() {
    Criterion c("9 cli determinism across worker counts");
    auto run = [](const std::string& args, const std::string& path) {
        const std::string cmd = std::string(EVGP_CLI_PATH) + " " + args + " > " + path +
                                " 2> /dev/null";
        return std::system(cmd.c_str()) == 0;
    };
    auto slurp = [](const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    const std::vector<std::pair<std::string, std::string>> cases = {
        {"analyze", "analyze --widths 3,5,4,2 --format json"},
        {"moments", "moments --widths 2,3,2 --k 2 --method all --samples 40000 --seed 9"},
        {"sweep", "sweep --family constant --width-min 2 --width-max 3 --depth-min 2 "
                  "--depth-max 4 --samples 5000 --seed 4"},
        {"verify", "verify --trials 2 --max-width 3 --max-depth 3 --samples 5000 --seed 31"},
        {"advise", "advise --budget-kind neurons --budget 24 --depth 4 --format json"},
    };
    for (const auto& [name, args] : cases) {
        const std::string p1 = "acc9_" + name + "_w1.txt";
        const std::string p8 = "acc9_" + name + "_w8.txt";
        // analyze/advise are worker-free; their repeat runs still must agree
        const bool workers = (name != "advise" && name != "analyze");
        const bool ok1 = run(args + (workers ? " --workers 1" : ""), p1);
        const bool ok8 = run(args + (workers ? " --workers 8" : ""), p8);
        c.require(ok1 && ok8, name + " failed to run");
        c.require(slurp(p1) == slurp(p8), name + " output differs across workers");
        std::remove(p1.c_str());
        std::remove(p8.c_str());
    }
}

}  // namespace

int main() {
    std::printf("acceptance suite (evgp)\n");
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();
    if (g_failures == 0) {
        std::printf("all criteria passed\n");
        return 0;
    }
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
}
