#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "evgp/analyzer.hpp"
#include "evgp/architecture.hpp"
#include "evgp/distributions.hpp"
#include "evgp/exact.hpp"
#include "evgp/format.hpp"
#include "evgp/mc.hpp"

namespace evgp {

using nlohmann::json;

inline json to_json(const Architecture& arch) { return json{{"widths", arch.widths()}}; }

inline Architecture architecture_from_json(const json& j) {
    if (!j.contains("widths") || !j["widths"].is_array())
        throw ConfigError("architecture JSON needs a \"widths\" array");
    return Architecture(j["widths"].get<std::vector<int>>());
}

// Law encodings carry only the kind (and scale for biases); fan_in always
// comes from the architecture and is never serialized.
inline json to_json(const WeightLaw& law) { return json{{"kind", to_string(law.kind())}}; }

inline json to_json(const BiasLaw& law) {
    json j{{"kind", to_string(law.kind())}};
    if (law.kind() != BiasKind::Zero) j["scale"] = law.scale();
    return j;
}

inline WeightKind weight_kind_from_string(const std::string& s) {
    if (s == "gaussian") return WeightKind::Gaussian;
    if (s == "signed_bernoulli") return WeightKind::SignedBernoulli;
    if (s == "uniform") return WeightKind::Uniform;
    throw ConfigError("unknown weight law kind \"" + s + "\"");
}

inline BiasLaw bias_law_from_json(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "zero") return BiasLaw::zero(true);
    const double scale = j.value("scale", 0.1);
    if (kind == "gaussian") return BiasLaw::gaussian(scale);
    if (kind == "uniform") return BiasLaw::uniform(scale);
    throw ConfigError("unknown bias law kind \"" + kind + "\"");
}

inline json to_json(const DistributionSpec& spec) {
    json layers = json::array();
    for (const auto& l : spec.layers())
        layers.push_back({{"weights", to_json(l.weights)}, {"bias", to_json(l.bias)}});
    return json{{"layers", layers}};
}

inline WeightLaw weight_law_from_json(const json& j, int fan_in) {
    switch (weight_kind_from_string(j.at("kind").get<std::string>())) {
        case WeightKind::Gaussian: return WeightLaw::gaussian(fan_in);
        case WeightKind::SignedBernoulli: return WeightLaw::signed_bernoulli(fan_in);
        case WeightKind::Uniform: return WeightLaw::uniform(fan_in);
        default: throw ConfigError("custom laws cannot be loaded from JSON");
    }
}

// {"layers": [{"weights": {"kind": ...}, "bias": {"kind": ..., "scale": ...}}, ...]};
// one entry per layer, fan_in inferred from the architecture.
inline DistributionSpec spec_from_json(const json& j, const Architecture& arch) {
    if (!j.contains("layers") || !j["layers"].is_array())
        throw ConfigError("spec JSON needs a \"layers\" array");
    const auto& layers = j["layers"];
    if (layers.size() != arch.depth())
        throw ConfigError("spec JSON has " + std::to_string(layers.size()) +
                          " layers, architecture has depth " + std::to_string(arch.depth()));
    std::vector<LayerLaws> out;
    out.reserve(layers.size());
    for (std::size_t j1 = 1; j1 <= layers.size(); ++j1) {
        const auto& entry = layers[j1 - 1];
        out.push_back({weight_law_from_json(entry.at("weights"), arch.width(j1 - 1)),
                       bias_law_from_json(entry.at("bias"))});
    }
    return DistributionSpec(std::move(out));
}

// Exact results: value as a decimal/fraction string so nothing is lost or
// overflows, log_value for plotting, method provenance.
inline json exact_result_json(const Rational& value) {
    return json{{"value", to_fraction_string(value)},
                {"exact", true},
                {"log_value", log_rational(value)},
                {"method", "oracle"}};
}

inline json exact_result_json(const DpValue& value) {
    return json{{"value", format_positive_from_log(value.log_value)},
                {"exact", false},
                {"log_value", value.log_value},
                {"method", "dp"}};
}

inline json to_json(const MomentResult& r) {
    json j{{"estimate", r.estimate}, {"std_error", r.std_error},
           {"n_samples", r.n_samples}, {"method", to_string(r.method)},
           {"target", r.target}};
    if (r.heavy_tail_flagged) {
        j["heavy_tail_flagged"] = true;
        j["sample_kurtosis"] = r.sample_kurtosis;
        j["median_of_means"] = {{"estimate", r.mom_estimate}, {"std_error", r.mom_std_error}};
    }
    return j;
}

inline json to_json(const EvgpReport& r) {
    json j;
    j["widths"] = r.widths;
    j["beta"] = r.beta;
    j["second_moment"] = to_fraction_string(r.second_moment);
    j["fourth_moment"] = exact_result_json(r.fourth_exact);
    j["fourth_moment_bounds"] = {{"lower", r.annealed.lower},
                                 {"upper", r.annealed.upper},
                                 {"log_upper", r.annealed.log_upper},
                                 {"mu4_tilde_max", r.annealed.mu4_tilde_max}};
    json kb = json::object();
    for (const auto& [k, b] : r.k_upper)
        kb[std::to_string(k)] = {{"upper", b.upper}, {"log_upper", b.log_upper},
                                 {"constant", b.constant}};
    j["k_moment_upper_bounds"] = kb;
    j["k_bounds_skipped_hypothesis"] = r.k_skipped;
    if (r.has_quenched) {
        j["quenched"] = {{"lower_statement", r.quenched.lower_statement},
                         {"lower_proof", r.quenched.lower_proof},
                         {"upper", r.quenched.upper},
                         {"log_upper", r.quenched.log_upper},
                         {"eta", to_fraction_string(r.quenched.eta)},
                         {"m_pairs", r.quenched.m_pairs},
                         {"mu4_tilde_max", r.quenched.mu4_tilde_max},
                         {"mu4_tilde_first_layer", r.quenched.mu4_tilde_first}};
        j["expected_empirical_variance"] = {
            {"value", format_positive_from_log(r.empirical_variance.log_value)},
            {"log_value", r.empirical_variance.log_value}};
    } else {
        j["expected_empirical_variance"] = {{"value", "0"}, {"notice", r.empirical_variance.notice}};
    }
    j["chi1"] = r.chi1_per_layer;
    j["chi1_all_unit"] = r.chi1_all_unit;
    j["verdicts"] = {{"annealed", r.annealed_summary}, {"quenched", r.quenched_summary}};
    j["warnings"] = r.warnings;
    return j;
}

inline json to_json(const Advice& a) {
    json alts = json::array();
    for (const auto& [widths, b] : a.alternative_betas)
        alts.push_back({{"hidden", widths}, {"beta", b}});
    return json{{"hidden", a.hidden},
                {"beta", a.beta},
                {"budget_used", a.budget_used},
                {"alternatives", alts}};
}

inline json to_json(const FamilyVerdict& v) {
    return json{{"has_asymptotic_verdict", v.has_asymptotic_verdict},
                {"avoids", v.avoids},
                {"annealed", v.annealed},
                {"quenched", v.quenched},
                {"rationale", v.rationale},
                {"beta_horizon", v.beta_horizon}};
}

// Debug-only dump of a sampled net's matrices.
inline json to_json(const SampledNet& net) {
    json j;
    j["widths"] = net.arch.widths();
    json weights = json::array();
    for (const auto& w : net.weights) {
        json rows = json::array();
        for (std::size_t r = 0; r < w.rows(); ++r) {
            json row = json::array();
            for (std::size_t c = 0; c < w.cols(); ++c) row.push_back(w(r, c));
            rows.push_back(row);
        }
        weights.push_back(rows);
    }
    j["weights"] = weights;
    j["biases"] = net.biases;
    return j;
}

}  // namespace evgp
