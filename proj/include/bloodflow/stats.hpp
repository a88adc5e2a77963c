#pragma once

// Run-level metrics: acceptance ratio, marginal performance, distance
// reduction and the pooled two-proportion z-test.

#include "bloodflow/error.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <string>

namespace bloodflow {

inline double acceptance_ratio(long accepted, long denied) {
    if (accepted < 0 || denied < 0) throw ValidationError("counts must be non-negative", "accepted");
    if (accepted + denied == 0) throw ValidationError("no requests", "accepted");
    return static_cast<double>(accepted) / static_cast<double>(accepted + denied);
}

// Share of the baseline's remaining headroom captured: (a - b) / (1 - b).
inline double marginal_performance(double acceptance, double baseline) {
    if (!(baseline >= 0.0 && baseline < 1.0)) throw ValidationError("must lie in [0,1)", "baseline");
    if (!(acceptance >= 0.0 && acceptance <= 1.0)) throw ValidationError("must lie in [0,1]", "acceptance");
    return (acceptance - baseline) / (1.0 - baseline);
}

inline double distance_reduction(double base, double updated) {
    if (!(base > 0.0)) throw ValidationError("must be positive", "base");
    return (base - updated) / base;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

struct ZTest {
    double z = 0.0;
    double p_one_sided = 0.5;  // upper tail: evidence that sample 2 exceeds sample 1
};

// Pooled two-proportion z-test without continuity correction.
inline ZTest two_proportion_z_test(long acc1, long n1, long acc2, long n2) {
    if (n1 <= 0 || n2 <= 0) throw ValidationError("sample sizes must be positive", "n");
    if (acc1 < 0 || acc2 < 0 || acc1 > n1 || acc2 > n2) throw ValidationError("need 0 <= accepted <= n", "accepted");
    const double p1 = static_cast<double>(acc1) / static_cast<double>(n1);
    const double p2 = static_cast<double>(acc2) / static_cast<double>(n2);
    const double pooled = static_cast<double>(acc1 + acc2) / static_cast<double>(n1 + n2);
    const double var = pooled * (1.0 - pooled) * (1.0 / static_cast<double>(n1) + 1.0 / static_cast<double>(n2));
    if (!(var > 0.0)) throw ValidationError("pooled variance is zero; z is undefined", "accepted");
    ZTest out;
    out.z = (p2 - p1) / std::sqrt(var);
    out.p_one_sided = 1.0 - normal_cdf(out.z);
    return out;
}

struct RunSummary {
    std::string label;
    long accepted = 0;
    long denied = 0;
    double total_distance = 0.0;

    double acceptance() const { return acceptance_ratio(accepted, denied); }
};

// Reads the fields it needs from a report.json object.
inline RunSummary summary_from_json(const nlohmann::json& j) {
    RunSummary s;
    try {
        s.label = j.value("policy", std::string("run"));
        s.accepted = j.at("accepted").get<long>();
        s.denied = j.at("denied").get<long>();
        s.total_distance = j.at("total_distance").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("report is missing accepted/denied/total_distance: ") + e.what(), "report");
    }
    return s;
}

struct ComparisonReport {
    RunSummary baseline;
    RunSummary treatment;
    double delta_mp_acceptance = 0.0;
    double distance_reduction_fraction = 0.0;
    double z = 0.0;
    double p_one_sided = 0.5;
};

inline ComparisonReport compare_runs(const RunSummary& baseline, const RunSummary& treatment) {
    ComparisonReport r{baseline, treatment};
    r.delta_mp_acceptance = marginal_performance(treatment.acceptance(), baseline.acceptance());
    r.distance_reduction_fraction = distance_reduction(baseline.total_distance, treatment.total_distance);
    const auto zt = two_proportion_z_test(baseline.accepted, baseline.accepted + baseline.denied, treatment.accepted,
                                          treatment.accepted + treatment.denied);
    r.z = zt.z;
    r.p_one_sided = zt.p_one_sided;
    return r;
}

inline nlohmann::json to_json(const RunSummary& s) {
    return {{"label", s.label},
            {"accepted", s.accepted},
            {"denied", s.denied},
            {"acceptance_ratio", s.acceptance()},
            {"total_distance", s.total_distance}};
}

inline nlohmann::json to_json(const ComparisonReport& r) {
    return {{"baseline", to_json(r.baseline)},
            {"treatment", to_json(r.treatment)},
            {"delta_mp_acceptance", r.delta_mp_acceptance},
            {"distance_reduction_fraction", r.distance_reduction_fraction},
            {"z", r.z},
            {"p_one_sided", r.p_one_sided}};
}

// Two-column metrics table followed by the marginal-performance line.
inline std::string comparison_table(const ComparisonReport& r) {
    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-26s %16s %16s\n", "Metric", r.baseline.label.c_str(), r.treatment.label.c_str());
    out += buf;
    std::snprintf(buf, sizeof buf, "%-26s %16ld %16ld\n", "Total Accepted Requests", r.baseline.accepted,
                  r.treatment.accepted);
    out += buf;
    std::snprintf(buf, sizeof buf, "%-26s %16ld %16ld\n", "Total Denied Requests", r.baseline.denied,
                  r.treatment.denied);
    out += buf;
    std::snprintf(buf, sizeof buf, "%-26s %16.4f %16.4f\n", "Overall Acceptance Ratio", r.baseline.acceptance(),
                  r.treatment.acceptance());
    out += buf;
    std::snprintf(buf, sizeof buf, "%-26s %16.0f %16.0f\n", "Total Units Traveled", r.baseline.total_distance,
                  r.treatment.total_distance);
    out += buf;
    std::snprintf(buf, sizeof buf, "\nDelta MP (accept ratio): %.1f%%   Distance reduced: %.2f%%   z = %.3f   p = %.6f\n",
                  100.0 * r.delta_mp_acceptance, 100.0 * r.distance_reduction_fraction, r.z, r.p_one_sided);
    out += buf;
    return out;
}

}  // namespace bloodflow
