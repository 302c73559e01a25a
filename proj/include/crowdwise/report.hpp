#pragma once

// Analysis report: the JSON document every command emits, plus the CSV plot
// tables that accompany it.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "crowdwise/distfit.hpp"
#include "crowdwise/error.hpp"
#include "crowdwise/estimates.hpp"
#include "crowdwise/io.hpp"
#include "crowdwise/resample.hpp"

namespace crowdwise {

inline constexpr std::string_view toolkit_version = "0.1.0";

struct InputDigest {
    std::string file;
    std::size_t n = 0;
    std::optional<double> truth;

    friend bool operator==(const InputDigest&, const InputDigest&) = default;
};

struct CoreSection {
    Aggregation method = Aggregation::mean;
    double collective = 0.0;  ///< aggregate under `method`
    DptDecomposition decomposition;
    RelativeMetrics relative;
    double percent_error = 0.0;
    double outperformed_fraction = 0.0;
    std::optional<double> skewness;  ///< absent for fewer than 3 or constant estimates

    friend bool operator==(const CoreSection&, const CoreSection&) = default;
};

struct FitRow {
    double lower = 0.0;
    double upper = 0.0;
    double center = 0.0;
    std::size_t count = 0;
    double density = 0.0;
    double model = 0.0;

    friend bool operator==(const FitRow&, const FitRow&) = default;
};

struct FitSection {
    std::string dist;  ///< "twopiece" or "gaussian"
    std::size_t bins = 0;
    std::optional<double> sigma1;
    std::optional<double> sigma2;
    std::optional<double> mu;
    std::optional<double> amplitude;
    std::optional<double> variance;
    double r_squared = 0.0;
    bool boundary_warning = false;
    std::vector<FitRow> table;

    friend bool operator==(const FitSection&, const FitSection&) = default;
};

struct ResampleSection {
    std::vector<std::size_t> sizes;
    std::size_t experiments = 0;
    double threshold = 0.0;
    std::vector<CorrelationResult> correlations;
    std::optional<CenterOfMass> center_of_mass;
    AccuracyCurve curve;
    std::optional<ExpDecayFit> exp_fit;

    friend bool operator==(const ResampleSection&, const ResampleSection&) = default;
};

struct AnalysisReport {
    std::string command;
    std::string version{toolkit_version};
    std::optional<std::uint64_t> seed;
    InputDigest input;
    std::optional<CoreSection> core;
    std::optional<FitSection> fit;
    std::optional<ResampleSection> resample;

    friend bool operator==(const AnalysisReport&, const AnalysisReport&) = default;
};

// ---------------------------------------------------------------------------
// JSON

using nlohmann::json;

namespace detail {

template <class T>
void put(json& j, const char* key, const std::optional<T>& v) {
    if (v) j[key] = *v;
}

template <class T>
std::optional<T> get_opt(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<T>();
}

}  // namespace detail

inline void to_json(json& j, const InputDigest& d) {
    j = json{{"file", d.file}, {"n", d.n}};
    detail::put(j, "truth", d.truth);
}

inline void from_json(const json& j, InputDigest& d) {
    d.file = j.at("file").get<std::string>();
    d.n = j.at("n").get<std::size_t>();
    d.truth = detail::get_opt<double>(j, "truth");
}

inline void to_json(json& j, const CoreSection& c) {
    j = json{{"method", to_string(c.method)},
             {"collective", c.collective},
             {"decomposition",
              {{"collective", c.decomposition.collective},
               {"gamma", c.decomposition.gamma},
               {"epsilon", c.decomposition.epsilon},
               {"delta", c.decomposition.delta}}},
             {"relative",
              {{"rel_error", c.relative.rel_error},
               {"rel_diversity", c.relative.rel_diversity},
               {"rel_individual", c.relative.rel_individual}}},
             {"percent_error", c.percent_error},
             {"outperformed_fraction", c.outperformed_fraction}};
    detail::put(j, "skewness", c.skewness);
}

inline void from_json(const json& j, CoreSection& c) {
    const auto method = j.at("method").get<std::string>();
    if (method != "mean" && method != "median") fail(ErrorKind::input, "unknown aggregation method " + method);
    c.method = method == "mean" ? Aggregation::mean : Aggregation::median;
    c.collective = j.at("collective").get<double>();
    const auto& d = j.at("decomposition");
    c.decomposition = {d.at("collective").get<double>(), d.at("gamma").get<double>(), d.at("epsilon").get<double>(),
                       d.at("delta").get<double>()};
    const auto& r = j.at("relative");
    c.relative = {r.at("rel_error").get<double>(), r.at("rel_diversity").get<double>(),
                  r.at("rel_individual").get<double>()};
    c.percent_error = j.at("percent_error").get<double>();
    c.outperformed_fraction = j.at("outperformed_fraction").get<double>();
    c.skewness = detail::get_opt<double>(j, "skewness");
}

inline void to_json(json& j, const FitRow& r) {
    j = json{{"lower", r.lower},     {"upper", r.upper},     {"center", r.center},
             {"count", r.count},     {"density", r.density}, {"model", r.model}};
}

inline void from_json(const json& j, FitRow& r) {
    r.lower = j.at("lower").get<double>();
    r.upper = j.at("upper").get<double>();
    r.center = j.at("center").get<double>();
    r.count = j.at("count").get<std::size_t>();
    r.density = j.at("density").get<double>();
    r.model = j.at("model").get<double>();
}

inline void to_json(json& j, const FitSection& f) {
    j = json{{"dist", f.dist},
             {"bins", f.bins},
             {"r_squared", f.r_squared},
             {"boundary_warning", f.boundary_warning},
             {"table", f.table}};
    detail::put(j, "sigma1", f.sigma1);
    detail::put(j, "sigma2", f.sigma2);
    detail::put(j, "mu", f.mu);
    detail::put(j, "amplitude", f.amplitude);
    detail::put(j, "variance", f.variance);
}

inline void from_json(const json& j, FitSection& f) {
    f.dist = j.at("dist").get<std::string>();
    f.bins = j.at("bins").get<std::size_t>();
    f.r_squared = j.at("r_squared").get<double>();
    f.boundary_warning = j.at("boundary_warning").get<bool>();
    f.table = j.at("table").get<std::vector<FitRow>>();
    f.sigma1 = detail::get_opt<double>(j, "sigma1");
    f.sigma2 = detail::get_opt<double>(j, "sigma2");
    f.mu = detail::get_opt<double>(j, "mu");
    f.amplitude = detail::get_opt<double>(j, "amplitude");
    f.variance = detail::get_opt<double>(j, "variance");
}

inline void to_json(json& j, const ResampleSection& r) {
    json corr = json::array();
    for (const auto& c : r.correlations) {
        json item{{"n", c.n}, {"m", c.m}};
        detail::put(item, "r", c.r);
        corr.push_back(item);
    }
    json curve = json::array();
    for (const auto& p : r.curve.points) curve.push_back({{"n", p.n}, {"p", p.p}});
    j = json{{"sizes", r.sizes},
             {"experiments", r.experiments},
             {"threshold", r.threshold},
             {"correlations", corr},
             {"mode", to_string(r.curve.mode)},
             {"curve", curve}};
    if (r.center_of_mass)
        j["center_of_mass"] = {{"mean_rel_diversity", r.center_of_mass->mean_rel_diversity},
                               {"mean_rel_error", r.center_of_mass->mean_rel_error}};
    if (r.exp_fit)
        j["exp_fit"] = {{"alpha", r.exp_fit->alpha}, {"beta", r.exp_fit->beta}, {"n_min", r.exp_fit->n_min}};
}

inline void from_json(const json& j, ResampleSection& r) {
    r.sizes = j.at("sizes").get<std::vector<std::size_t>>();
    r.experiments = j.at("experiments").get<std::size_t>();
    r.threshold = j.at("threshold").get<double>();
    r.correlations.clear();
    for (const auto& c : j.at("correlations"))
        r.correlations.push_back({c.at("n").get<std::size_t>(), detail::get_opt<double>(c, "r"),
                                  c.at("m").get<std::size_t>()});
    const auto mode = j.at("mode").get<std::string>();
    r.curve.mode = mode == "exhaustive" ? CurveMode::exhaustive : CurveMode::monte_carlo;
    r.curve.points.clear();
    for (const auto& p : j.at("curve")) r.curve.points.push_back({p.at("n").get<std::size_t>(), p.at("p").get<double>()});
    r.center_of_mass.reset();
    if (j.contains("center_of_mass")) {
        const auto& c = j.at("center_of_mass");
        r.center_of_mass = CenterOfMass{c.at("mean_rel_diversity").get<double>(), c.at("mean_rel_error").get<double>()};
    }
    r.exp_fit.reset();
    if (j.contains("exp_fit")) {
        const auto& e = j.at("exp_fit");
        r.exp_fit = ExpDecayFit{e.at("alpha").get<double>(), e.at("beta").get<double>(), e.at("n_min").get<std::size_t>()};
    }
}

inline void to_json(json& j, const AnalysisReport& r) {
    j = json{{"tool", "crowdwise"}, {"version", r.version}, {"command", r.command}, {"input", r.input}};
    detail::put(j, "seed", r.seed);
    detail::put(j, "core", r.core);
    detail::put(j, "fit", r.fit);
    detail::put(j, "resample", r.resample);
}

inline void from_json(const json& j, AnalysisReport& r) {
    r.version = j.at("version").get<std::string>();
    r.command = j.at("command").get<std::string>();
    r.input = j.at("input").get<InputDigest>();
    r.seed = detail::get_opt<std::uint64_t>(j, "seed");
    r.core = detail::get_opt<CoreSection>(j, "core");
    r.fit = detail::get_opt<FitSection>(j, "fit");
    r.resample = detail::get_opt<ResampleSection>(j, "resample");
}

[[nodiscard]] inline std::string serialize(const AnalysisReport& report) { return json(report).dump(2) + "\n"; }

[[nodiscard]] inline AnalysisReport parse_report(std::string_view text) {
    try {
        return json::parse(text).get<AnalysisReport>();
    } catch (const json::exception& e) {
        fail(ErrorKind::input, std::string("malformed report: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// CSV plot tables

[[nodiscard]] inline std::string fit_table_csv(std::span<const FitRow> rows) {
    std::string out = "bin_lower,bin_upper,center,count,density,model_density\n";
    for (const auto& r : rows)
        out += io::format_double(r.lower) + "," + io::format_double(r.upper) + "," + io::format_double(r.center) + "," +
               std::to_string(r.count) + "," + io::format_double(r.density) + "," + io::format_double(r.model) + "\n";
    return out;
}

[[nodiscard]] inline std::string scatter_csv(std::span<const ExperimentPoint> points) {
    std::string out = "n,rel_diversity,rel_error\n";
    for (const auto& p : points)
        out += std::to_string(p.n) + "," + io::format_double(p.rel_diversity) + "," + io::format_double(p.rel_error) +
               "\n";
    return out;
}

[[nodiscard]] inline std::string curve_csv(const AccuracyCurve& curve, const std::optional<ExpDecayFit>& fit) {
    std::string out = fit ? "n,p,fit\n" : "n,p\n";
    for (const auto& p : curve.points) {
        out += std::to_string(p.n) + "," + io::format_double(p.p);
        if (fit) out += "," + io::format_double((*fit)(static_cast<double>(p.n)));
        out += "\n";
    }
    return out;
}

}  // namespace crowdwise
