#pragma once

// Command layer behind the `crowdwise` executable. Each cmd_* function is a
// pure computation returning a report plus its plot tables; run() adds
// argument parsing, file output and the exit-status contract.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "crowdwise/distfit.hpp"
#include "crowdwise/error.hpp"
#include "crowdwise/estimates.hpp"
#include "crowdwise/io.hpp"
#include "crowdwise/report.hpp"
#include "crowdwise/resample.hpp"
#include "crowdwise/synthgen.hpp"

namespace crowdwise::cli {

/// A report and the CSV tables that go next to it, keyed by file suffix.
struct CommandOutput {
    AnalysisReport report;
    std::vector<std::pair<std::string, std::string>> tables;
};

struct AnalyzeOptions {
    std::optional<double> truth;  ///< overrides the file header
    Aggregation method = Aggregation::mean;
};

struct FitOptions {
    std::string dist = "twopiece";
    std::optional<std::size_t> bins;
    std::optional<double> truth;
};

struct ResampleOptions {
    std::optional<double> truth;
    std::vector<std::size_t> sizes{10, 20, 40, 60};
    std::size_t experiments = 10000;
    double threshold = 0.05;
    std::uint64_t seed = 0;
    bool exhaustive = false;
    unsigned threads = 0;
};

struct CurveOptions {
    std::optional<double> truth;
    std::optional<std::vector<std::size_t>> grid;  ///< defaults to default_curve_grid()
    std::size_t experiments = 10000;
    double threshold = 0.05;
    std::uint64_t seed = 0;
    bool fit_exp = false;
    std::size_t n_min = 10;
    bool exhaustive = false;
    unsigned threads = 0;
};

struct SimulateOptions {
    std::string dist = "twopiece";
    std::optional<double> sigma1;
    std::optional<double> sigma2;
    std::optional<double> variance;
    double scale = 1.0;
    double truth = 1.0;
    long long count = 0;
    std::uint64_t seed = 0;
    bool truncate = true;
};

inline constexpr std::size_t min_fit_estimates = 10;

/// {1..20} U {25, 30, ..., 100}, truncated at the population size.
[[nodiscard]] inline std::vector<std::size_t> default_curve_grid(std::size_t population) {
    std::vector<std::size_t> grid;
    for (std::size_t n = 1; n <= 20; ++n) grid.push_back(n);
    for (std::size_t n = 25; n <= 100; n += 5) grid.push_back(n);
    std::erase_if(grid, [&](std::size_t n) { return n > population; });
    return grid;
}

/// Parses "10,20,40" and ranges "1-20" or "25-100:5" into a sorted, unique list.
[[nodiscard]] inline std::vector<std::size_t> parse_size_list(const std::string& text) {
    auto number = [&](std::string_view s) {
        std::size_t v = 0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
            fail(ErrorKind::usage, "bad size list '" + text + "'");
        return v;
    };
    std::vector<std::size_t> out;
    std::string_view rest = text;
    while (!rest.empty()) {
        const auto comma = rest.find(',');
        const std::string_view item = rest.substr(0, comma);
        rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
        const auto dash = item.find('-');
        if (dash == std::string_view::npos) {
            out.push_back(number(item));
            continue;
        }
        const auto colon = item.find(':');
        const std::size_t lo = number(item.substr(0, dash));
        const std::size_t hi = number(item.substr(dash + 1, colon == std::string_view::npos ? colon : colon - dash - 1));
        const std::size_t step = colon == std::string_view::npos ? 1 : number(item.substr(colon + 1));
        if (step == 0 || hi < lo) fail(ErrorKind::usage, "bad range in size list '" + text + "'");
        for (std::size_t n = lo; n <= hi; n += step) out.push_back(n);
    }
    if (out.empty()) fail(ErrorKind::usage, "empty size list");
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

namespace detail {

inline double resolve_truth(const io::EstimateFile& file, std::optional<double> flag) {
    if (flag) {
        if (!(*flag > 0.0)) fail(ErrorKind::usage, "--truth must be positive");
        return *flag;
    }
    if (file.truth) return *file.truth;
    fail(ErrorKind::usage, "no truth value: pass --truth or add a truth= header");
}

inline InputDigest digest(const std::string& name, const io::EstimateFile& file, std::optional<double> truth) {
    return {name, file.values.size(), truth};
}

}  // namespace detail

[[nodiscard]] inline CoreSection core_section(const EstimateSample& sample, Aggregation method) {
    CoreSection core;
    core.method = method;
    core.collective = collective_estimate(sample, method);
    core.decomposition = dpt_decompose(sample);
    core.relative = relative_metrics(core.decomposition, sample.truth());
    core.percent_error = percent_error(core.collective, sample.truth());
    core.outperformed_fraction = outperformed_fraction(sample, method);
    try {
        core.skewness = skewness(sample.values());
    } catch (const Error&) {
        core.skewness.reset();
    }
    return core;
}

[[nodiscard]] inline CommandOutput cmd_analyze(const std::string& name, const io::EstimateFile& file,
                                               const AnalyzeOptions& opts) {
    const double truth = detail::resolve_truth(file, opts.truth);
    const EstimateSample sample(file.values, truth);
    AnalysisReport report;
    report.command = "analyze";
    report.input = detail::digest(name, file, truth);
    report.core = core_section(sample, opts.method);
    return {report, {}};
}

[[nodiscard]] inline CommandOutput cmd_fit(const std::string& name, const io::EstimateFile& file,
                                           const FitOptions& opts) {
    if (opts.dist != "twopiece" && opts.dist != "gaussian") fail(ErrorKind::usage, "--dist must be twopiece or gaussian");
    if (file.values.size() < min_fit_estimates)
        fail(ErrorKind::input, "fitting needs at least " + std::to_string(min_fit_estimates) + " estimates");
    std::optional<double> truth = opts.truth ? opts.truth : file.truth;
    if (truth && !(*truth > 0.0)) fail(ErrorKind::usage, "--truth must be positive");

    AnalysisReport report;
    report.command = "fit";
    report.input = detail::digest(name, file, truth);
    if (truth) report.core = core_section(EstimateSample(file.values, *truth), Aggregation::mean);

    const auto x = normalize(file.values);
    const Histogram hist = build_histogram(x, opts.bins);
    FitSection fit;
    fit.dist = opts.dist;
    fit.bins = hist.size();
    auto fill_table = [&](const auto& model) {
        for (std::size_t i = 0; i < hist.size(); ++i)
            fit.table.push_back({hist.edges[i], hist.edges[i + 1], hist.center(i), hist.counts[i], hist.densities[i],
                                 model.pdf(hist.center(i))});
    };
    if (opts.dist == "twopiece") {
        const auto r = fit_two_piece(hist);
        fit.sigma1 = r.params.sigma1();
        fit.sigma2 = r.params.sigma2();
        fit.mu = r.params.mu();
        fit.amplitude = r.params.amplitude();
        fit.r_squared = r.r_squared;
        fit.boundary_warning = r.boundary_warning;
        fill_table(r.params);
    } else {
        const auto r = fit_gaussian(hist);
        fit.variance = r.params.variance();
        fit.r_squared = r.r_squared;
        fit.boundary_warning = r.boundary_warning;
        fill_table(r.params);
    }
    const std::string table = fit_table_csv(fit.table);
    report.fit = std::move(fit);
    return {report, {{".hist.csv", table}}};
}

[[nodiscard]] inline CommandOutput cmd_resample(const std::string& name, const io::EstimateFile& file,
                                                const ResampleOptions& opts) {
    const double truth = detail::resolve_truth(file, opts.truth);
    const EstimateSample sample(file.values, truth);
    const VirtualExperimentConfig config{opts.sizes, opts.experiments, opts.threshold, opts.seed, opts.threads};

    AnalysisReport report;
    report.command = "resample";
    report.seed = opts.seed;
    report.input = detail::digest(name, file, truth);
    report.core = core_section(sample, Aggregation::mean);

    const auto points = run_virtual_experiments(sample, config);
    ResampleSection rs;
    rs.sizes = opts.sizes;
    rs.experiments = opts.experiments;
    rs.threshold = opts.threshold;
    rs.correlations = correlations(points);
    rs.center_of_mass = center_of_mass(points);
    rs.curve = opts.exhaustive ? exhaustive_curve(sample, opts.sizes, opts.threshold) : accuracy_curve(sample, config);
    const std::string curve_table = curve_csv(rs.curve, std::nullopt);
    report.resample = std::move(rs);
    return {report, {{".scatter.csv", scatter_csv(points)}, {".curve.csv", curve_table}}};
}

/// Fits alpha * exp(-beta N^2) to the positive curve points with N >= n_min.
/// Zero probabilities carry no information in log space and are skipped.
[[nodiscard]] inline ExpDecayFit fit_curve_tail(const AccuracyCurve& curve, std::size_t n_min) {
    std::vector<CurvePoint> usable;
    for (const auto& p : curve.points)
        if (p.n >= n_min && p.p > 0.0) usable.push_back(p);
    if (usable.size() < 2)
        fail(ErrorKind::input, "fewer than 2 nonzero curve points with N >= " + std::to_string(n_min) +
                                   "; cannot fit an exponential tail");
    return fit_exp_decay(usable, n_min);
}

[[nodiscard]] inline CommandOutput cmd_curve(const std::string& name, const io::EstimateFile& file,
                                             const CurveOptions& opts) {
    const double truth = detail::resolve_truth(file, opts.truth);
    const EstimateSample sample(file.values, truth);
    const auto grid = opts.grid ? *opts.grid : default_curve_grid(sample.size());
    const VirtualExperimentConfig config{grid, opts.experiments, opts.threshold, opts.seed, opts.threads};
    validate(config, sample.size());

    AnalysisReport report;
    report.command = "curve";
    report.seed = opts.seed;
    report.input = detail::digest(name, file, truth);
    report.core = core_section(sample, Aggregation::mean);

    ResampleSection rs;
    rs.sizes = grid;
    rs.experiments = opts.experiments;
    rs.threshold = opts.threshold;
    rs.curve = opts.exhaustive ? exhaustive_curve(sample, grid, opts.threshold) : accuracy_curve(sample, config);
    if (opts.fit_exp) rs.exp_fit = fit_curve_tail(rs.curve, opts.n_min);
    const std::string table = curve_csv(rs.curve, rs.exp_fit);
    report.resample = std::move(rs);
    return {report, {{".curve.csv", table}}};
}

[[nodiscard]] inline GeneratorSpec simulate_spec(const SimulateOptions& opts) {
    if (opts.count < 1) fail(ErrorKind::usage, "--count must be at least 1");
    if (!(opts.scale > 0.0)) fail(ErrorKind::usage, "--scale must be positive");
    if (!(opts.truth > 0.0)) fail(ErrorKind::usage, "--truth must be positive");
    GeneratorSpec spec;
    if (opts.dist == "twopiece") {
        if (!opts.sigma1 || !opts.sigma2) fail(ErrorKind::usage, "twopiece needs --sigma1 and --sigma2");
        if (!(*opts.sigma1 > 0.0) || !(*opts.sigma2 > 0.0)) fail(ErrorKind::usage, "widths must be positive");
        spec.shape = TwoPieceNormal(*opts.sigma1, *opts.sigma2);
    } else if (opts.dist == "gaussian") {
        if (!opts.variance || !(*opts.variance > 0.0)) fail(ErrorKind::usage, "gaussian needs a positive --variance");
        spec.shape = GaussianShape(*opts.variance);
    } else {
        fail(ErrorKind::usage, "--dist must be twopiece or gaussian");
    }
    spec.scale = opts.scale;
    spec.truth = opts.truth;
    spec.count = static_cast<std::size_t>(opts.count);
    spec.seed = opts.seed;
    spec.truncate = opts.truncate;
    return spec;
}

// ---------------------------------------------------------------------------
// Entry point

namespace detail {

inline std::uint64_t fresh_seed() {
    std::random_device rd;
    return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

inline void emit(const CommandOutput& result, const std::optional<std::string>& out_path, std::ostream& out) {
    const std::string text = serialize(result.report);
    if (!out_path) {
        out << text;
        return;
    }
    std::vector<std::pair<std::filesystem::path, std::string>> files{{*out_path, text}};
    std::filesystem::path stem(*out_path);
    stem.replace_extension();
    for (const auto& [suffix, content] : result.tables) files.emplace_back(stem.string() + suffix, content);
    io::write_files(files);
}

inline void error_line(std::ostream& err, std::string_view kind, const std::string& message) {
    err << nlohmann::json{{"error", kind}, {"message", message}}.dump() << "\n";
}

}  // namespace detail

/// Runs one command line (args excludes the program name). Returns the exit status.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Wisdom-of-crowds estimate analytics", "crowdwise"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(toolkit_version));

    std::string file;
    std::optional<double> truth;
    std::optional<std::string> out_path;
    std::optional<std::uint64_t> seed;
    std::string method = "mean";
    std::string sizes_text;
    std::string grid_text;
    std::optional<std::size_t> bins;
    unsigned threads = 0;

    AnalyzeOptions analyze_opts;
    FitOptions fit_opts;
    ResampleOptions resample_opts;
    CurveOptions curve_opts;
    SimulateOptions sim_opts;

    auto* analyze = app.add_subcommand("analyze", "Diversity decomposition and per-crowd statistics");
    analyze->add_option("file", file, "Estimate file")->required();
    analyze->add_option("--truth", truth, "True value (overrides the file header)");
    analyze->add_option("--method", method, "Collective estimate")->check(CLI::IsMember({"mean", "median"}));
    analyze->add_option("--out", out_path, "Write the JSON report here instead of stdout");

    auto* fit = app.add_subcommand("fit", "Fit a mean-1 density to the normalized estimates");
    fit->add_option("file", file, "Estimate file")->required();
    fit->add_option("--dist", fit_opts.dist, "Density shape")->check(CLI::IsMember({"twopiece", "gaussian"}));
    fit->add_option("--bins", bins, "Histogram bin count (default: Freedman-Diaconis)")->check(CLI::Range(2, 100000));
    fit->add_option("--truth", truth, "True value (optional)");
    fit->add_option("--out", out_path, "Report path; plot table goes next to it");

    auto* resample = app.add_subcommand("resample", "Virtual experiments: scatter, correlations, accuracy");
    resample->add_option("file", file, "Estimate file")->required();
    resample->add_option("--truth", truth, "True value");
    resample->add_option("--sizes", sizes_text, "Subsample sizes, e.g. 10,20,40,60");
    resample->add_option("--experiments", resample_opts.experiments, "Experiments per size")->check(CLI::PositiveNumber);
    resample->add_option("--threshold", resample_opts.threshold, "Percent-error cutoff")->check(CLI::PositiveNumber);
    resample->add_option("--seed", seed, "Master seed (random if omitted; recorded in the report)");
    resample->add_flag("--exhaustive", resample_opts.exhaustive, "Enumerate all subsets for the accuracy curve");
    resample->add_option("--threads", threads, "Worker threads (0 = all cores)");
    resample->add_option("--out", out_path, "Report path; plot tables go next to it");

    auto* curve = app.add_subcommand("curve", "Accuracy probability versus group size");
    curve->add_option("file", file, "Estimate file")->required();
    curve->add_option("--truth", truth, "True value");
    curve->add_option("--n-grid", grid_text, "Group sizes, e.g. 1-20,25-100:5");
    curve->add_option("--experiments", curve_opts.experiments, "Experiments per size")->check(CLI::PositiveNumber);
    curve->add_option("--threshold", curve_opts.threshold, "Percent-error cutoff")->check(CLI::PositiveNumber);
    curve->add_flag("--fit-exp", curve_opts.fit_exp, "Fit alpha*exp(-beta*N^2) to the tail");
    curve->add_option("--nmin", curve_opts.n_min, "Smallest N in the tail fit")->check(CLI::PositiveNumber);
    curve->add_option("--seed", seed, "Master seed (random if omitted; recorded in the report)");
    curve->add_flag("--exhaustive", curve_opts.exhaustive, "Enumerate all subsets instead of sampling");
    curve->add_option("--threads", threads, "Worker threads (0 = all cores)");
    curve->add_option("--out", out_path, "Report path; plot table goes next to it");

    auto* simulate = app.add_subcommand("simulate", "Write a synthetic crowd");
    simulate->add_option("--dist", sim_opts.dist, "Shape")->check(CLI::IsMember({"twopiece", "gaussian"}));
    simulate->add_option("--sigma1", sim_opts.sigma1, "Left width (twopiece)");
    simulate->add_option("--sigma2", sim_opts.sigma2, "Right width (twopiece)");
    simulate->add_option("--variance", sim_opts.variance, "Variance (gaussian)");
    simulate->add_option("--scale", sim_opts.scale, "Target mean of the estimates")->required();
    simulate->add_option("--truth", sim_opts.truth, "True value written to the header")->required();
    simulate->add_option("--count", sim_opts.count, "Number of estimates")->required();
    simulate->add_option("--seed", seed, "Seed (random if omitted; printed)");
    simulate->add_flag("--no-truncate{false}", sim_opts.truncate, "Fail instead of redrawing nonpositive values");
    simulate->add_option("--out", out_path, "Estimate file to write")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << (dynamic_cast<const CLI::CallForVersion*>(&e) ? e.what() : app.help()) << "\n";
            return 0;
        }
        detail::error_line(err, to_string(ErrorKind::usage), e.what());
        return exit_code(ErrorKind::usage);
    }

    try {
        auto used_seed = [&] { return seed ? *seed : detail::fresh_seed(); };
        if (analyze->parsed()) {
            analyze_opts.truth = truth;
            analyze_opts.method = method == "median" ? Aggregation::median : Aggregation::mean;
            detail::emit(cmd_analyze(file, io::read_estimates(file), analyze_opts), out_path, out);
        } else if (fit->parsed()) {
            fit_opts.truth = truth;
            fit_opts.bins = bins;
            detail::emit(cmd_fit(file, io::read_estimates(file), fit_opts), out_path, out);
        } else if (resample->parsed()) {
            resample_opts.truth = truth;
            resample_opts.seed = used_seed();
            resample_opts.threads = threads;
            if (!sizes_text.empty()) resample_opts.sizes = parse_size_list(sizes_text);
            detail::emit(cmd_resample(file, io::read_estimates(file), resample_opts), out_path, out);
        } else if (curve->parsed()) {
            curve_opts.truth = truth;
            curve_opts.seed = used_seed();
            curve_opts.threads = threads;
            if (!grid_text.empty()) curve_opts.grid = parse_size_list(grid_text);
            detail::emit(cmd_curve(file, io::read_estimates(file), curve_opts), out_path, out);
        } else if (simulate->parsed()) {
            sim_opts.seed = used_seed();
            const GeneratorSpec spec = simulate_spec(sim_opts);
            const GeneratedCrowd crowd = generate_crowd(spec);
            io::write_files({{*out_path, io::format_estimates(crowd.sample.values(), spec.truth)}});
            nlohmann::json digest{{"command", "simulate"}, {"out", *out_path},     {"dist", sim_opts.dist},
                                  {"scale", spec.scale},   {"truth", spec.truth},  {"count", spec.count},
                                  {"seed", spec.seed},     {"redraws", crowd.redraws}};
            if (sim_opts.dist == "twopiece") {
                digest["sigma1"] = *sim_opts.sigma1;
                digest["sigma2"] = *sim_opts.sigma2;
            } else {
                digest["variance"] = *sim_opts.variance;
            }
            out << digest.dump() << "\n";
        }
    } catch (const Error& e) {
        detail::error_line(err, to_string(e.kind()), e.what());
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        detail::error_line(err, "internal", e.what());
        return 1;
    }
    return 0;
}

}  // namespace crowdwise::cli
