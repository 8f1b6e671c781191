// Acceptance suite. Prints one PASS or FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "exqr/errors.hpp"
#include "exqr/extremal_model.hpp"
#include "exqr/pipeline.hpp"
#include "exqr/synth.hpp"
#include "exqr/tail.hpp"
#include "generators.hpp"
#include "oracles.hpp"

using namespace exqr;
namespace fs = std::filesystem;

namespace {

// Median of gamma_pool over 20 seeds must fall in this band. It is median +-
// 4 SD of the Hill estimate on 200 exact Pareto samples (seeds 10001..10200,
// n = 5000, k = 108, floor(n^0.1) = 2), computed with evi_oracle.hpp before
// any model was fitted. test_oracle_band re-derives it.
constexpr double kEviBandLow = 0.14506724295606464;
constexpr double kEviBandHigh = 0.3211921237019818;

const std::vector<double> kLevels{0.97, 0.999, 0.9999};

// Criterion 7 gathers models from the others, so lines are printed in
// criterion order at the end.
std::map<int, std::string> lines;
int failures = 0;

void report(int id, bool pass, const std::string& what, const std::string& measured) {
    lines[id] = std::string(pass ? "PASS" : "FAIL") + " criterion " + std::to_string(id) + ": " + what + " (" +
                measured + ")";
    if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool close_rel(double a, double b, double rel) {
    return std::abs(a - b) <= rel * std::max({std::abs(a), std::abs(b), 1e-300});
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

Dataset to_dataset(const oracle::Instance& inst) {
    const auto n = static_cast<Eigen::Index>(inst.y.size());
    const auto p = static_cast<Eigen::Index>(inst.x.front().size());
    Eigen::MatrixXd x(n, p);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) x(i, j) = inst.x[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        y(i) = inst.y[static_cast<std::size_t>(i)];
    }
    return Dataset(std::move(x), std::move(y));
}

synth::SynthSpec spec(std::size_t n, std::uint64_t seed) {
    synth::SynthSpec s;
    s.n = n;
    s.seed = seed;
    return s;
}

ExtremalOptions options_with_k(std::size_t k) {
    ExtremalOptions opt;
    opt.k = k;
    opt.target_levels.clear();
    for (double t : kLevels) opt.target_levels.emplace_back(t);
    return opt;
}

const std::vector<Method> kBoth{Method::conventional, Method::extremal};

const std::vector<double>& series_of(const PredictionTable& t, Method m, double level) {
    const auto* s = t.find(m, QuantileLevel(level));
    if (!s) throw std::runtime_error("missing prediction series");
    return s->values;
}

// Extremal monotonicity violations across kLevels over every point.
std::size_t monotone_violations(const PredictionTable& t) {
    std::size_t bad = 0;
    const auto& a = series_of(t, Method::extremal, kLevels[0]);
    const auto& b = series_of(t, Method::extremal, kLevels[1]);
    const auto& c = series_of(t, Method::extremal, kLevels[2]);
    for (std::size_t i = 0; i < t.points; ++i) {
        if (!(a[i] <= b[i] && b[i] <= c[i])) ++bad;
    }
    return bad;
}

struct MonotoneTally {
    std::size_t models = 0;
    std::size_t points = 0;
    std::size_t violations = 0;
    std::size_t repairs = 0;

    void add(const PredictionTable& t) {
        ++models;
        points += t.points;
        violations += monotone_violations(t);
        repairs += t.crossing_repairs;
    }
};

MonotoneTally monotone;

// ---------------------------------------------------------------------------

void criterion_1() {
    const auto t0 = std::chrono::steady_clock::now();
    gen::Rng rng(20240601);
    const double taus[] = {0.1, 0.5, 0.9};
    std::size_t mismatches = 0, instances = 0;
    double worst = 0.0;
    for (std::size_t i = 0; i < 200; ++i) {
        const std::size_t p = 1 + i % 2;
        const std::size_t n = static_cast<std::size_t>(rng.integer(static_cast<int>(p) + 3, 12));
        const auto inst = gen::random_instance(rng, n, p);
        const double tau = taus[i % 3];
        const auto fit = fit_quantile_regression(to_dataset(inst), QuantileLevel(tau));
        const auto best = oracle::basis_enumeration(inst, tau);
        const double rel = std::abs(fit.objective - best.objective) / std::max(std::abs(best.objective), 1e-300);
        worst = std::max(worst, rel);
        if (!close_rel(fit.objective, best.objective, 1e-8)) ++mismatches;
        ++instances;
    }
    const double secs = seconds_since(t0);
    report(1, mismatches == 0 && secs < 10.0, "solver objective equals basis enumeration on 200 instances",
           fmt("%zu/%zu mismatches, worst relative gap %.3g, %.3f s", mismatches, instances, worst, secs));
}

void criterion_2() {
    std::size_t checks = 0, bad = 0;
    double worst = 0.0;
    const auto grid = intermediate_levels(5000, TailConfig::make(5000, 200));
    for (double gamma : {0.05, 0.25, 0.5, 1.0}) {
        for (double scale : {1.0, 2.5, 1e-3, 750.0}) {
            for (const auto& base : {grid.levels.front(), grid.levels[grid.size() / 2], grid.levels[3 * grid.size() / 4]}) {
                const double q_base = scale * std::pow(1.0 - base.value(), -gamma);
                for (double target : {0.999, 0.9999, 0.99999}) {
                    const double truth = scale * std::pow(1.0 - target, -gamma);
                    const double got = weissman_extrapolate(q_base, base, QuantileLevel(target), gamma);
                    worst = std::max(worst, std::abs(got - truth) / truth);
                    if (!close_rel(got, truth, 1e-12)) ++bad;
                    ++checks;
                }
            }
        }
    }
    report(2, bad == 0, "extrapolation from exact Pareto quantiles reproduces true quantiles",
           fmt("%zu/%zu outside 1e-12, worst relative error %.3g", bad, checks, worst));
}

void criterion_3() {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t n = 5000;
    const auto k = static_cast<std::size_t>(std::lround(std::pow(static_cast<double>(n), 0.55)));
    std::vector<double> gammas;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto sample = synth::generate(spec(n, seed));
        const auto model = fit_extremal(sample.data, options_with_k(k));
        gammas.push_back(model.gamma_pool());
        monotone.add(predict_table(model, sample.data.design(), kBoth));
    }
    const double med = median(gammas);
    const double secs = seconds_since(t0);
    report(3, med >= kEviBandLow && med <= kEviBandHigh && secs < 120.0,
           "median pooled EVI over 20 seeds inside the Monte Carlo band",
           fmt("k = %zu, median %.4f, band [%.4f, %.4f], min %.4f, max %.4f, %.1f s", k, med, kEviBandLow,
               kEviBandHigh, *std::min_element(gammas.begin(), gammas.end()),
               *std::max_element(gammas.begin(), gammas.end()), secs));
}

// Shared fixture for criteria 4 to 8: fit on seed 1, predict at seed 2.
struct Fixture {
    synth::SynthSample train = synth::generate(spec(5000, 1));
    synth::SynthSample test = synth::generate(spec(5000, 2));
    ExtremalQRModel model = fit_extremal(train.data, options_with_k(200));
    PredictionTable table = predict_table(model, test.data.design(), kBoth);
};

void criterion_4(const Fixture& f) {
    const auto& ext = series_of(f.table, Method::extremal, 0.97);
    const auto& conv = series_of(f.table, Method::conventional, 0.97);
    std::vector<double> abs_log;
    for (std::size_t i = 0; i < ext.size(); ++i) abs_log.push_back(std::abs(std::log(ext[i] / conv[i])));
    const double med = median(abs_log);
    report(4, med <= 0.05, "extremal and conventional agree at 0.97",
           fmt("median |log ratio| %.4f over %zu points, tau_base %.5f", med, abs_log.size(),
               f.model.tau_base().value()));
}

void criterion_5(const Fixture& f) {
    const auto& ext = series_of(f.table, Method::extremal, 0.9999);
    const auto& conv = series_of(f.table, Method::conventional, 0.9999);
    std::size_t above = 0;
    double sum = 0.0;
    for (std::size_t i = 0; i < ext.size(); ++i) {
        if (ext[i] > conv[i]) ++above;
        sum += std::log(ext[i] / conv[i]);
    }
    const double share = static_cast<double>(above) / static_cast<double>(ext.size());
    const double mean = sum / static_cast<double>(ext.size());
    report(5, share >= 0.9 && mean > 0.0, "extremal exceeds conventional at 0.9999",
           fmt("extremal higher at %.1f%% of points, mean log ratio %.4f (ratio %.3f)", 100.0 * share, mean,
               std::exp(mean)));
}

void criterion_6(const Fixture& f) {
    const auto fresh = synth::generate(spec(100000, 3));
    const auto table = predict_table(f.model, fresh.data.design(), kBoth);
    monotone.add(table);
    const auto& y = fresh.data.response();
    auto rate = [&](const std::vector<double>& q) {
        std::size_t over = 0;
        for (std::size_t i = 0; i < q.size(); ++i) {
            if (y(static_cast<Eigen::Index>(i)) > q[i]) ++over;
        }
        return static_cast<double>(over) / static_cast<double>(q.size());
    };
    const double ext = rate(series_of(table, Method::extremal, 0.999));
    const double conv = rate(series_of(table, Method::conventional, 0.9999));
    const double ext4 = rate(series_of(table, Method::extremal, 0.9999));
    report(6, ext >= 0.0004 && ext <= 0.0025 && conv >= 0.0002,
           "exceedance of extremal 0.999 calibrated, conventional 0.9999 at least twice nominal",
           fmt("extremal 0.999: %.5f in [0.0004, 0.0025]; conventional 0.9999: %.5f vs >= 0.0002; "
               "extremal 0.9999: %.5f",
               ext, conv, ext4));
}

void criterion_7(const Fixture& f) {
    monotone.add(f.table);
    report(7, monotone.violations == 0, "extremal predictions non-decreasing across 0.97, 0.999, 0.9999",
           fmt("%zu violations over %zu models and %zu points; %zu points rearranged", monotone.violations,
               monotone.models, monotone.points, monotone.repairs));
}

void criterion_8(const Fixture& f) {
    const Eigen::VectorXd scaled_y = 7.0 * f.train.data.response();
    const auto scaled = fit_extremal(f.train.data.with_response(scaled_y), options_with_k(200));
    const auto table = predict_table(scaled, f.test.data.design(), kBoth);
    monotone.add(table);
    std::size_t bad = 0, checks = 0;
    double worst = 0.0;
    for (double level : kLevels) {
        const auto& a = series_of(f.table, Method::extremal, level);
        const auto& b = series_of(table, Method::extremal, level);
        for (std::size_t i = 0; i < a.size(); ++i) {
            worst = std::max(worst, std::abs(b[i] - 7.0 * a[i]) / std::abs(7.0 * a[i]));
            if (!close_rel(b[i], 7.0 * a[i], 1e-10)) ++bad;
            ++checks;
        }
    }
    const double dg = std::abs(scaled.gamma_pool() - f.model.gamma_pool());
    report(8, bad == 0 && dg <= 1e-12, "scaling responses by 7 scales extremal predictions, keeps gamma",
           fmt("%zu/%zu predictions outside 1e-10 (worst %.3g), |gamma change| %.3g", bad, checks, worst, dg));
}

void criterion_9() {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<std::string> problems;

    const auto series = synth_series(spec(1462, 9), Date{std::chrono::year{2000} / 1 / 1}, "two_year_split");
    RunConfig cfg;
    cfg.train = parse_date_range(format_date(series.rows.front().date) + ":" + format_date(series.rows[730].date));
    cfg.test = parse_date_range(format_date(series.rows[731].date) + ":" + format_date(series.rows.back().date));
    const auto run = run_postprocess(series, cfg);
    std::size_t full = 0;
    for (const auto& s : run.table.series) full += s.values.size() == 731;
    if (run.train_rows != 731) problems.push_back("train rows " + std::to_string(run.train_rows));
    if (run.table.series.size() != 6 || full != 6) problems.push_back("series shape");
    monotone.add(run.table);

    const fs::path dir = fs::temp_directory_path() / "exqr_acceptance_batch";
    fs::remove_all(dir);
    std::string manifest_text = "basin_id,path\n";
    std::vector<std::string> rows;
    for (std::uint64_t b = 0; b < 180; ++b) {
        char id[32];
        std::snprintf(id, sizeof id, "basin%04llu", static_cast<unsigned long long>(b + 1));
        const auto basin = synth_series(spec(1462, synth::derive_seed(42, b)), Date{std::chrono::year{1990} / 1 / 1}, id);
        write_text_file(dir / (std::string(id) + ".csv"), series_csv(basin));
        rows.push_back(std::string(id) + "," + id + ".csv\n");
    }
    auto manifest_a = parse_manifest(manifest_text + [&] {
        std::string s;
        for (const auto& l : rows) s += l;
        return s;
    }(), dir);
    std::shuffle(rows.begin(), rows.end(), std::mt19937_64(7));
    auto manifest_b = parse_manifest(manifest_text + [&] {
        std::string s;
        for (const auto& l : rows) s += l;
        return s;
    }(), dir);

    RunConfig batch_cfg;
    const auto a = run_batch(manifest_a, batch_cfg, 1);
    const auto b = run_batch(manifest_b, batch_cfg, 4);
    fs::remove_all(dir);

    const std::string ja = batch_summary_json(a, batch_cfg).dump();
    const std::string jb = batch_summary_json(b, batch_cfg).dump();
    if (ja != jb) problems.push_back("summary JSON differs");
    std::size_t differing = 0;
    for (std::size_t i = 0; i < a.outcomes.size(); ++i) {
        const auto& ra = a.outcomes[i].result;
        const auto& rb = b.outcomes[i].result;
        if (a.outcomes[i].basin_id != b.outcomes[i].basin_id || !ra || !rb ||
            predictions_csv(ra->test_dates, ra->table) != predictions_csv(rb->test_dates, rb->table)) {
            ++differing;
        }
        if (ra) monotone.add(ra->table);
    }
    if (differing) problems.push_back(std::to_string(differing) + " basins differ");
    if (a.summary.basins_total != 180 || a.summary.basins_failed != 0) problems.push_back("basin failures");

    std::string detail = fmt("%zu series of 731 values, train %zu rows; batch %zu/%zu basins ok, summary %s, %.1f s",
                             full, run.train_rows, a.summary.basins_total - a.summary.basins_failed,
                             a.summary.basins_total, ja == jb ? "identical" : "differs", seconds_since(t0));
    for (const auto& p : problems) detail += "; " + p;
    report(9, problems.empty(), "731/731 run shape and deterministic 180-basin batch", detail);
}

void criterion_10(const Fixture& f) {
    std::vector<std::string> problems;
    const std::string bytes = serialize_model(f.model);
    const auto back = deserialize_model(bytes);
    const auto table = predict_table(back, f.test.data.design(), kBoth);
    std::size_t differing = 0, values = 0;
    for (std::size_t s = 0; s < table.series.size(); ++s) {
        for (std::size_t i = 0; i < table.points; ++i) {
            differing += table.series[s].values[i] != f.table.series[s].values[i];
            ++values;
        }
    }
    if (differing) problems.push_back(std::to_string(differing) + " predictions differ");
    if (serialize_model(back) != bytes) problems.push_back("re-serialized bytes differ");

    std::size_t cases = 0, named = 0;
    auto expect_field = [&](const std::string& text, const std::string& field) {
        ++cases;
        try {
            deserialize_model(text);
            problems.push_back("accepted corruption of " + field);
        } catch (const ParseError& e) {
            if (e.field() == field && std::string(e.what()).find(field) != std::string::npos) {
                ++named;
            } else {
                problems.push_back("field '" + e.field() + "' for corruption of " + field);
            }
        }
    };
    const auto doc = nlohmann::json::parse(bytes);
    for (const auto& [key, value] : doc.items()) {
        auto broken = doc;
        broken.erase(key);
        expect_field(broken.dump(), key);
    }
    {
        auto broken = doc;
        broken["fits"][3]["beta"] = "not an array";
        expect_field(broken.dump(), "fits[3].beta");
    }
    {
        auto broken = doc;
        broken["gamma_pool"] = "0.25";
        expect_field(broken.dump(), "gamma_pool");
    }
    {
        auto broken = doc;
        broken["fits"][0]["alpha"] = nullptr;
        expect_field(broken.dump(), "fits[0].alpha");
    }
    ++cases;
    try {
        auto broken = doc;
        broken["schema_version"] = ExtremalQRModel::kSchemaVersion + 1;
        deserialize_model(broken.dump());
        problems.push_back("accepted a future schema version");
    } catch (const VersionError&) {
        ++named;
    }
    ++cases;
    try {
        deserialize_model(bytes.substr(0, bytes.size() / 2));
        problems.push_back("accepted truncated file");
    } catch (const ParseError&) {
        ++named;
    }

    std::string detail = fmt("%zu/%zu predictions bit-identical, %zu/%zu corruptions rejected with the expected error",
                             values - differing, values, named, cases);
    for (const auto& p : problems) detail += "; " + p;
    report(10, problems.empty(), "model file round trip and corruption errors", detail);
}

void guarded(int id, const std::function<void()>& body) {
    try {
        body();
    } catch (const std::exception& e) {
        report(id, false, "threw", e.what());
    }
}

}  // namespace

int main() {
    guarded(1, criterion_1);
    guarded(2, criterion_2);
    guarded(3, criterion_3);
    std::optional<Fixture> fixture;
    try {
        fixture.emplace();
    } catch (const std::exception& e) {
        std::printf("fixture failed: %s\n", e.what());
    }
    if (fixture) {
        guarded(4, [&] { criterion_4(*fixture); });
        guarded(5, [&] { criterion_5(*fixture); });
        guarded(6, [&] { criterion_6(*fixture); });
        guarded(8, [&] { criterion_8(*fixture); });
        guarded(9, criterion_9);
        guarded(7, [&] { criterion_7(*fixture); });
        guarded(10, [&] { criterion_10(*fixture); });
    } else {
        for (int id = 4; id <= 10; ++id) report(id, false, "fixture unavailable", "");
    }
    for (const auto& [id, line] : lines) std::printf("%s\n", line.c_str());
    return failures == 0 ? 0 : 1;
}
