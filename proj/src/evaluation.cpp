#include "bcatsi/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>

namespace bcatsi {

double truth_range(const TimeSeriesPanel& panel, int f) {
    double lo = 0.0, hi = 0.0;
    bool seen = false;
    auto take = [&](double v) {
        if (!seen) {
            lo = hi = v;
            seen = true;
        } else {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    };
    for (int t = 0; t < panel.T(); ++t) {
        if (panel.obs_mask.at(t, f) == 1.0) take(panel.values.at(t, f));
        if (panel.eval_mask.at(t, f) == 1.0) take(panel.eval_truth.at(t, f));
    }
    return seen ? hi - lo : 0.0;
}

double nrmse(std::span<const ScoredPanel> scored, int f) {
    double acc = 0.0;
    long n = 0;
    for (const ScoredPanel& sp : scored) {
        const TimeSeriesPanel& p = *sp.panel;
        const double range = truth_range(p, f);
        bool has_eval = false;
        for (int t = 0; t < p.T(); ++t) {
            if (p.eval_mask.at(t, f) == 1.0) {
                has_eval = true;
                break;
            }
        }
        if (!has_eval) continue;
        if (range == 0.0) {
            std::cerr << "nrmse: panel " << p.id << " feature " << f
                      << " has zero truth range; cells excluded\n";
            continue;
        }
        for (int t = 0; t < p.T(); ++t) {
            if (p.eval_mask.at(t, f) != 1.0) continue;
            const double e = std::fabs(p.eval_truth.at(t, f) - sp.imputed->at(t, f)) / range;
            acc += e * e;
            ++n;
        }
    }
    if (n == 0) throw DataError("nrmse: no eval cells for feature " + std::to_string(f));
    return std::sqrt(acc / n);
}

double percentile(std::vector<double> values, double q) {
    if (values.empty()) throw ContractError("percentile: empty sample");
    std::sort(values.begin(), values.end());
    if (values.size() == 1) return values[0];
    const double h = q * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(h);
    if (lo + 1 >= values.size()) return values.back();
    const double w = h - static_cast<double>(lo);
    return values[lo] + w * (values[lo + 1] - values[lo]);
}

PosteriorPredictive posterior_predict(ImputationModel& model, const TimeSeriesPanel& panel,
                                      int n_samples, std::uint64_t seed) {
    if (!model.has_variational()) {
        throw DataError("posterior_predict: deterministic model has no posterior; "
                        "use repeated training runs instead");
    }
    if (n_samples < 1) throw ContractError("posterior_predict: need n_samples >= 1");

    PosteriorPredictive pp;
    pp.n_samples = n_samples;
    pp.samples.reserve(static_cast<std::size_t>(n_samples));
    for (int s = 0; s < n_samples; ++s) {
        RandomStream rng(RandomStream::mix(seed, static_cast<std::uint64_t>(s)));
        model.draw_noise(rng);
        pp.samples.push_back(model.impute(panel).output);
    }

    const int T = panel.T(), F = panel.F();
    pp.mean = Mat(T, F);
    pp.stdev = Mat(T, F);
    pp.p5 = Mat(T, F);
    pp.p50 = Mat(T, F);
    pp.p95 = Mat(T, F);
    std::vector<double> cell(static_cast<std::size_t>(n_samples));
    for (int i = 0; i < T * F; ++i) {
        double m = 0.0;
        for (int s = 0; s < n_samples; ++s) {
            cell[static_cast<std::size_t>(s)] = pp.samples[static_cast<std::size_t>(s)].data[i];
            m += cell[static_cast<std::size_t>(s)];
        }
        m /= n_samples;
        double var = 0.0;
        for (double v : cell) var += (v - m) * (v - m);
        pp.mean.data[i] = m;
        pp.stdev.data[i] = n_samples > 1 ? std::sqrt(var / (n_samples - 1)) : 0.0;
        pp.p5.data[i] = percentile(cell, 0.05);
        pp.p50.data[i] = percentile(cell, 0.50);
        pp.p95.data[i] = percentile(cell, 0.95);
    }
    return pp;
}

const MetricRow* MetricTable::find(const std::string& analyte) const {
    for (const auto& r : rows) {
        if (r.analyte == analyte) return &r;
    }
    return nullptr;
}

MetricTable make_metric_table(const std::vector<std::string>& analytes,
                              const std::vector<std::vector<double>>& per_sample_nrmse) {
    if (analytes.size() != per_sample_nrmse.size()) {
        throw ContractError("make_metric_table: analyte/value count mismatch");
    }
    MetricTable table;
    double mean_acc = 0.0;
    for (std::size_t a = 0; a < analytes.size(); ++a) {
        const std::vector<double>& vals = per_sample_nrmse[a];
        if (vals.empty()) throw ContractError("make_metric_table: no samples for " + analytes[a]);
        MetricRow row;
        row.analyte = analytes[a];
        double m = 0.0;
        for (double v : vals) m += v;
        m /= static_cast<double>(vals.size());
        double var = 0.0;
        for (double v : vals) var += (v - m) * (v - m);
        row.mean = m;
        row.stdev = vals.size() > 1 ? std::sqrt(var / (static_cast<double>(vals.size()) - 1.0))
                                    : 0.0;
        row.band_low = percentile(vals, 0.025);
        row.band_high = percentile(vals, 0.975);
        table.rows.push_back(row);
        mean_acc += m;
    }
    MetricRow overall;
    overall.analyte = "mean_of_means";
    overall.mean = mean_acc / static_cast<double>(analytes.size());
    overall.band_low = overall.band_high = overall.mean;
    overall.stdev = 0.0;
    table.rows.push_back(overall);
    return table;
}

MetricTable compare_runs(const MetricTable& candidate, const MetricTable& baseline) {
    MetricTable out = candidate;
    for (MetricRow& row : out.rows) {
        const MetricRow* base = baseline.find(row.analyte);
        if (base == nullptr) {
            throw DataError("compare_runs: baseline table lacks analyte '" + row.analyte + "'");
        }
        const double worse = std::max(base->mean, row.mean);
        row.rel_improvement = worse == 0.0 ? 0.0 : (base->mean - row.mean) / worse;
    }
    for (const MetricRow& row : baseline.rows) {
        if (candidate.find(row.analyte) == nullptr) {
            throw DataError("compare_runs: candidate table lacks analyte '" + row.analyte + "'");
        }
    }
    return out;
}

std::string metric_table_csv(const MetricTable& table) {
    const bool with_ri =
        !table.rows.empty() && table.rows.front().rel_improvement.has_value();
    std::ostringstream out;
    out << "analyte,mean_nrmse,band_low,band_high,std";
    if (with_ri) out << ",rel_improvement";
    out << "\n";
    char buf[256];
    for (const MetricRow& r : table.rows) {
        std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g,%.17g", r.analyte.c_str(), r.mean,
                      r.band_low, r.band_high, r.stdev);
        out << buf;
        if (with_ri) {
            std::snprintf(buf, sizeof(buf), ",%.17g", r.rel_improvement.value_or(0.0));
            out << buf;
        }
        out << "\n";
    }
    return out.str();
}

MetricTable parse_metric_table_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw DataError("metric table: empty");
    const bool with_ri = line.find(",rel_improvement") != std::string::npos;
    if (line.rfind("analyte,mean_nrmse,band_low,band_high,std", 0) != 0) {
        throw DataError("metric table: unexpected header '" + line + "'");
    }
    MetricTable table;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string field;
        MetricRow r;
        if (!std::getline(row, r.analyte, ',')) {
            throw DataError("metric table: bad row " + std::to_string(line_no));
        }
        auto next_double = [&](double& dst) {
            if (!std::getline(row, field, ',')) {
                throw DataError("metric table: bad row " + std::to_string(line_no));
            }
            dst = std::stod(field);
        };
        next_double(r.mean);
        next_double(r.band_low);
        next_double(r.band_high);
        next_double(r.stdev);
        if (with_ri) {
            double ri = 0.0;
            next_double(ri);
            r.rel_improvement = ri;
        }
        table.rows.push_back(std::move(r));
    }
    return table;
}

} // namespace bcatsi
