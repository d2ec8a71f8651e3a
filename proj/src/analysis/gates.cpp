#include "affect/analysis/gates.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "affect/error.hpp"
#include "affect/io/wav.hpp"
#include "affect/metrics/concordance.hpp"

namespace affect::analysis {
namespace {

bool is_constant(const std::vector<double>& v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return *hi - *lo <= 1e-12 * (1.0 + std::abs(*lo));
}

std::vector<double> unit_range(const std::vector<double>& v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    std::vector<double> out(v.size(), 0.0);
    if (*hi > *lo)
        for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - *lo) / (*hi - *lo);
    return out;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

double GateReport::max_abs_rho(std::size_t descriptor) const {
    double best = 0.0;
    for (const auto& layer : rows)
        for (const auto& r : layer)
            if (!r.degenerate && r.descriptor == descriptor) best = std::max(best, std::abs(r.rho));
    return best;
}

std::vector<GateCorrelation> GateReport::top(std::size_t layer, std::size_t descriptor, std::size_t k) const {
    std::vector<GateCorrelation> out;
    for (const auto& r : rows.at(layer)) {
        if (out.size() == k) break;
        if (!r.degenerate && r.descriptor == descriptor) out.push_back(r);
    }
    return out;
}

GateReport gate_correlation(const train::ModelBundle& model, const synth::Recording& rec, const DescriptorConfig& config) {
    if (!rec.has_audio()) throw DataError("recording " + rec.id + " is missing its audio stream");
    const auto prepared = train::prepare_recording(rec, model.modality, model.config);
    const auto descriptors = compute_descriptors(io::pcm_to_real(rec.audio.samples), config);

    GateReport report;
    report.layers = model.lstm.layers.size();
    report.cells = model.lstm.hidden_size();
    report.frames = std::min(prepared.frames, descriptors.size());
    report.traces.assign(report.layers, std::vector<std::vector<double>>(report.cells));
    Rng rng(0);
    for (std::size_t start = 0; start < report.frames; start += model.sequence_length) {
        const std::size_t len = std::min(model.sequence_length, report.frames - start);
        const auto out = train::forward_chunk(model, prepared, start, len, {}, rng);
        for (std::size_t l = 0; l < report.layers; ++l)
            for (std::size_t c = 0; c < report.cells; ++c) {
                auto s = out.traces[l].cell_series(c);
                report.traces[l][c].insert(report.traces[l][c].end(), s.begin(), s.end());
            }
    }
    const std::span<const DescriptorFrame> used(descriptors.data(), report.frames);
    for (std::size_t d = 0; d < kDescriptorCount; ++d) report.series.push_back(descriptor_series(used, d));

    report.rows.resize(report.layers);
    for (std::size_t l = 0; l < report.layers; ++l) {
        auto& rows = report.rows[l];
        for (std::size_t c = 0; c < report.cells; ++c) {
            const bool flat = is_constant(report.traces[l][c]);
            for (std::size_t d = 0; d < kDescriptorCount; ++d) {
                GateCorrelation g{l, c, d, 0.0, flat || is_constant(report.series[d])};
                if (!g.degenerate) g.rho = metrics::pearson(report.traces[l][c], report.series[d]);
                rows.push_back(g);
            }
        }
        std::stable_sort(rows.begin(), rows.end(), [](const GateCorrelation& a, const GateCorrelation& b) {
            if (a.degenerate != b.degenerate) return !a.degenerate;
            return std::abs(a.rho) > std::abs(b.rho);
        });
    }
    return report;
}

std::string gate_csv(const GateReport& report, std::size_t layer) {
    std::string out = "layer,cell,descriptor,rho,degenerate\n";
    for (const auto& r : report.rows.at(layer)) {
        out += std::to_string(r.layer) + "," + std::to_string(r.cell) + "," + kDescriptorNames[r.descriptor] + "," +
               (r.degenerate ? std::string() : fmt(r.rho)) + "," + (r.degenerate ? "1" : "0") + "\n";
    }
    return out;
}

std::string gate_plot_csv(const GateReport& report, std::size_t layer, std::size_t descriptor, std::size_t k) {
    const auto cells = report.top(layer, descriptor, k);
    std::vector<std::vector<double>> cols{unit_range(report.series.at(descriptor))};
    std::string out = std::string("time_s,") + kDescriptorNames[descriptor];
    for (const auto& c : cells) {
        out += ",layer" + std::to_string(layer) + "_cell" + std::to_string(c.cell);
        cols.push_back(unit_range(report.traces[layer][c.cell]));
    }
    out += "\n";
    for (std::size_t t = 0; t < report.frames; ++t) {
        out += fmt(0.04 * static_cast<double>(t));
        for (const auto& col : cols) out += "," + fmt(col[t]);
        out += "\n";
    }
    return out;
}

}  // namespace affect::analysis
