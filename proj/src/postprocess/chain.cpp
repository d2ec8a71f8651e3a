#include "affect/postprocess/chain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "affect/error.hpp"
#include "affect/metrics/concordance.hpp"

namespace affect::post {
namespace {

double mean_of(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

double std_of(std::span<const double> x) {
    const double m = mean_of(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(x.size()));
}

std::vector<double> apply_step(StepKind kind, double param, std::span<const double> pred) {
    switch (kind) {
        case StepKind::median: return median_filter(pred, static_cast<std::size_t>(param));
        case StepKind::center: return center(pred, param);
        case StepKind::scale: return scale(pred, param);
        case StepKind::shift: return time_shift(pred, static_cast<std::size_t>(param));
    }
    throw ParameterError("unknown post-processing step");
}

}  // namespace

std::vector<double> median_filter(std::span<const double> pred, std::size_t window) {
    if (window < 3 || window % 2 == 0) throw ParameterError("median window must be odd and at least 3, got " + std::to_string(window));
    if (window > pred.size()) {
        throw ParameterError("median window " + std::to_string(window) + " exceeds track length " + std::to_string(pred.size()));
    }
    const std::size_t half = window / 2, n = pred.size();
    std::vector<double> out(n), buf;
    buf.reserve(window);
    for (std::size_t t = 0; t < n; ++t) {
        const std::size_t a = t >= half ? t - half : 0, b = std::min(n, t + half + 1);
        buf.assign(pred.begin() + static_cast<std::ptrdiff_t>(a), pred.begin() + static_cast<std::ptrdiff_t>(b));
        const std::size_t m = buf.size() / 2;
        std::nth_element(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(m), buf.end());
        const double upper = buf[m];
        if (buf.size() % 2 == 1) {
            out[t] = upper;
        } else {
            const double lower = *std::max_element(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(m));
            out[t] = 0.5 * (lower + upper);
        }
    }
    return out;
}

std::vector<double> center(std::span<const double> pred, double bias) {
    std::vector<double> out(pred.begin(), pred.end());
    for (double& v : out) v += bias;
    return out;
}

std::vector<double> scale(std::span<const double> pred, double ratio) {
    if (!(ratio > 0.0) || !std::isfinite(ratio)) throw ParameterError("scale ratio must be positive and finite");
    if (pred.empty()) return {};
    const double m = mean_of(pred);
    std::vector<double> out(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) out[i] = m + ratio * (pred[i] - m);
    return out;
}

std::vector<double> time_shift(std::span<const double> pred, std::size_t k) {
    if (k >= pred.size()) throw ParameterError("shift " + std::to_string(k) + " not below track length " + std::to_string(pred.size()));
    std::vector<double> out(pred.size());
    for (std::size_t t = 0; t < pred.size(); ++t) out[t] = t >= k ? pred[t - k] : pred[0];
    return out;
}

const char* step_name(StepKind kind) {
    switch (kind) {
        case StepKind::median: return "median";
        case StepKind::center: return "center";
        case StepKind::scale: return "scale";
        case StepKind::shift: return "shift";
    }
    return "?";
}

bool PostProcessChain::empty() const {
    return std::none_of(steps.begin(), steps.end(), [](const StepRecord& s) { return s.kept; });
}

const StepRecord* PostProcessChain::kept(StepKind kind) const {
    for (const auto& s : steps)
        if (s.kind == kind && s.kept) return &s;
    return nullptr;
}

FitResult fit_chain(std::span<const double> val_pred, std::span<const double> val_gold, const FitGrids& grids) {
    if (val_pred.size() != val_gold.size()) throw DimensionError("validation prediction and gold lengths differ");
    constexpr StepKind order[] = {StepKind::median, StepKind::center, StepKind::scale, StepKind::shift};
    std::vector<StepRecord> records;
    for (StepKind kind : order) records.push_back(StepRecord{kind});

    auto run = [&](std::size_t from, std::size_t to, std::vector<double> x) {
        for (std::size_t i = from; i < to; ++i)
            if (records[i].kept) x = apply_step(records[i].kind, records[i].param, x);
        return x;
    };

    double rho = metrics::ccc(val_pred, val_gold);
    FitResult result;
    result.rho_trace.push_back(rho);
    const std::vector<double> pred(val_pred.begin(), val_pred.end());

    for (;;) {
        std::size_t best_step = records.size();
        double best_rho = rho, best_param = 0.0;
        for (std::size_t i = 0; i < records.size(); ++i) {
            if (records[i].kept) continue;
            const std::vector<double> input = run(0, i, pred);
            std::vector<double> candidates;
            switch (records[i].kind) {
                case StepKind::median:
                    for (std::size_t w : grids.median_windows)
                        if (w >= 3 && w % 2 == 1 && w <= input.size()) candidates.push_back(static_cast<double>(w));
                    break;
                case StepKind::center: candidates.push_back(mean_of(val_gold) - mean_of(input)); break;
                case StepKind::scale: {
                    const double spread = std_of(input);
                    if (!(spread > 1e-12 * (1.0 + std::abs(mean_of(input))))) {
                        throw DegenerateInputError("cannot fit scaling to a constant prediction");
                    }
                    candidates.push_back(std_of(val_gold) / spread);
                    break;
                }
                case StepKind::shift:
                    for (std::size_t k = 1; k <= grids.max_shift && k < input.size(); ++k) candidates.push_back(static_cast<double>(k));
                    break;
            }
            StepRecord& rec = records[i];
            rec.rho_before = rho;
            rec.rho_after = -2.0;
            for (double p : candidates) {
                const double r = metrics::ccc(run(i + 1, records.size(), apply_step(rec.kind, p, input)), val_gold);
                if (r > rec.rho_after) {
                    rec.rho_after = r;
                    rec.param = p;
                }
            }
            if (rec.rho_after > best_rho + kMinImprovement) {
                best_rho = rec.rho_after;
                best_param = rec.param;
                best_step = i;
            }
        }
        if (best_step == records.size()) break;
        records[best_step].kept = true;
        records[best_step].param = best_param;
        records[best_step].rho_after = best_rho;
        rho = best_rho;
        result.rho_trace.push_back(rho);
    }
    result.chain.steps = std::move(records);
    return result;
}

std::vector<double> apply_chain(const PostProcessChain& chain, std::span<const double> pred) {
    std::vector<double> out(pred.begin(), pred.end());
    for (const auto& s : chain.steps)
        if (s.kept) out = apply_step(s.kind, s.param, out);
    return out;
}

std::string serialize_chains(const NamedChains& chains) {
    std::string out = "# postprocess chain v1\n";
    char buf[256];
    for (const auto& [name, chain] : chains) {
        out += "chain " + name + "\n";
        for (const auto& s : chain.steps) {
            std::snprintf(buf, sizeof buf, "step %s kept=%d param=%.17g rho_before=%.17g rho_after=%.17g\n",
                          step_name(s.kind), s.kept ? 1 : 0, s.param, s.rho_before, s.rho_after);
            out += buf;
        }
    }
    return out;
}

NamedChains parse_chains(const std::string& text, const std::string& origin) {
    NamedChains out;
    std::size_t pos = 0;
    auto fail = [&](const std::string& what) {
        throw ParseError(origin + ": " + what + " at offset " + std::to_string(pos));
    };
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        const std::string line = text.substr(pos, end - pos);
        if (!line.empty() && line[0] != '#') {
            std::istringstream in(line);
            std::string word;
            in >> word;
            if (word == "chain") {
                std::string name;
                if (!(in >> name)) fail("chain without a name");
                out.emplace_back(name, PostProcessChain{});
            } else if (word == "step") {
                if (out.empty()) fail("step before any chain");
                std::string kind;
                in >> kind;
                StepRecord s;
                if (kind == "median") s.kind = StepKind::median;
                else if (kind == "center") s.kind = StepKind::center;
                else if (kind == "scale") s.kind = StepKind::scale;
                else if (kind == "shift") s.kind = StepKind::shift;
                else fail("unknown step '" + kind + "'");
                int kept = 0;
                char tail = 0;
                const std::string rest = line.substr(line.find(kind) + kind.size());
                if (std::sscanf(rest.c_str(), " kept=%d param=%lf rho_before=%lf rho_after=%lf %c", &kept, &s.param, &s.rho_before,
                                &s.rho_after, &tail) != 4) {
                    fail("malformed step line");
                }
                s.kept = kept != 0;
                out.back().second.steps.push_back(s);
            } else {
                fail("unexpected '" + word + "'");
            }
        }
        pos = end + 1;
    }
    return out;
}

}  // namespace affect::post
