#include <cmath>
#include <set>
#include <sstream>
#include <string>

#include "affect/analysis/gates.hpp"
#include "affect/error.hpp"
#include "affect/synth/dataset.hpp"
#include "affect/train/trainer.hpp"
#include "doctest.h"

using namespace affect;
using namespace affect::analysis;

namespace {

std::size_t count_lines(const std::string& s) {
    std::size_t n = 0;
    for (char c : s) n += c == '\n';
    return n;
}

}  // namespace

TEST_CASE("untrained model report covers every cell and descriptor") {
    auto rec = synth::generate_recording("unseen", 3, 12.0);
    Rng rng(1);
    auto model = train::ModelBundle::init(train::Modality::speech, train::ModelConfig::tiny(), rng);
    auto report = gate_correlation(model, rec);
    CHECK(report.layers == 2);
    CHECK(report.cells == 32);
    CHECK(report.frames == 300);
    CHECK(report.series.size() == kDescriptorCount);
    for (std::size_t l = 0; l < 2; ++l) {
        CHECK(report.rows[l].size() == 32 * kDescriptorCount);
        std::set<std::pair<std::size_t, std::size_t>> seen;
        double previous = 2.0;
        bool degenerate_seen = false;
        for (const auto& r : report.rows[l]) {
            seen.insert({r.cell, r.descriptor});
            CHECK(r.layer == l);
            if (r.degenerate) {
                degenerate_seen = true;
                continue;
            }
            CHECK_FALSE(degenerate_seen);
            CHECK(std::abs(r.rho) <= 1.0 + 1e-12);
            CHECK(std::abs(r.rho) <= previous);
            previous = std::abs(r.rho);
        }
        CHECK(seen.size() == 32 * kDescriptorCount);
        CHECK(count_lines(gate_csv(report, l)) == 1 + 32 * kDescriptorCount);
    }
    // Running again gives byte-identical reports.
    CHECK(gate_csv(gate_correlation(model, rec), 0) == gate_csv(report, 0));
}

TEST_CASE("constant cells are marked degenerate") {
    auto rec = synth::generate_recording("flat", 4, 6.0);
    auto config = train::ModelConfig::tiny();
    Rng rng(2);
    auto model = train::ModelBundle::init(train::Modality::speech, config, rng);
    for (auto& layer : model.lstm.layers) {
        for (Tensor t : layer.parameters()) std::fill(t.mutable_data().begin(), t.mutable_data().end(), 0.0);
    }
    auto report = gate_correlation(model, rec);
    for (const auto& r : report.rows[0]) CHECK(r.degenerate);
    CHECK(report.max_abs_rho(0) == 0.0);
    CHECK(report.top(0, 0, 3).empty());
    const auto csv = gate_csv(report, 0);
    CHECK(csv.find(",,1\n") != std::string::npos);
}

TEST_CASE("plot files are scaled to the unit interval") {
    auto rec = synth::generate_recording("plot", 5, 6.0);
    Rng rng(3);
    auto model = train::ModelBundle::init(train::Modality::speech, train::ModelConfig::tiny(), rng);
    auto report = gate_correlation(model, rec);
    const auto csv = gate_plot_csv(report, 1, 0, 3);
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    CHECK(line.rfind("time_s,rms_energy,layer1_cell", 0) == 0);
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        std::istringstream cells(line);
        std::string cell;
        std::getline(cells, cell, ',');
        while (std::getline(cells, cell, ',')) {
            const double v = std::stod(cell);
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
    CHECK(rows == 150);
}

TEST_CASE("the recording must carry audio") {
    auto rec = synth::generate_recording("mute", 6, 6.0);
    rec.audio.samples.clear();
    Rng rng(4);
    auto model = train::ModelBundle::init(train::Modality::speech, train::ModelConfig::tiny(), rng);
    CHECK_THROWS_AS(gate_correlation(model, rec), DataError);
}
