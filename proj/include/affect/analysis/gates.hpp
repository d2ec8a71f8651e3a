#pragma once

// Correlation of recurrent cell outputs with acoustic descriptors on a
// held-out recording.

#include <cstddef>
#include <string>
#include <vector>

#include "affect/analysis/descriptors.hpp"
#include "affect/synth/dataset.hpp"
#include "affect/train/model.hpp"

namespace affect::analysis {

struct GateCorrelation {
    std::size_t layer = 0;
    std::size_t cell = 0;
    std::size_t descriptor = 0;  // index into kDescriptorNames
    double rho = 0.0;
    bool degenerate = false;  // constant cell trace; rho is meaningless
};

struct GateReport {
    std::size_t layers = 0;
    std::size_t cells = 0;
    std::size_t frames = 0;
    /// traces[layer][cell] over every frame of the recording.
    std::vector<std::vector<std::vector<double>>> traces;
    /// series[descriptor] over every frame.
    std::vector<std::vector<double>> series;
    /// Per layer, sorted by |rho| descending with degenerate rows last.
    std::vector<std::vector<GateCorrelation>> rows;

    /// Largest |rho| over both layers for one descriptor.
    double max_abs_rho(std::size_t descriptor) const;
    /// The `k` strongest non-degenerate rows of `layer` for `descriptor`.
    std::vector<GateCorrelation> top(std::size_t layer, std::size_t descriptor, std::size_t k) const;
};

/// Runs `model` over `rec` in chunks of its sequence length and correlates
/// every cell of every recurrent layer with each descriptor.
GateReport gate_correlation(const train::ModelBundle& model, const synth::Recording& rec,
                            const DescriptorConfig& config = {});

/// layer,cell,descriptor,rho,degenerate rows for one layer.
std::string gate_csv(const GateReport& report, std::size_t layer);

/// time_s, the descriptor and its `k` strongest cells, each min-max scaled
/// to [0, 1].
std::string gate_plot_csv(const GateReport& report, std::size_t layer, std::size_t descriptor, std::size_t k);

}  // namespace affect::analysis
