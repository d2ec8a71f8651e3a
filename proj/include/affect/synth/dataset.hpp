#pragma once

// Synthetic dataset generation and the on-disk layout:
//   <root>/manifest            JSON: seeds, duration, splits
//   <root>/audio/<id>.wav      16 kHz mono 16-bit PCM
//   <root>/video/<id>.frms     96x96 RGB frames at 25 Hz
//   <root>/labels/<id>.csv     time_s,arousal,valence

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "affect/io/frames.hpp"
#include "affect/io/wav.hpp"
#include "affect/synth/synth.hpp"

namespace affect::synth {

struct SynthConfig {
    std::uint64_t seed = 1;
    std::size_t train = 16;
    std::size_t validation = 15;
    std::size_t test = 15;
    double duration_s = 60.0;
};

struct DatasetSplit {
    std::vector<std::string> train;
    std::vector<std::string> validation;
    std::vector<std::string> test;

    /// "train", "validation"/"val", or "test"; other names throw DataError.
    const std::vector<std::string>& named(std::string_view name) const;
};

struct Recording {
    std::string id;
    std::uint64_t seed = 0;
    AffectTrajectory labels;
    io::PcmAudio audio;
    io::FrameStack video;

    bool has_audio() const { return !audio.samples.empty(); }
    bool has_video() const { return video.count > 0; }
};

struct Dataset {
    SynthConfig config;
    std::vector<Recording> recordings;
    DatasetSplit split;

    /// Throws DataError for an unknown id.
    const Recording& find(std::string_view id) const;
    /// Recordings of one partition in manifest order; DataError when empty.
    std::vector<const Recording*> partition(std::string_view name) const;
};

Recording generate_recording(const std::string& id, std::uint64_t dataset_seed, double duration_s);
Dataset generate_dataset(const SynthConfig& config);

struct LoadOptions {
    bool audio = true;
    bool video = true;
};

std::string encode_labels(const AffectTrajectory& labels);
AffectTrajectory decode_labels(std::string_view text, const std::string& origin);

void write_dataset(const Dataset& dataset, const std::filesystem::path& root);
Dataset read_dataset(const std::filesystem::path& root, LoadOptions options = {});

}  // namespace affect::synth
