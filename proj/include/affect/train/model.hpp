#pragma once

// Speech, visual and fused affect regressors: feature extractor(s), a
// recurrent stack and a two-output head, plus checkpoint I/O.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "affect/io/frames.hpp"
#include "affect/recurrent/lstm.hpp"
#include "affect/speech/speech_net.hpp"
#include "affect/synth/dataset.hpp"
#include "affect/visual/visual_net.hpp"

namespace affect::train {

enum class Modality { speech, visual, fusion };
enum class Objective { ccc, mse };

const char* modality_name(Modality m);
Modality parse_modality(const std::string& s);
const char* objective_name(Objective o);
Objective parse_objective(const std::string& s);

struct ModelConfig {
    speech::SpeechNetConfig speech = speech::SpeechNetConfig::full();
    visual::VisualNetConfig visual = visual::VisualNetConfig::resnet50();
    std::size_t hidden = recurrent::kFullHiddenSize;
    std::size_t layers = recurrent::kFullLayers;

    static ModelConfig full() { return {}; }
    /// Desk-scale extractors with a narrower recurrent stack.
    static ModelConfig tiny();
};

struct ModelBundle {
    Modality modality = Modality::speech;
    ModelConfig config;
    std::optional<speech::SpeechNet> speech;
    std::optional<visual::VisualNet> visual;
    recurrent::LstmStack lstm;
    recurrent::OutputHead head;

    // Training metadata echoed into checkpoints.
    std::uint64_t seed = 0;
    std::size_t epoch = 0;
    std::size_t step = 0;
    Objective objective = Objective::ccc;
    std::size_t sequence_length = 150;

    static ModelBundle init(Modality modality, const ModelConfig& config, Rng& rng);
    /// Fused model over copies of two trained extractors with a fresh recurrent stack.
    static ModelBundle fuse(const ModelBundle& speech_model, const ModelBundle& visual_model, Rng& rng);

    /// Per-frame width entering the recurrent stack (1280, 640 or 1920).
    std::size_t feature_width() const;
    std::vector<std::pair<std::string, Tensor>> named_parameters() const;
    std::vector<Tensor> parameters() const;
    std::vector<Tensor> extractor_parameters() const;
    ModelBundle clone() const;
};

/// Audio cut into normalized 6 s segments and frames left as stored bytes.
struct PreparedRecording {
    std::string id;
    std::size_t frames = 0;
    std::vector<double> arousal;
    std::vector<double> valence;
    std::vector<std::vector<double>> segments;  // normalized, one per segment
    const io::FrameStack* video = nullptr;

    bool has_audio() const { return !segments.empty(); }
    bool has_video() const { return video != nullptr; }
};

/// Throws DataError naming a missing or misaligned stream required by `modality`.
PreparedRecording prepare_recording(const synth::Recording& rec, Modality modality, const ModelConfig& config);
std::vector<PreparedRecording> prepare_split(const synth::Dataset& data, const std::string& split, Modality modality,
                                             const ModelConfig& config);

struct ChunkOutput {
    Tensor features;    // [L x feature_width]
    Tensor prediction;  // [L x 2], arousal then valence
    std::vector<recurrent::ActivationTrace> traces;
};

struct ForwardOptions {
    bool training = false;
    bool augment = false;
};

ChunkOutput forward_chunk(const ModelBundle& model, const PreparedRecording& rec, std::size_t start, std::size_t length,
                          const ForwardOptions& options, Rng& rng);

void save_checkpoint(const ModelBundle& model, const std::filesystem::path& dir);
ModelBundle load_checkpoint(const std::filesystem::path& dir);

}  // namespace affect::train
