#pragma once

// Chunked training loop, prediction, evaluation and the sequence-length
// ablation.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "affect/tensor/adam.hpp"
#include "affect/train/model.hpp"

namespace affect::train {

struct TrainConfig {
    double learning_rate = kDefaultLearningRate;
    std::size_t audio_batch = 25;
    std::size_t video_batch = 2;
    std::size_t epochs = 60;
    std::size_t sequence_length = 150;
    Objective objective = Objective::ccc;
    std::uint64_t seed = 1;
    double clip_norm = 5.0;
    bool augment = true;
    bool freeze_extractors = false;
    std::size_t max_steps = 0;   // 0 means no cap
    std::size_t eval_every = 0;  // in steps; 0 evaluates once per epoch
    double target_rho = 0.0;     // > 0 stops once the training score reaches it
    std::size_t calibration_frames = 256;  // 0 skips visual projection calibration

    /// Chunks per optimizer step; anything with frames uses the video batch.
    std::size_t batch_size(Modality modality) const;
    void validate() const;
};

struct Scores {
    double arousal = 0.0;
    double valence = 0.0;
};

/// Dimension(s) a modality is judged on: speech arousal, visual valence,
/// fusion the weaker of the two.
double primary_score(Modality modality, const Scores& s);

struct LogRow {
    std::size_t epoch = 0;
    std::size_t step = 0;
    double loss = 0.0;
    Scores train;
    Scores validation;
    bool has_validation = false;
};

struct TrainResult {
    ModelBundle model;
    std::vector<LogRow> log;
    Scores train;
    Scores validation;
    bool reached_target = false;
};

struct Prediction {
    std::vector<double> arousal;
    std::vector<double> valence;
};

/// Evaluation-mode prediction in chunks of `model.sequence_length` with a
/// fresh recurrent state per chunk; the last chunk may be shorter.
Prediction predict(const ModelBundle& model, const PreparedRecording& rec);

/// Concordance over the concatenation of every recording in `recs`.
Scores evaluate(const ModelBundle& model, std::span<const PreparedRecording> recs);
Scores score(std::span<const Prediction> predictions, std::span<const PreparedRecording> recs);

/// Trains `model` in place of a copy and returns the result. Throws
/// DataError for an empty training split and ConfigurationError when the
/// sequence length does not divide a recording.
TrainResult fit(const ModelBundle& model, std::span<const PreparedRecording> train,
                std::span<const PreparedRecording> validation, const TrainConfig& config);

/// Standardizes a fresh visual projection on evenly spaced training frames.
void calibrate_visual(ModelBundle& model, std::span<const PreparedRecording> train, std::size_t frames);

/// Unimodal run from a fresh initialization.
TrainResult train_unimodal(Modality modality, const ModelConfig& model_config, std::span<const PreparedRecording> train,
                           std::span<const PreparedRecording> validation, const TrainConfig& config);

/// Fuses two pretrained extractors under a fresh recurrent stack and trains
/// the whole network.
TrainResult train_multimodal(const ModelBundle& speech_model, const ModelBundle& visual_model,
                             std::span<const PreparedRecording> train, std::span<const PreparedRecording> validation,
                             const TrainConfig& config);

std::string metrics_csv(std::span<const LogRow> log);

struct AblationCell {
    std::size_t sequence_length = 0;
    Scores speech;
    Scores visual;
};

/// One speech and one visual training per length, scored on validation.
std::vector<AblationCell> ablate_sequence_length(const synth::Dataset& data, std::span<const std::size_t> lengths,
                                                 const ModelConfig& model_config, const TrainConfig& config);
std::string ablation_csv(std::span<const AblationCell> cells);

}  // namespace affect::train
