#include "affect/train/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

#include "affect/error.hpp"
#include "affect/metrics/concordance.hpp"
#include "affect/synth/synth.hpp"
#include "affect/util/parallel.hpp"

namespace affect::train {
namespace {

struct Chunk {
    std::size_t rec;
    std::size_t start;
};

std::uint64_t mix(std::uint64_t a, std::uint64_t b) { return synth::splitmix64(a ^ synth::splitmix64(b)); }

void shuffle(std::vector<Chunk>& v, std::uint64_t seed) {
    std::uint64_t state = seed;
    for (std::size_t i = v.size(); i > 1; --i) {
        state = synth::splitmix64(state);
        std::swap(v[i - 1], v[state % i]);
    }
}

Tensor chunk_loss(const Tensor& prediction, const PreparedRecording& rec, std::size_t start, std::size_t length,
                  Objective objective) {
    const std::span<const double> ga(rec.arousal.data() + start, length);
    const std::span<const double> gv(rec.valence.data() + start, length);
    const Tensor pa = column(prediction, 0), pv = column(prediction, 1);
    if (objective == Objective::ccc) return metrics::combined_loss(pa, ga, pv, gv);
    return scale(add(metrics::mse_loss(pa, ga), metrics::mse_loss(pv, gv)), 0.5);
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::size_t TrainConfig::batch_size(Modality modality) const {
    return modality == Modality::speech ? audio_batch : video_batch;
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigurationError("learning rate must be positive");
    if (audio_batch == 0 || video_batch == 0) throw ConfigurationError("batch sizes must be positive");
    if (epochs == 0) throw ConfigurationError("epochs must be positive");
    if (sequence_length == 0) throw ConfigurationError("sequence length must be positive");
    if (!(clip_norm > 0.0)) throw ConfigurationError("clip norm must be positive");
}

double primary_score(Modality modality, const Scores& s) {
    switch (modality) {
        case Modality::speech: return s.arousal;
        case Modality::visual: return s.valence;
        case Modality::fusion: return std::min(s.arousal, s.valence);
    }
    return s.arousal;
}

Prediction predict(const ModelBundle& model, const PreparedRecording& rec) {
    Prediction p;
    p.arousal.reserve(rec.frames);
    p.valence.reserve(rec.frames);
    Rng rng(0);
    for (std::size_t start = 0; start < rec.frames; start += model.sequence_length) {
        const std::size_t len = std::min(model.sequence_length, rec.frames - start);
        auto out = forward_chunk(model, rec, start, len, {}, rng);
        const auto d = out.prediction.data();
        for (std::size_t t = 0; t < len; ++t) {
            p.arousal.push_back(d[2 * t]);
            p.valence.push_back(d[2 * t + 1]);
        }
    }
    return p;
}

Scores score(std::span<const Prediction> predictions, std::span<const PreparedRecording> recs) {
    std::vector<double> pa, pv, ga, gv;
    for (std::size_t i = 0; i < recs.size(); ++i) {
        pa.insert(pa.end(), predictions[i].arousal.begin(), predictions[i].arousal.end());
        pv.insert(pv.end(), predictions[i].valence.begin(), predictions[i].valence.end());
        ga.insert(ga.end(), recs[i].arousal.begin(), recs[i].arousal.end());
        gv.insert(gv.end(), recs[i].valence.begin(), recs[i].valence.end());
    }
    return {metrics::ccc(pa, ga), metrics::ccc(pv, gv)};
}

Scores evaluate(const ModelBundle& model, std::span<const PreparedRecording> recs) {
    if (recs.empty()) throw DataError("cannot evaluate on an empty split");
    std::vector<Prediction> preds(recs.size());
    parallel_for(recs.size(), [&](std::size_t i) { preds[i] = predict(model, recs[i]); });
    return score(preds, recs);
}

TrainResult fit(const ModelBundle& initial, std::span<const PreparedRecording> train,
                std::span<const PreparedRecording> validation, const TrainConfig& config) {
    config.validate();
    if (train.empty()) throw DataError("training split is empty");
    const std::size_t len = config.sequence_length;
    std::vector<Chunk> chunks;
    for (std::size_t r = 0; r < train.size(); ++r) {
        if (train[r].frames % len != 0) {
            throw ConfigurationError("sequence length " + std::to_string(len) + " does not divide the " +
                                     std::to_string(train[r].frames) + " frames of " + train[r].id);
        }
        for (std::size_t s = 0; s < train[r].frames; s += len) chunks.push_back({r, s});
    }

    TrainResult result;
    result.model = initial.clone();
    ModelBundle& model = result.model;
    model.seed = config.seed;
    model.objective = config.objective;
    model.sequence_length = len;
    model.epoch = 0;
    model.step = 0;

    if (config.freeze_extractors) {
        for (Tensor t : model.extractor_parameters()) t.set_requires_grad(false);
    }
    std::vector<Tensor> params;
    for (const Tensor& t : model.parameters())
        if (t.requires_grad()) params.push_back(t);
    AdamState adam = AdamState::for_params(params);

    const std::size_t batch = std::min(config.batch_size(model.modality), chunks.size());
    const bool augment = config.augment && model.visual.has_value();
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    bool stop = false;

    auto checkpoint_scores = [&](std::size_t epoch) {
        LogRow row;
        row.epoch = epoch;
        row.step = model.step;
        row.loss = loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0;
        row.train = evaluate(model, train);
        if (!validation.empty()) {
            row.validation = evaluate(model, validation);
            row.has_validation = true;
        }
        result.log.push_back(row);
        loss_sum = 0.0;
        loss_count = 0;
        if (config.target_rho > 0.0 && primary_score(model.modality, row.train) >= config.target_rho) {
            result.reached_target = true;
            stop = true;
        }
    };

    for (std::size_t epoch = 1; epoch <= config.epochs && !stop; ++epoch) {
        model.epoch = epoch;
        std::vector<Chunk> order = chunks;
        shuffle(order, mix(config.seed, epoch));
        for (std::size_t b0 = 0; b0 < order.size() && !stop; b0 += batch) {
            const std::size_t n = std::min(batch, order.size() - b0);
            const std::uint64_t step_seed = mix(config.seed, model.step + 1);
            std::vector<std::vector<std::vector<double>>> grads(n);
            std::vector<double> losses(n);
            parallel_for(n, [&](std::size_t i) {
                const Chunk c = order[b0 + i];
                Rng rng(mix(step_seed, i));
                Tape tape;
                TapeScope scope(tape);
                auto out = forward_chunk(model, train[c.rec], c.start, len, {true, augment}, rng);
                Tensor loss = chunk_loss(out.prediction, train[c.rec], c.start, len, config.objective);
                losses[i] = loss.item();
                GradTable g = tape.gradients(loss);
                grads[i].resize(params.size());
                for (std::size_t p = 0; p < params.size(); ++p) {
                    const auto* found = g.find(params[p]);
                    grads[i][p] = found ? *found : std::vector<double>(params[p].numel(), 0.0);
                }
            });
            std::vector<std::vector<double>> total = std::move(grads[0]);
            for (std::size_t i = 1; i < n; ++i)
                for (std::size_t p = 0; p < params.size(); ++p)
                    for (std::size_t k = 0; k < total[p].size(); ++k) total[p][k] += grads[i][p][k];
            const double inv = 1.0 / static_cast<double>(n);
            for (auto& g : total)
                for (double& v : g) v *= inv;
            clip_global_norm(total, config.clip_norm);
            adam_step(params, total, adam, config.learning_rate);
            ++model.step;
            for (double l : losses) loss_sum += l;
            loss_count += n;

            const bool capped = config.max_steps != 0 && model.step >= config.max_steps;
            if (config.eval_every != 0 && model.step % config.eval_every == 0) checkpoint_scores(epoch);
            else if (capped) checkpoint_scores(epoch);
            if (capped) stop = true;
        }
        if (config.eval_every == 0 && !stop) checkpoint_scores(epoch);
    }
    if (result.log.empty() || result.log.back().step != model.step) checkpoint_scores(model.epoch);

    if (config.freeze_extractors) {
        for (Tensor t : model.extractor_parameters()) t.set_requires_grad(true);
    }
    result.train = result.log.back().train;
    result.validation = result.log.back().validation;
    return result;
}

void calibrate_visual(ModelBundle& model, std::span<const PreparedRecording> train, std::size_t frames) {
    if (!model.visual || frames == 0) return;
    std::size_t total = 0;
    for (const auto& r : train) total += r.frames;
    if (total == 0) throw DataError("training split has no frames");
    const std::size_t stride = std::max<std::size_t>(1, total / frames);
    std::vector<visual::Frame> sample;
    std::size_t index = 0;
    for (const auto& r : train) {
        if (!r.has_video()) throw DataError("recording " + r.id + " is missing its video stream");
        for (std::size_t t = 0; t < r.frames; ++t, ++index)
            if (index % stride == 0) sample.push_back(visual::frame_from_bytes(r.video->frame(t), r.video->height, r.video->width));
    }
    model.visual->calibrate_projection(sample);
}

TrainResult train_unimodal(Modality modality, const ModelConfig& model_config, std::span<const PreparedRecording> train,
                           std::span<const PreparedRecording> validation, const TrainConfig& config) {
    Rng rng(mix(config.seed, static_cast<std::uint64_t>(modality)));
    ModelBundle model = ModelBundle::init(modality, model_config, rng);
    calibrate_visual(model, train, config.calibration_frames);
    return fit(model, train, validation, config);
}

TrainResult train_multimodal(const ModelBundle& speech_model, const ModelBundle& visual_model,
                             std::span<const PreparedRecording> train, std::span<const PreparedRecording> validation,
                             const TrainConfig& config) {
    Rng rng(mix(config.seed, static_cast<std::uint64_t>(Modality::fusion)));
    return fit(ModelBundle::fuse(speech_model, visual_model, rng), train, validation, config);
}

std::string metrics_csv(std::span<const LogRow> log) {
    std::string out = "epoch,step,loss,train_arousal,train_valence,validation_arousal,validation_valence\n";
    for (const auto& r : log) {
        out += std::to_string(r.epoch) + "," + std::to_string(r.step) + "," + fmt(r.loss) + "," + fmt(r.train.arousal) + "," +
               fmt(r.train.valence) + ",";
        out += r.has_validation ? fmt(r.validation.arousal) + "," + fmt(r.validation.valence) : std::string(",");
        out += "\n";
    }
    return out;
}

std::vector<AblationCell> ablate_sequence_length(const synth::Dataset& data, std::span<const std::size_t> lengths,
                                                 const ModelConfig& model_config, const TrainConfig& config) {
    if (lengths.empty()) throw ConfigurationError("no sequence lengths to ablate");
    const auto speech_train = prepare_split(data, "train", Modality::speech, model_config);
    const auto speech_val = prepare_split(data, "validation", Modality::speech, model_config);
    const auto visual_train = prepare_split(data, "train", Modality::visual, model_config);
    const auto visual_val = prepare_split(data, "validation", Modality::visual, model_config);
    for (std::size_t len : lengths) {
        if (len == 0) throw ConfigurationError("sequence length must be positive");
        for (const auto* split : {&speech_train, &speech_val})
            for (const auto& r : *split)
                if (r.frames % len != 0) {
                    throw ConfigurationError("sequence length " + std::to_string(len) + " does not divide the " +
                                             std::to_string(r.frames) + " frames of " + r.id);
                }
    }
    std::vector<AblationCell> cells;
    for (std::size_t len : lengths) {
        TrainConfig c = config;
        c.sequence_length = len;
        AblationCell cell;
        cell.sequence_length = len;
        cell.speech = train_unimodal(Modality::speech, model_config, speech_train, speech_val, c).validation;
        cell.visual = train_unimodal(Modality::visual, model_config, visual_train, visual_val, c).validation;
        cells.push_back(cell);
    }
    return cells;
}

std::string ablation_csv(std::span<const AblationCell> cells) {
    std::string out = "sequence_length,speech_arousal,speech_valence,visual_arousal,visual_valence\n";
    for (const auto& c : cells) {
        out += std::to_string(c.sequence_length) + "," + fmt(c.speech.arousal) + "," + fmt(c.speech.valence) + "," +
               fmt(c.visual.arousal) + "," + fmt(c.visual.valence) + "\n";
    }
    return out;
}

}  // namespace affect::train
