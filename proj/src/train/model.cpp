#include "affect/train/model.hpp"

#include <json.hpp>

#include "affect/error.hpp"
#include "affect/io/wav.hpp"
#include "affect/tensor/tensor_io.hpp"
#include "affect/util/bytes.hpp"

namespace affect::train {
namespace {

using nlohmann::ordered_json;

recurrent::LstmStack clone_stack(const recurrent::LstmStack& s) {
    recurrent::LstmStack out;
    for (const auto& l : s.layers) {
        recurrent::LstmLayer c = l;
        c.w_ih = l.w_ih.clone(true);
        c.w_hh = l.w_hh.clone(true);
        c.bias = l.bias.clone(true);
        out.layers.push_back(std::move(c));
    }
    return out;
}

recurrent::OutputHead clone_head(const recurrent::OutputHead& h) { return {h.weight.clone(true), h.bias.clone(true)}; }

speech::SpeechNet clone_speech(const speech::SpeechNet& n) {
    return speech::SpeechNet(n.config(), n.kernels_1().clone(true), n.kernels_2().clone(true));
}

visual::VisualNet clone_visual(const visual::VisualNet& n) {
    return visual::VisualNet::from_parameters(n.config(), n.parameters());
}

ordered_json speech_json(const speech::SpeechNetConfig& c) {
    return {{"sample_rate", c.sample_rate}, {"segment_seconds", c.segment_seconds}, {"filters_1", c.filters_1},
            {"kernel_1", c.kernel_1},       {"time_pool", c.time_pool},             {"filters_2", c.filters_2},
            {"kernel_2", c.kernel_2},       {"channel_pool", c.channel_pool},       {"dropout_p", c.dropout_p},
            {"frame_ms", c.frame_ms}};
}

speech::SpeechNetConfig speech_from(const nlohmann::json& j) {
    speech::SpeechNetConfig c;
    c.sample_rate = j.at("sample_rate");
    c.segment_seconds = j.at("segment_seconds");
    c.filters_1 = j.at("filters_1");
    c.kernel_1 = j.at("kernel_1");
    c.time_pool = j.at("time_pool");
    c.filters_2 = j.at("filters_2");
    c.kernel_2 = j.at("kernel_2");
    c.channel_pool = j.at("channel_pool");
    c.dropout_p = j.at("dropout_p");
    c.frame_ms = j.at("frame_ms");
    return c;
}

ordered_json visual_json(const visual::VisualNetConfig& c) {
    ordered_json stages = ordered_json::array();
    for (const auto& s : c.stages) stages.push_back({s.replication, s.reduce, s.spatial, s.expand});
    return {{"input_size", c.input_size},       {"input_channels", c.input_channels}, {"stem_channels", c.stem_channels},
            {"stem_kernel", c.stem_kernel},     {"stem_stride", c.stem_stride},       {"pool_kernel", c.pool_kernel},
            {"pool_stride", c.pool_stride},     {"stages", stages},                   {"stage_strides", c.stage_strides},
            {"output_features", c.output_features}, {"scale", c.scale == visual::Scale::tiny ? "tiny" : "full"}};
}

visual::VisualNetConfig visual_from(const nlohmann::json& j) {
    visual::VisualNetConfig c;
    c.input_size = j.at("input_size");
    c.input_channels = j.at("input_channels");
    c.stem_channels = j.at("stem_channels");
    c.stem_kernel = j.at("stem_kernel");
    c.stem_stride = j.at("stem_stride");
    c.pool_kernel = j.at("pool_kernel");
    c.pool_stride = j.at("pool_stride");
    for (const auto& s : j.at("stages")) c.stages.push_back({s.at(0), s.at(1), s.at(2), s.at(3)});
    c.stage_strides = j.at("stage_strides").get<std::vector<std::size_t>>();
    c.output_features = j.at("output_features");
    c.scale = j.at("scale") == "tiny" ? visual::Scale::tiny : visual::Scale::full;
    return c;
}

}  // namespace

const char* modality_name(Modality m) {
    switch (m) {
        case Modality::speech: return "speech";
        case Modality::visual: return "visual";
        case Modality::fusion: return "fusion";
    }
    return "?";
}

Modality parse_modality(const std::string& s) {
    if (s == "speech") return Modality::speech;
    if (s == "visual") return Modality::visual;
    if (s == "fusion") return Modality::fusion;
    throw ConfigurationError("unknown modality '" + s + "' (expected speech, visual or fusion)");
}

const char* objective_name(Objective o) { return o == Objective::ccc ? "ccc" : "mse"; }

Objective parse_objective(const std::string& s) {
    if (s == "ccc") return Objective::ccc;
    if (s == "mse") return Objective::mse;
    throw ConfigurationError("unknown objective '" + s + "' (expected ccc or mse)");
}

ModelConfig ModelConfig::tiny() {
    ModelConfig c;
    c.speech = speech::SpeechNetConfig::tiny();
    c.visual = visual::VisualNetConfig::tiny(4);
    c.hidden = 32;
    return c;
}

ModelBundle ModelBundle::init(Modality modality, const ModelConfig& config, Rng& rng) {
    ModelBundle m;
    m.modality = modality;
    m.config = config;
    if (modality != Modality::visual) m.speech = speech::SpeechNet::init(config.speech, rng);
    if (modality != Modality::speech) m.visual = visual::VisualNet::build(config.visual, rng);
    m.lstm = recurrent::LstmStack::init(m.feature_width(), config.hidden, config.layers, rng);
    m.head = recurrent::OutputHead::init(config.hidden, rng);
    return m;
}

ModelBundle ModelBundle::fuse(const ModelBundle& speech_model, const ModelBundle& visual_model, Rng& rng) {
    if (!speech_model.speech || !visual_model.visual) {
        throw ConfigurationError("fusion needs a trained speech extractor and a trained visual extractor");
    }
    ModelBundle m;
    m.modality = Modality::fusion;
    m.config = speech_model.config;
    m.config.visual = visual_model.config.visual;
    m.speech = clone_speech(*speech_model.speech);
    m.visual = clone_visual(*visual_model.visual);
    if (m.feature_width() != m.speech->config().features_per_frame() + m.config.visual.output_features) {
        throw DimensionError("fused feature width does not match the extractors");
    }
    m.lstm = recurrent::LstmStack::init(m.feature_width(), m.config.hidden, m.config.layers, rng);
    m.head = recurrent::OutputHead::init(m.config.hidden, rng);
    return m;
}

std::size_t ModelBundle::feature_width() const {
    std::size_t w = 0;
    if (modality != Modality::visual) w += config.speech.features_per_frame();
    if (modality != Modality::speech) w += config.visual.output_features;
    return w;
}

std::vector<std::pair<std::string, Tensor>> ModelBundle::named_parameters() const {
    std::vector<std::pair<std::string, Tensor>> out;
    if (speech) {
        out.emplace_back("speech.conv1", speech->kernels_1());
        out.emplace_back("speech.conv2", speech->kernels_2());
    }
    if (visual) {
        out.emplace_back("visual.stem", visual->stem());
        const auto& stages = visual->stages();
        for (std::size_t s = 0; s < stages.size(); ++s)
            for (std::size_t b = 0; b < stages[s].size(); ++b) {
                const std::string p = "visual.stage" + std::to_string(s + 1) + ".block" + std::to_string(b) + ".";
                const auto& blk = stages[s][b];
                out.emplace_back(p + "reduce", blk.reduce);
                out.emplace_back(p + "spatial", blk.spatial);
                out.emplace_back(p + "expand", blk.expand);
                if (!blk.identity_shortcut()) out.emplace_back(p + "shortcut", blk.shortcut);
            }
        out.emplace_back("visual.projection", visual->projection());
        out.emplace_back("visual.projection_bias", visual->projection_bias());
    }
    for (std::size_t l = 0; l < lstm.layers.size(); ++l) {
        const std::string p = "lstm.layer" + std::to_string(l) + ".";
        out.emplace_back(p + "w_ih", lstm.layers[l].w_ih);
        out.emplace_back(p + "w_hh", lstm.layers[l].w_hh);
        out.emplace_back(p + "bias", lstm.layers[l].bias);
    }
    out.emplace_back("head.weight", head.weight);
    out.emplace_back("head.bias", head.bias);
    return out;
}

std::vector<Tensor> ModelBundle::parameters() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_parameters()) out.push_back(t);
    return out;
}

std::vector<Tensor> ModelBundle::extractor_parameters() const {
    std::vector<Tensor> out;
    if (speech) {
        auto p = speech->parameters();
        out.insert(out.end(), p.begin(), p.end());
    }
    if (visual) {
        auto p = visual->parameters();
        out.insert(out.end(), p.begin(), p.end());
    }
    return out;
}

ModelBundle ModelBundle::clone() const {
    ModelBundle m = *this;
    if (speech) m.speech = clone_speech(*speech);
    if (visual) m.visual = clone_visual(*visual);
    m.lstm = clone_stack(lstm);
    m.head = clone_head(head);
    return m;
}

PreparedRecording prepare_recording(const synth::Recording& rec, Modality modality, const ModelConfig& config) {
    PreparedRecording p;
    p.id = rec.id;
    p.frames = rec.labels.frames();
    p.arousal = rec.labels.arousal;
    p.valence = rec.labels.valence;
    if (modality != Modality::visual) {
        if (!rec.has_audio()) throw DataError("recording " + rec.id + " is missing its audio stream");
        if (rec.audio.sample_rate != config.speech.sample_rate) {
            throw DataError("recording " + rec.id + " audio is " + std::to_string(rec.audio.sample_rate) + " Hz, expected " +
                            std::to_string(config.speech.sample_rate));
        }
        const auto real = io::pcm_to_real(rec.audio.samples);
        const std::size_t seg = config.speech.segment_samples();
        for (auto& w : io::tile_windows(real, seg)) p.segments.push_back(speech::normalize_segment(w, seg));
        const std::size_t covered = p.segments.size() * speech::frame_count(config.speech);
        if (covered != p.frames) {
            throw DataError("recording " + rec.id + " audio covers " + std::to_string(covered) + " frames but has " +
                            std::to_string(p.frames) + " annotation frames");
        }
    }
    if (modality != Modality::speech) {
        if (!rec.has_video()) throw DataError("recording " + rec.id + " is missing its video stream");
        if (rec.video.count != p.frames) {
            throw DataError("recording " + rec.id + " has " + std::to_string(rec.video.count) + " video frames but " +
                            std::to_string(p.frames) + " annotation frames");
        }
        if (rec.video.height != config.visual.input_size || rec.video.width != config.visual.input_size || rec.video.channels != 3) {
            throw DataError("recording " + rec.id + " video frames are not " + std::to_string(config.visual.input_size) + "x" +
                            std::to_string(config.visual.input_size) + " RGB");
        }
        p.video = &rec.video;
    }
    return p;
}

std::vector<PreparedRecording> prepare_split(const synth::Dataset& data, const std::string& split, Modality modality,
                                             const ModelConfig& config) {
    std::vector<PreparedRecording> out;
    for (const auto* r : data.partition(split)) out.push_back(prepare_recording(*r, modality, config));
    return out;
}

ChunkOutput forward_chunk(const ModelBundle& model, const PreparedRecording& rec, std::size_t start, std::size_t length,
                          const ForwardOptions& options, Rng& rng) {
    if (length == 0 || start + length > rec.frames) {
        throw DimensionError("chunk [" + std::to_string(start) + ", " + std::to_string(start + length) + ") outside recording " +
                             rec.id + " of " + std::to_string(rec.frames) + " frames");
    }
    Tensor speech_features, visual_features;
    if (model.speech) {
        if (!rec.has_audio()) throw DataError("recording " + rec.id + " is missing its audio stream");
        const std::size_t seg_frames = speech::frame_count(model.config.speech);
        const std::size_t first = start / seg_frames, last = (start + length - 1) / seg_frames;
        std::vector<Tensor> parts;
        for (std::size_t s = first; s <= last; ++s) parts.push_back(model.speech->forward(rec.segments.at(s), options.training, rng));
        Tensor all = parts.size() == 1 ? parts[0]
                                       : reshape(stack(parts), {parts.size() * seg_frames, parts[0].dim(1)});
        const std::size_t offset = start - first * seg_frames;
        speech_features = (offset == 0 && length == all.dim(0)) ? all : slice_rows(all, offset, offset + length);
    }
    if (model.visual) {
        if (!rec.has_video()) throw DataError("recording " + rec.id + " is missing its video stream");
        std::vector<Tensor> rows;
        rows.reserve(length);
        for (std::size_t t = 0; t < length; ++t) {
            visual::Frame f = visual::frame_from_bytes(rec.video->frame(start + t), rec.video->height, rec.video->width);
            if (options.training && options.augment) f = visual::augment(f, rng);
            rows.push_back(model.visual->forward_frame(f));
        }
        visual_features = stack(rows);
    }
    ChunkOutput out;
    if (model.speech && model.visual) {
        out.features = concat_cols(speech_features, visual_features);
    } else {
        out.features = model.speech ? speech_features : visual_features;
    }
    if (out.features.dim(1) != model.lstm.input_size()) {
        throw DimensionError("feature width " + std::to_string(out.features.dim(1)) + " does not match recurrent input " +
                             std::to_string(model.lstm.input_size()));
    }
    auto rnn = recurrent::stack_forward(out.features, model.lstm);
    out.prediction = recurrent::output_head(rnn.outputs, model.head);
    out.traces = std::move(rnn.traces);
    return out;
}

void save_checkpoint(const ModelBundle& model, const std::filesystem::path& dir) {
    ordered_json m;
    m["format"] = "affect-model";
    m["version"] = 1;
    m["modality"] = modality_name(model.modality);
    m["seed"] = model.seed;
    m["epoch"] = model.epoch;
    m["step"] = model.step;
    m["objective"] = objective_name(model.objective);
    m["sequence_length"] = model.sequence_length;
    m["config"] = {{"speech", speech_json(model.config.speech)},
                   {"visual", visual_json(model.config.visual)},
                   {"hidden", model.config.hidden},
                   {"layers", model.config.layers}};
    m["tensors"] = ordered_json::array();
    for (const auto& [name, t] : model.named_parameters()) {
        write_tensor(dir / (name + ".tnsr"), t);
        m["tensors"].push_back({{"name", name}, {"file", name + ".tnsr"}, {"shape", t.shape()}});
    }
    write_file_atomic(dir / "manifest.json", m.dump(2) + "\n");
}

ModelBundle load_checkpoint(const std::filesystem::path& dir) {
    const auto path = dir / "manifest.json";
    nlohmann::json m;
    try {
        m = nlohmann::json::parse(read_file_text(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what() + " at offset " + std::to_string(e.byte));
    }
    try {
        if (m.at("format") != "affect-model") throw DataError(path.string() + ": not a model checkpoint");
        ModelConfig config;
        config.speech = speech_from(m.at("config").at("speech"));
        config.visual = visual_from(m.at("config").at("visual"));
        config.hidden = m.at("config").at("hidden");
        config.layers = m.at("config").at("layers");
        Rng rng(0);
        ModelBundle model = ModelBundle::init(parse_modality(m.at("modality")), config, rng);
        model.seed = m.at("seed");
        model.epoch = m.at("epoch");
        model.step = m.at("step");
        model.objective = parse_objective(m.at("objective"));
        model.sequence_length = m.at("sequence_length");
        auto slots = model.named_parameters();
        const auto& entries = m.at("tensors");
        if (entries.size() != slots.size()) {
            throw DataError(path.string() + ": lists " + std::to_string(entries.size()) + " tensors, model needs " +
                            std::to_string(slots.size()));
        }
        for (std::size_t i = 0; i < slots.size(); ++i) {
            const std::string name = entries[i].at("name");
            if (name != slots[i].first) throw DataError(path.string() + ": tensor " + name + " where " + slots[i].first + " expected");
            Tensor t = read_tensor(dir / entries[i].at("file").get<std::string>());
            if (t.shape() != slots[i].second.shape()) {
                throw DataError(path.string() + ": tensor " + name + " has shape " + shape_string(t.shape()) + ", expected " +
                                shape_string(slots[i].second.shape()));
            }
            std::copy(t.data().begin(), t.data().end(), slots[i].second.mutable_data().begin());
        }
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

}  // namespace affect::train
