#include "affect/cli/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <ostream>

#include "affect/analysis/gates.hpp"
#include "affect/error.hpp"
#include "affect/metrics/concordance.hpp"
#include "affect/postprocess/chain.hpp"
#include "affect/synth/dataset.hpp"
#include "affect/train/trainer.hpp"
#include "affect/util/bytes.hpp"

namespace affect::cli {
namespace {

namespace fs = std::filesystem;
using train::Modality;

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct SynthArgs {
    synth::SynthConfig config;
    std::string out;
};

struct TrainArgs {
    std::string modality = "speech";
    std::string objective = "ccc";
    std::string scale = "tiny";
    std::string data;
    std::string out;
    std::string speech_model;
    std::string visual_model;
    std::size_t hidden = 0;
    bool no_augment = false;
    train::TrainConfig config;
};

struct EvalArgs {
    std::string model;
    std::string predictions;
    std::string data;
    std::string split = "test";
    std::string chains;
    std::string out;
};

struct FitArgs {
    std::string model;
    std::string data;
    std::string split = "validation";
    std::string out;
};

struct ApplyArgs {
    std::string model;
    std::string data;
    std::string split = "test";
    std::string chains;
    std::string out;
};

struct AblateArgs {
    std::string data;
    std::string scale = "tiny";
    std::string out;
    std::vector<std::size_t> lengths{75, 150, 300};
    std::size_t hidden = 0;
    bool no_augment = false;
    train::TrainConfig config;
};

struct GateArgs {
    std::string model;
    std::string data;
    std::string recording;
    std::string out;
    std::size_t top = 3;
};

train::ModelConfig model_config(const std::string& scale, std::size_t hidden) {
    train::ModelConfig c;
    if (scale == "tiny") c = train::ModelConfig::tiny();
    else if (scale == "full") c = train::ModelConfig::full();
    else throw ConfigurationError("unknown scale '" + scale + "' (expected tiny or full)");
    if (hidden != 0) c.hidden = hidden;
    return c;
}

synth::LoadOptions streams_for(Modality m) {
    return {m != Modality::visual, m != Modality::speech};
}

void add_train_options(CLI::App* cmd, train::TrainConfig& c, bool& no_augment) {
    cmd->add_option("--epochs", c.epochs, "Training epochs")->capture_default_str();
    cmd->add_option("--seed", c.seed, "Training seed")->capture_default_str();
    cmd->add_option("--lr", c.learning_rate, "Adam learning rate")->capture_default_str();
    cmd->add_option("--audio-batch", c.audio_batch, "Chunks per step for speech")->capture_default_str();
    cmd->add_option("--video-batch", c.video_batch, "Chunks per step for visual and fusion")->capture_default_str();
    cmd->add_option("--clip", c.clip_norm, "Global gradient norm limit")->capture_default_str();
    cmd->add_option("--max-steps", c.max_steps, "Stop after this many steps (0: no limit)")->capture_default_str();
    cmd->add_option("--eval-every", c.eval_every, "Score every N steps (0: once per epoch)")->capture_default_str();
    cmd->add_option("--target-rho", c.target_rho, "Stop once the training score reaches this")->capture_default_str();
    cmd->add_flag("--no-augment", no_augment, "Disable image augmentation");
}

void write_csv(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_file_atomic(path, text);
}

std::vector<train::PreparedRecording> load_split(const synth::Dataset& data, const std::string& split, Modality m,
                                                 const train::ModelConfig& config) {
    return train::prepare_split(data, split, m, config);
}

int cmd_synth(const SynthArgs& a, std::ostream& out) {
    const auto data = synth::generate_dataset(a.config);
    synth::write_dataset(data, a.out);
    out << "wrote " << data.recordings.size() << " recordings to " << a.out << "\n";
    return kExitOk;
}

train::TrainResult pretrain(Modality m, const train::ModelConfig& mc, const synth::Dataset& data, const train::TrainConfig& tc,
                            const fs::path& log_path) {
    const auto tr = load_split(data, "train", m, mc);
    const auto va = load_split(data, "validation", m, mc);
    auto r = train::train_unimodal(m, mc, tr, va, tc);
    write_csv(log_path, train::metrics_csv(r.log));
    return r;
}

int cmd_train(TrainArgs a, std::ostream& out) {
    const Modality m = train::parse_modality(a.modality);
    a.config.objective = train::parse_objective(a.objective);
    a.config.augment = !a.no_augment;
    const auto mc = model_config(a.scale, a.hidden);
    const auto data = synth::read_dataset(a.data, streams_for(m));
    const fs::path root(a.out);
    fs::create_directories(root);
    train::TrainResult result;
    if (m == Modality::fusion) {
        auto part = [&](Modality pm, const std::string& dir) {
            if (!dir.empty()) return train::load_checkpoint(dir);
            return pretrain(pm, mc, data, a.config, root / (std::string(train::modality_name(pm)) + "_metrics.csv")).model;
        };
        const auto speech_model = part(Modality::speech, a.speech_model);
        const auto visual_model = part(Modality::visual, a.visual_model);
        const auto tr = load_split(data, "train", m, mc);
        const auto va = load_split(data, "validation", m, mc);
        result = train::train_multimodal(speech_model, visual_model, tr, va, a.config);
    } else {
        const auto tr = load_split(data, "train", m, mc);
        const auto va = load_split(data, "validation", m, mc);
        result = train::train_unimodal(m, mc, tr, va, a.config);
    }
    train::save_checkpoint(result.model, root / "model");
    write_csv(root / "metrics.csv", train::metrics_csv(result.log));
    out << train::modality_name(m) << " " << train::objective_name(a.config.objective) << " steps=" << result.model.step
        << " train_arousal=" << fmt(result.train.arousal) << " train_valence=" << fmt(result.train.valence)
        << " validation_arousal=" << fmt(result.validation.arousal) << " validation_valence=" << fmt(result.validation.valence)
        << "\n";
    return kExitOk;
}

struct SplitTracks {
    std::vector<std::string> ids;
    std::vector<std::size_t> lengths;
    std::vector<double> pred[2];
    std::vector<double> gold[2];
};

SplitTracks model_tracks(const std::string& model_dir, const synth::Dataset& data, const std::string& split) {
    const auto model = train::load_checkpoint(model_dir);
    const auto recs = load_split(data, split, model.modality, model.config);
    std::vector<train::Prediction> preds(recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) preds[i] = train::predict(model, recs[i]);
    SplitTracks t;
    for (std::size_t i = 0; i < recs.size(); ++i) {
        t.ids.push_back(recs[i].id);
        t.lengths.push_back(recs[i].frames);
        t.pred[0].insert(t.pred[0].end(), preds[i].arousal.begin(), preds[i].arousal.end());
        t.pred[1].insert(t.pred[1].end(), preds[i].valence.begin(), preds[i].valence.end());
        t.gold[0].insert(t.gold[0].end(), recs[i].arousal.begin(), recs[i].arousal.end());
        t.gold[1].insert(t.gold[1].end(), recs[i].valence.begin(), recs[i].valence.end());
    }
    return t;
}

SplitTracks file_tracks(const std::string& dir, const synth::Dataset& data, const std::string& split) {
    SplitTracks t;
    for (const auto* r : data.partition(split)) {
        const auto path = fs::path(dir) / (r->id + ".csv");
        const auto labels = synth::decode_labels(read_file_text(path), path.string());
        if (labels.frames() != r->labels.frames()) {
            throw DataError(path.string() + ": " + std::to_string(labels.frames()) + " frames, expected " +
                            std::to_string(r->labels.frames()));
        }
        t.ids.push_back(r->id);
        t.lengths.push_back(labels.frames());
        t.pred[0].insert(t.pred[0].end(), labels.arousal.begin(), labels.arousal.end());
        t.pred[1].insert(t.pred[1].end(), labels.valence.begin(), labels.valence.end());
        t.gold[0].insert(t.gold[0].end(), r->labels.arousal.begin(), r->labels.arousal.end());
        t.gold[1].insert(t.gold[1].end(), r->labels.valence.begin(), r->labels.valence.end());
    }
    return t;
}

constexpr const char* kDimensions[] = {"arousal", "valence"};

const post::PostProcessChain& chain_for(const post::NamedChains& chains, const std::string& name) {
    for (const auto& [n, c] : chains)
        if (n == name) return c;
    throw DataError("chain file has no chain named " + name);
}

post::NamedChains read_chains(const std::string& path) { return post::parse_chains(read_file_text(path), path); }

int cmd_eval(const EvalArgs& a, std::ostream& out) {
    if (a.model.empty() == a.predictions.empty()) throw ConfigurationError("eval needs exactly one of --model or --predictions");
    const auto data = synth::read_dataset(a.data, a.model.empty() ? synth::LoadOptions{false, false} : synth::LoadOptions{});
    const auto tracks = a.model.empty() ? file_tracks(a.predictions, data, a.split) : model_tracks(a.model, data, a.split);
    std::optional<post::NamedChains> chains;
    if (!a.chains.empty()) chains = read_chains(a.chains);
    std::string csv = "dimension,ccc_raw,ccc_post\n";
    for (std::size_t d = 0; d < 2; ++d) {
        const double raw = metrics::ccc(tracks.pred[d], tracks.gold[d]);
        std::string post_value;
        if (chains) post_value = fmt(metrics::ccc(post::apply_chain(chain_for(*chains, kDimensions[d]), tracks.pred[d]), tracks.gold[d]));
        csv += std::string(kDimensions[d]) + "," + fmt(raw) + "," + post_value + "\n";
        out << kDimensions[d] << " ccc=" << fmt(raw);
        if (chains) out << " post=" << post_value;
        out << "\n";
    }
    if (!a.out.empty()) write_csv(a.out, csv);
    return kExitOk;
}

int cmd_fit(const FitArgs& a, std::ostream& out) {
    const auto data = synth::read_dataset(a.data);
    const auto tracks = model_tracks(a.model, data, a.split);
    post::NamedChains chains;
    for (std::size_t d = 0; d < 2; ++d) {
        auto fit = post::fit_chain(tracks.pred[d], tracks.gold[d]);
        out << kDimensions[d] << " ccc " << fmt(fit.rho_trace.front()) << " -> " << fmt(fit.rho_trace.back()) << "\n";
        chains.emplace_back(kDimensions[d], std::move(fit.chain));
    }
    write_csv(a.out, post::serialize_chains(chains));
    return kExitOk;
}

int cmd_apply(const ApplyArgs& a, std::ostream& out) {
    const auto data = synth::read_dataset(a.data);
    const auto tracks = model_tracks(a.model, data, a.split);
    const auto chains = read_chains(a.chains);
    std::vector<double> post[2];
    for (std::size_t d = 0; d < 2; ++d) post[d] = post::apply_chain(chain_for(chains, kDimensions[d]), tracks.pred[d]);
    const fs::path root(a.out);
    fs::create_directories(root);
    std::size_t offset = 0;
    for (std::size_t i = 0; i < tracks.ids.size(); ++i) {
        synth::AffectTrajectory t;
        t.arousal.assign(post[0].begin() + static_cast<std::ptrdiff_t>(offset),
                         post[0].begin() + static_cast<std::ptrdiff_t>(offset + tracks.lengths[i]));
        t.valence.assign(post[1].begin() + static_cast<std::ptrdiff_t>(offset),
                         post[1].begin() + static_cast<std::ptrdiff_t>(offset + tracks.lengths[i]));
        write_csv(root / (tracks.ids[i] + ".csv"), synth::encode_labels(t));
        offset += tracks.lengths[i];
    }
    out << "wrote " << tracks.ids.size() << " prediction files to " << a.out << "\n";
    return kExitOk;
}

int cmd_ablate(AblateArgs a, std::ostream& out) {
    a.config.augment = !a.no_augment;
    const auto mc = model_config(a.scale, a.hidden);
    const auto data = synth::read_dataset(a.data);
    const auto cells = train::ablate_sequence_length(data, a.lengths, mc, a.config);
    const auto csv = train::ablation_csv(cells);
    write_csv(a.out, csv);
    out << csv;
    return kExitOk;
}

int cmd_gates(const GateArgs& a, std::ostream& out) {
    const auto model = train::load_checkpoint(a.model);
    const auto data = synth::read_dataset(a.data, {true, model.modality != Modality::speech});
    const auto& rec = a.recording.empty() ? *data.partition("test").front() : data.find(a.recording);
    const auto report = analysis::gate_correlation(model, rec);
    const fs::path root(a.out);
    fs::create_directories(root);
    for (std::size_t l = 0; l < report.layers; ++l) {
        write_csv(root / ("gates_layer" + std::to_string(l) + ".csv"), analysis::gate_csv(report, l));
        for (std::size_t d = 0; d < analysis::kDescriptorCount; ++d) {
            write_csv(root / ("plot_layer" + std::to_string(l) + "_" + analysis::kDescriptorNames[d] + ".csv"),
                      analysis::gate_plot_csv(report, l, d, a.top));
        }
    }
    std::string summary = "descriptor,max_abs_rho\n";
    for (std::size_t d = 0; d < analysis::kDescriptorCount; ++d) {
        summary += std::string(analysis::kDescriptorNames[d]) + "," + fmt(report.max_abs_rho(d)) + "\n";
        out << analysis::kDescriptorNames[d] << " max|rho|=" << fmt(report.max_abs_rho(d)) << "\n";
    }
    write_csv(root / "summary.csv", summary);
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Affect recognition toolkit: synthetic data, training, evaluation and analysis", "affect"};
    app.require_subcommand(1);

    SynthArgs synth_args;
    auto* synth_cmd = app.add_subcommand("synth-data", "Generate a synthetic audio-visual dataset");
    synth_cmd->add_option("--seed", synth_args.config.seed, "Dataset seed")->capture_default_str();
    synth_cmd->add_option("--train", synth_args.config.train, "Training recordings")->capture_default_str();
    synth_cmd->add_option("--validation", synth_args.config.validation, "Validation recordings")->capture_default_str();
    synth_cmd->add_option("--test", synth_args.config.test, "Test recordings")->capture_default_str();
    synth_cmd->add_option("--duration", synth_args.config.duration_s, "Seconds per recording (multiple of 6)")->capture_default_str();
    synth_cmd->add_option("--out", synth_args.out, "Output directory")->required();

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "Train a speech, visual or fused model");
    train_cmd->add_option("--modality", train_args.modality, "speech, visual or fusion")->capture_default_str();
    train_cmd->add_option("--objective", train_args.objective, "ccc or mse")->capture_default_str();
    train_cmd->add_option("--seq-len", train_args.config.sequence_length, "Frames per training chunk")->capture_default_str();
    train_cmd->add_option("--scale", train_args.scale, "tiny or full network sizes")->capture_default_str();
    train_cmd->add_option("--hidden", train_args.hidden, "Recurrent cells per layer (0: scale default)");
    train_cmd->add_option("--speech-model", train_args.speech_model, "Pretrained speech checkpoint for fusion");
    train_cmd->add_option("--visual-model", train_args.visual_model, "Pretrained visual checkpoint for fusion");
    train_cmd->add_flag("--freeze-extractors", train_args.config.freeze_extractors, "Train only the recurrent layers and head");
    train_cmd->add_option("--data", train_args.data, "Dataset directory")->required();
    train_cmd->add_option("--out", train_args.out, "Output directory")->required();
    add_train_options(train_cmd, train_args.config, train_args.no_augment);

    EvalArgs eval_args;
    auto* eval_cmd = app.add_subcommand("eval", "Score a model or a directory of predictions");
    eval_cmd->add_option("--model", eval_args.model, "Checkpoint directory");
    eval_cmd->add_option("--predictions", eval_args.predictions, "Directory of <id>.csv prediction tracks");
    eval_cmd->add_option("--data", eval_args.data, "Dataset directory")->required();
    eval_cmd->add_option("--split", eval_args.split, "train, validation or test")->capture_default_str();
    eval_cmd->add_option("--chains", eval_args.chains, "Post-processing chain file");
    eval_cmd->add_option("--out", eval_args.out, "Result CSV");

    FitArgs fit_args;
    auto* fit_cmd = app.add_subcommand("postprocess-fit", "Fit post-processing chains on a split");
    fit_cmd->add_option("--model", fit_args.model, "Checkpoint directory")->required();
    fit_cmd->add_option("--data", fit_args.data, "Dataset directory")->required();
    fit_cmd->add_option("--split", fit_args.split, "Split to fit on")->capture_default_str();
    fit_cmd->add_option("--out", fit_args.out, "Chain file")->required();

    ApplyArgs apply_args;
    auto* apply_cmd = app.add_subcommand("postprocess-apply", "Write post-processed predictions for a split");
    apply_cmd->add_option("--model", apply_args.model, "Checkpoint directory")->required();
    apply_cmd->add_option("--data", apply_args.data, "Dataset directory")->required();
    apply_cmd->add_option("--split", apply_args.split, "Split to predict")->capture_default_str();
    apply_cmd->add_option("--chains", apply_args.chains, "Chain file")->required();
    apply_cmd->add_option("--out", apply_args.out, "Output directory")->required();

    AblateArgs ablate_args;
    auto* ablate_cmd = app.add_subcommand("ablate-seq-len", "Train speech and visual models per sequence length");
    ablate_cmd->add_option("--data", ablate_args.data, "Dataset directory")->required();
    ablate_cmd->add_option("--lengths", ablate_args.lengths, "Sequence lengths")->delimiter(',')->capture_default_str();
    ablate_cmd->add_option("--scale", ablate_args.scale, "tiny or full network sizes")->capture_default_str();
    ablate_cmd->add_option("--hidden", ablate_args.hidden, "Recurrent cells per layer (0: scale default)");
    ablate_cmd->add_option("--out", ablate_args.out, "Result CSV")->required();
    add_train_options(ablate_cmd, ablate_args.config, ablate_args.no_augment);

    GateArgs gate_args;
    auto* gate_cmd = app.add_subcommand("analyze-gates", "Correlate recurrent cells with acoustic descriptors");
    gate_cmd->add_option("--model", gate_args.model, "Checkpoint directory")->required();
    gate_cmd->add_option("--data", gate_args.data, "Dataset directory")->required();
    gate_cmd->add_option("--recording", gate_args.recording, "Recording id (default: first test recording)");
    gate_cmd->add_option("--top", gate_args.top, "Cells per plot file")->capture_default_str();
    gate_cmd->add_option("--out", gate_args.out, "Output directory")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (synth_cmd->parsed()) return cmd_synth(synth_args, out);
        if (train_cmd->parsed()) return cmd_train(train_args, out);
        if (eval_cmd->parsed()) return cmd_eval(eval_args, out);
        if (fit_cmd->parsed()) return cmd_fit(fit_args, out);
        if (apply_cmd->parsed()) return cmd_apply(apply_args, out);
        if (ablate_cmd->parsed()) return cmd_ablate(ablate_args, out);
        if (gate_cmd->parsed()) return cmd_gates(gate_args, out);
    } catch (const ConfigurationError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ParameterError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}

int run(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run(args, std::cout, std::cerr);
}

}  // namespace affect::cli
