#include "affect/synth/dataset.hpp"

#include <charconv>
#include <cstdio>

#include <json.hpp>

#include "affect/error.hpp"
#include "affect/util/bytes.hpp"
#include "affect/util/parallel.hpp"

namespace affect::synth {

const std::vector<std::string>& DatasetSplit::named(std::string_view name) const {
    if (name == "train") return train;
    if (name == "validation" || name == "val") return validation;
    if (name == "test") return test;
    throw DataError("unknown split '" + std::string(name) + "'");
}

const Recording& Dataset::find(std::string_view id) const {
    for (const auto& r : recordings)
        if (r.id == id) return r;
    throw DataError("dataset has no recording '" + std::string(id) + "'");
}

std::vector<const Recording*> Dataset::partition(std::string_view name) const {
    std::vector<const Recording*> out;
    for (const auto& id : split.named(name)) out.push_back(&find(id));
    if (out.empty()) throw DataError("split '" + std::string(name) + "' is empty");
    return out;
}

Recording generate_recording(const std::string& id, std::uint64_t dataset_seed, double duration_s) {
    Recording r;
    r.id = id;
    r.seed = recording_seed(dataset_seed, id);
    r.labels = gen_trajectory(r.seed, duration_s);
    r.audio = io::PcmAudio{static_cast<std::uint32_t>(kSampleRate), io::quantize_pcm(render_audio(r.labels, r.seed))};
    r.video = render_video(r.labels, r.seed);
    return r;
}

Dataset generate_dataset(const SynthConfig& config) {
    Dataset d;
    d.config = config;
    auto add_ids = [](std::vector<std::string>& ids, const char* prefix, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%s_%03zu", prefix, i);
            ids.emplace_back(buf);
        }
    };
    add_ids(d.split.train, "train", config.train);
    add_ids(d.split.validation, "val", config.validation);
    add_ids(d.split.test, "test", config.test);
    std::vector<std::string> all;
    for (const auto* part : {&d.split.train, &d.split.validation, &d.split.test}) all.insert(all.end(), part->begin(), part->end());
    d.recordings.resize(all.size());
    parallel_for(all.size(), [&](std::size_t i) { d.recordings[i] = generate_recording(all[i], config.seed, config.duration_s); });
    return d;
}

std::string encode_labels(const AffectTrajectory& labels) {
    std::string out = "time_s,arousal,valence\n";
    char buf[96];
    for (std::size_t t = 0; t < labels.frames(); ++t) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", static_cast<double>(t) * kFrameSeconds, labels.arousal[t],
                      labels.valence[t]);
        out += buf;
    }
    return out;
}

AffectTrajectory decode_labels(std::string_view text, const std::string& origin) {
    auto fail = [&](std::size_t offset, const std::string& what) {
        throw ParseError(origin + ": " + what + " at offset " + std::to_string(offset));
    };
    const std::string_view header = "time_s,arousal,valence";
    std::size_t pos = text.find('\n');
    if (pos == std::string_view::npos || text.substr(0, pos) != header) fail(0, "missing header '" + std::string(header) + "'");
    ++pos;
    AffectTrajectory t;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        if (!line.empty()) {
            double v[3];
            const char* p = line.data();
            const char* stop = line.data() + line.size();
            for (int k = 0; k < 3; ++k) {
                auto [next, ec] = std::from_chars(p, stop, v[k]);
                if (ec != std::errc()) fail(pos + static_cast<std::size_t>(p - line.data()), "malformed number");
                p = next;
                if (k < 2) {
                    if (p == stop || *p != ',') fail(pos + static_cast<std::size_t>(p - line.data()), "expected ','");
                    ++p;
                }
            }
            if (p != stop) fail(pos + static_cast<std::size_t>(p - line.data()), "trailing characters");
            t.arousal.push_back(v[1]);
            t.valence.push_back(v[2]);
        }
        pos = end + 1;
    }
    if (t.frames() == 0) fail(text.size(), "no annotation rows");
    return t;
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& root) {
    nlohmann::ordered_json m;
    m["format"] = "affect-synth";
    m["version"] = 1;
    m["seed"] = dataset.config.seed;
    m["duration_s"] = dataset.config.duration_s;
    m["sample_rate"] = kSampleRate;
    m["frame_rate"] = kFrameRate;
    m["recordings"] = nlohmann::ordered_json::array();
    for (const auto& r : dataset.recordings) m["recordings"].push_back({{"id", r.id}, {"seed", r.seed}});
    m["splits"] = {{"train", dataset.split.train}, {"validation", dataset.split.validation}, {"test", dataset.split.test}};

    for (const auto& r : dataset.recordings) {
        write_file_atomic(root / "labels" / (r.id + ".csv"), encode_labels(r.labels));
        if (r.has_audio()) io::write_wav(root / "audio" / (r.id + ".wav"), r.audio);
        if (r.has_video()) io::write_frames(root / "video" / (r.id + ".frms"), r.video);
    }
    write_file_atomic(root / "manifest", m.dump(2) + "\n");
}

Dataset read_dataset(const std::filesystem::path& root, LoadOptions options) {
    const auto manifest_path = root / "manifest";
    nlohmann::json m;
    try {
        m = nlohmann::json::parse(read_file_text(manifest_path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(manifest_path.string() + ": " + e.what() + " at offset " + std::to_string(e.byte));
    }
    Dataset d;
    try {
        if (m.at("format") != "affect-synth") throw DataError(manifest_path.string() + ": not a synthetic dataset manifest");
        d.config.seed = m.at("seed").get<std::uint64_t>();
        d.config.duration_s = m.at("duration_s").get<double>();
        const auto& splits = m.at("splits");
        d.split.train = splits.at("train").get<std::vector<std::string>>();
        d.split.validation = splits.at("validation").get<std::vector<std::string>>();
        d.split.test = splits.at("test").get<std::vector<std::string>>();
        d.config.train = d.split.train.size();
        d.config.validation = d.split.validation.size();
        d.config.test = d.split.test.size();
        for (const auto& entry : m.at("recordings")) {
            Recording r;
            r.id = entry.at("id").get<std::string>();
            r.seed = entry.at("seed").get<std::uint64_t>();
            d.recordings.push_back(std::move(r));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(manifest_path.string() + ": " + e.what());
    }
    parallel_for(d.recordings.size(), [&](std::size_t i) {
        Recording& r = d.recordings[i];
        const auto labels = root / "labels" / (r.id + ".csv");
        if (!std::filesystem::is_regular_file(labels)) throw ParseError(labels.string() + ": missing annotation file at offset 0");
        r.labels = decode_labels(read_file_text(labels), labels.string());
        if (options.audio) r.audio = io::read_wav(root / "audio" / (r.id + ".wav"));
        if (options.video) r.video = io::read_frames(root / "video" / (r.id + ".frms"));
    });
    return d;
}

}  // namespace affect::synth
