#include "fusionkit/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include <json.hpp>

#include "fusionkit/errors.hpp"

namespace fusionkit {

using nlohmann::json;

int DatasetManifest::stream_dim(const std::string& name) const {
    for (const auto& s : streams) {
        if (s.name == name) return s.dim;
    }
    raise(ErrorKind::Schema, "unknown stream '" + name + "'");
}

namespace {

FeatureSample parse_record(const std::string& line, std::size_t line_no) {
    json rec;
    try {
        rec = json::parse(line);
    } catch (const json::exception& e) {
        raise(ErrorKind::Parse, "line " + std::to_string(line_no) + ": " + e.what());
    }
    FeatureSample sample;
    try {
        sample.id = rec.at("id").get<std::string>();
        for (const auto& [name, values] : rec.at("streams").items()) {
            sample.streams[name] = values.get<std::vector<double>>();
        }
        if (rec.contains("emotion") && !rec["emotion"].is_null()) {
            sample.emotion = rec["emotion"].get<int>();
        }
        if (rec.contains("valence") && !rec["valence"].is_null()) {
            sample.valence = rec["valence"].get<double>();
        }
    } catch (const json::exception& e) {
        raise(ErrorKind::Parse, "line " + std::to_string(line_no) + ": " + e.what());
    }
    if (sample.streams.empty()) {
        raise(ErrorKind::Schema, "line " + std::to_string(line_no) + ": record has no streams");
    }
    return sample;
}

}  // namespace

DatasetManifest derive_manifest(const std::vector<FeatureSample>& samples, int num_classes) {
    return derive_manifest(samples, num_classes, nullptr);
}

DatasetManifest derive_manifest(const std::vector<FeatureSample>& samples, int num_classes,
                                const std::vector<std::size_t>* line_numbers) {
    if (samples.empty()) {
        raise(ErrorKind::Contract, "empty dataset");
    }
    auto where = [&](std::size_t i) {
        return line_numbers ? "line " + std::to_string((*line_numbers)[i])
                            : "record " + std::to_string(i + 1);
    };
    DatasetManifest manifest;
    for (const auto& [name, values] : samples.front().streams) {
        manifest.streams.push_back({name, static_cast<int>(values.size())});
    }
    manifest.sample_count = samples.size();
    manifest.has_emotion = true;
    manifest.has_valence = true;
    int max_label = -1;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        if (s.streams.size() != manifest.streams.size()) {
            raise(ErrorKind::Schema,
                  "sample '" + s.id + "' (" + where(i) + "): stream set differs from manifest");
        }
        for (const auto& spec : manifest.streams) {
            auto it = s.streams.find(spec.name);
            if (it == s.streams.end()) {
                raise(ErrorKind::Schema, "sample '" + s.id + "' (" + where(i) +
                                             "): missing stream '" + spec.name + "'");
            }
            if (static_cast<int>(it->second.size()) != spec.dim) {
                raise(ErrorKind::Schema,
                      "sample '" + s.id + "' (" + where(i) + "): stream '" + spec.name +
                          "' has dim " + std::to_string(it->second.size()) +
                          ", manifest says " + std::to_string(spec.dim));
            }
        }
        if (s.emotion) {
            max_label = std::max(max_label, *s.emotion);
            if (*s.emotion < 0) {
                raise(ErrorKind::Label, "sample '" + s.id + "': negative emotion label");
            }
        } else {
            manifest.has_emotion = false;
        }
        if (!s.valence) {
            manifest.has_valence = false;
        }
    }
    if (num_classes > 0) {
        manifest.num_classes = num_classes;
        if (max_label >= num_classes) {
            raise(ErrorKind::Label, "emotion label " + std::to_string(max_label) +
                                        " out of range for " + std::to_string(num_classes) +
                                        " classes");
        }
    } else {
        manifest.num_classes = std::max(2, max_label + 1);
    }
    return manifest;
}

Dataset load_dataset(const std::string& path, int num_classes) {
    std::ifstream in(path);
    if (!in) {
        raise(ErrorKind::Parse, "cannot open dataset file '" + path + "'");
    }
    Dataset ds;
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::size_t> line_numbers;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        ds.samples.push_back(parse_record(line, line_no));
        line_numbers.push_back(line_no);
    }
    if (ds.samples.empty()) {
        raise(ErrorKind::Contract, "dataset file '" + path + "' has no records");
    }
    ds.manifest = derive_manifest(ds.samples, num_classes, &line_numbers);
    return ds;
}

void write_dataset(const std::string& path, const std::vector<FeatureSample>& samples) {
    std::ofstream out(path);
    if (!out) {
        raise(ErrorKind::Parse, "cannot open '" + path + "' for writing");
    }
    for (const auto& s : samples) {
        json rec;
        rec["id"] = s.id;
        rec["streams"] = json::object();
        for (const auto& [name, values] : s.streams) {
            rec["streams"][name] = values;
        }
        rec["emotion"] = s.emotion ? json(*s.emotion) : json(nullptr);
        rec["valence"] = s.valence ? json(*s.valence) : json(nullptr);
        out << rec.dump() << "\n";
    }
}

void SynthSpec::validate() const {
    if (num_classes < 2) {
        raise(ErrorKind::Config, "synth spec: need at least 2 classes");
    }
    if (static_cast<int>(class_priors.size()) != num_classes) {
        raise(ErrorKind::Config, "synth spec: need one prior per class");
    }
    double total = 0.0;
    for (double p : class_priors) {
        if (p < 0.0) {
            raise(ErrorKind::Config, "synth spec: negative class prior");
        }
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        raise(ErrorKind::Config, "synth spec: priors sum to " + std::to_string(total));
    }
    if (static_cast<int>(valence_means.size()) != num_classes) {
        raise(ErrorKind::Config, "synth spec: need one valence mean per class");
    }
    if (valence_noise < 0.0 || feature_noise < 0.0) {
        raise(ErrorKind::Config, "synth spec: noise sigma must be >= 0");
    }
    if (streams.empty()) {
        raise(ErrorKind::Config, "synth spec: need at least one stream");
    }
    if (static_cast<int>(class_means.size()) != num_classes) {
        raise(ErrorKind::Config, "synth spec: need feature means for every class");
    }
    for (const auto& per_class : class_means) {
        if (per_class.size() != streams.size()) {
            raise(ErrorKind::Config, "synth spec: need feature means for every stream");
        }
        for (std::size_t s = 0; s < streams.size(); ++s) {
            if (static_cast<int>(per_class[s].size()) != streams[s].dim) {
                raise(ErrorKind::Config, "synth spec: feature mean dim mismatch for stream '" +
                                             streams[s].name + "'");
            }
        }
    }
    if (sample_count <= 0) {
        raise(ErrorKind::Config, "synth spec: sample count must be positive");
    }
}

SynthSpec SynthSpec::make(int num_classes, const std::vector<StreamSpec>& streams,
                          int sample_count, std::uint64_t seed, double valence_noise,
                          double feature_noise, std::uint64_t means_seed, double means_scale) {
    SynthSpec spec;
    spec.num_classes = num_classes;
    spec.class_priors.assign(static_cast<std::size_t>(num_classes), 1.0 / num_classes);
    spec.valence_means.resize(static_cast<std::size_t>(num_classes));
    for (int k = 0; k < num_classes; ++k) {
        spec.valence_means[static_cast<std::size_t>(k)] =
            num_classes == 1 ? 0.0 : -1.0 + 2.0 * k / (num_classes - 1);
    }
    spec.valence_noise = valence_noise;
    spec.streams = streams;
    spec.feature_noise = feature_noise;
    spec.sample_count = sample_count;
    spec.seed = seed;

    std::mt19937_64 rng(means_seed);
    std::normal_distribution<double> dist(0.0, means_scale);
    spec.class_means.resize(static_cast<std::size_t>(num_classes));
    for (auto& per_class : spec.class_means) {
        per_class.resize(streams.size());
        for (std::size_t s = 0; s < streams.size(); ++s) {
            per_class[s].resize(static_cast<std::size_t>(streams[s].dim));
            for (auto& v : per_class[s]) {
                v = dist(rng);
            }
        }
    }
    return spec;
}

std::vector<FeatureSample> generate_synthetic(const SynthSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::discrete_distribution<int> pick_class(spec.class_priors.begin(), spec.class_priors.end());
    std::normal_distribution<double> unit_normal(0.0, 1.0);

    std::vector<FeatureSample> samples;
    samples.reserve(static_cast<std::size_t>(spec.sample_count));
    for (int i = 0; i < spec.sample_count; ++i) {
        const int k = pick_class(rng);
        FeatureSample s;
        {
            std::ostringstream id;
            id << "synth_" << std::setw(5) << std::setfill('0') << i;
            s.id = id.str();
        }
        s.emotion = k;
        s.valence = spec.valence_means[static_cast<std::size_t>(k)] +
                    spec.valence_noise * unit_normal(rng);
        for (std::size_t st = 0; st < spec.streams.size(); ++st) {
            auto& vec = s.streams[spec.streams[st].name];
            vec.resize(static_cast<std::size_t>(spec.streams[st].dim));
            const auto& mean = spec.class_means[static_cast<std::size_t>(k)][st];
            for (std::size_t j = 0; j < vec.size(); ++j) {
                vec[j] = mean[j] + spec.feature_noise * unit_normal(rng);
            }
        }
        samples.push_back(std::move(s));
    }
    return samples;
}

SplitResult split_dataset(const std::vector<FeatureSample>& samples, double train_fraction,
                          std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        raise(ErrorKind::Contract, "split: train fraction must be in (0, 1)");
    }
    if (samples.empty()) {
        raise(ErrorKind::Contract, "split: empty sample list");
    }

    bool all_labeled = std::all_of(samples.begin(), samples.end(),
                                   [](const FeatureSample& s) { return s.emotion.has_value(); });

    std::map<int, std::vector<std::size_t>> groups;
    if (all_labeled) {
        for (std::size_t i = 0; i < samples.size(); ++i) {
            groups[*samples[i].emotion].push_back(i);
        }
    }
    bool stratified = all_labeled && groups.size() > 1;
    for (const auto& [label, idx] : groups) {
        (void)label;
        if (idx.size() < 2) {
            stratified = false;
        }
    }

    std::mt19937_64 rng(seed);
    SplitResult result;
    result.stratified = stratified;

    auto take = [&](std::vector<std::size_t> idx, std::size_t n_train) {
        std::shuffle(idx.begin(), idx.end(), rng);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            (i < n_train ? result.train : result.val).push_back(samples[idx[i]]);
        }
    };

    const auto total_train = static_cast<std::size_t>(
        std::llround(train_fraction * static_cast<double>(samples.size())));

    if (stratified) {
        // Largest-remainder allocation: per-class floors, then hand the
        // remaining train slots to the classes with the biggest fractional
        // quota (ties to the lower label).
        std::vector<std::pair<int, double>> remainders;
        std::map<int, std::size_t> quota;
        std::size_t allocated = 0;
        for (const auto& [label, idx] : groups) {
            const double q = train_fraction * static_cast<double>(idx.size());
            quota[label] = static_cast<std::size_t>(q);
            allocated += quota[label];
            remainders.emplace_back(label, q - std::floor(q));
        }
        std::stable_sort(remainders.begin(), remainders.end(),
                         [](const auto& a, const auto& b) { return a.second > b.second; });
        for (std::size_t i = 0; i < remainders.size() && allocated < total_train; ++i) {
            ++quota[remainders[i].first];
            ++allocated;
        }
        for (const auto& [label, idx] : groups) {
            take(idx, quota[label]);
        }
    } else {
        std::vector<std::size_t> all(samples.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        take(std::move(all), total_train);
    }
    return result;
}

}  // namespace fusionkit
