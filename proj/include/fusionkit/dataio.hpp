#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fusionkit {

// One video segment's pre-extracted feature streams plus optional labels.
struct FeatureSample {
    std::string id;
    std::map<std::string, std::vector<double>> streams;
    std::optional<int> emotion;
    std::optional<double> valence;

    bool operator==(const FeatureSample&) const = default;
};

struct StreamSpec {
    std::string name;
    int dim = 0;

    bool operator==(const StreamSpec&) const = default;
};

struct DatasetManifest {
    std::vector<StreamSpec> streams;  // sorted by name
    int num_classes = 0;
    std::size_t sample_count = 0;
    bool has_emotion = false;
    bool has_valence = false;

    int stream_dim(const std::string& name) const;
    bool operator==(const DatasetManifest&) const = default;
};

struct Dataset {
    DatasetManifest manifest;
    std::vector<FeatureSample> samples;
};

// Reads newline-delimited records:
//   {"id": ..., "streams": {name: [...]}, "emotion": int|null, "valence": num|null}
// The manifest is derived from the first record and enforced on the rest.
// If num_classes is 0 it is inferred as max(label)+1 (at least 2).
Dataset load_dataset(const std::string& path, int num_classes = 0);

void write_dataset(const std::string& path, const std::vector<FeatureSample>& samples);

DatasetManifest derive_manifest(const std::vector<FeatureSample>& samples, int num_classes = 0);
DatasetManifest derive_manifest(const std::vector<FeatureSample>& samples, int num_classes,
                                const std::vector<std::size_t>* line_numbers);

// Class-conditional generator: draw a class from the priors, then valence
// and every feature coordinate from per-class Gaussians.
struct SynthSpec {
    int num_classes = 0;
    std::vector<double> class_priors;                           // sums to 1
    std::vector<double> valence_means;                          // one per class
    double valence_noise = 0.0;                                 // sigma
    std::vector<StreamSpec> streams;
    std::vector<std::vector<std::vector<double>>> class_means;  // [class][stream][coord]
    double feature_noise = 0.0;                                 // sigma_f
    int sample_count = 0;
    std::uint64_t seed = 0;

    void validate() const;

    // Uniform priors, valence means equally spaced in [-1, 1], per-class
    // per-stream feature means drawn N(0, means_scale^2) from means_seed.
    static SynthSpec make(int num_classes, const std::vector<StreamSpec>& streams,
                          int sample_count, std::uint64_t seed, double valence_noise,
                          double feature_noise, std::uint64_t means_seed = 1,
                          double means_scale = 1.0);
};

std::vector<FeatureSample> generate_synthetic(const SynthSpec& spec);

struct SplitResult {
    std::vector<FeatureSample> train;
    std::vector<FeatureSample> val;
    bool stratified = false;
};

// Deterministic disjoint/exhaustive split, stratified by emotion label when
// every class has at least 2 samples.
SplitResult split_dataset(const std::vector<FeatureSample>& samples, double train_fraction,
                          std::uint64_t seed);

}  // namespace fusionkit
