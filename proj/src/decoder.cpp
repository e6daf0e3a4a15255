#include "fusionkit/decoder.hpp"

#include <fstream>

#include <json.hpp>

#include "fusionkit/errors.hpp"

namespace fusionkit {

using nlohmann::json;

DecoderKind decoder_from_string(const std::string& s) {
    if (s == "baseline") return DecoderKind::baseline;
    if (s == "jdev") return DecoderKind::jdev;
    raise(ErrorKind::Config, "unknown decoder '" + s + "' (want baseline|jdev)");
}

const char* to_string(DecoderKind k) {
    return k == DecoderKind::baseline ? "baseline" : "jdev";
}

DecoderOutput jdev_forward(const JdevParams& params, const ad::NodePtr& fused) {
    DecoderOutput out;
    out.logits = ad::add_bias(ad::matmul(fused, params.w_emotion), params.b_emotion);
    out.posterior = ad::softmax_rows(out.logits);
    out.valence_direct = ad::add_bias(ad::matmul(fused, params.w_valence), params.b_valence);
    // The auxiliary branch reads the pre-softmax logits.
    out.valence_from_emotion =
        ad::tanh(ad::add_bias(ad::matmul(out.logits, params.w_emo_val), params.b_emo_val));
    out.valence = ad::add_bias(
        ad::matmul(ad::concat_cols({out.valence_direct, out.valence_from_emotion}), params.w_merge),
        params.b_merge);
    return out;
}

DecoderOutput baseline_forward(const BaselineParams& params, const ad::NodePtr& fused) {
    DecoderOutput out;
    out.logits = ad::add_bias(ad::matmul(fused, params.w_emotion), params.b_emotion);
    out.posterior = ad::softmax_rows(out.logits);
    out.valence = ad::add_bias(ad::matmul(fused, params.w_valence), params.b_valence);
    return out;
}

int classify(const std::vector<double>& probs) {
    if (probs.empty()) {
        raise(ErrorKind::Contract, "classify: empty posterior");
    }
    int best = 0;
    for (int i = 1; i < static_cast<int>(probs.size()); ++i) {
        if (probs[static_cast<std::size_t>(i)] > probs[static_cast<std::size_t>(best)]) {
            best = i;
        }
    }
    return best;
}

void write_predictions(const std::string& path, const std::vector<Prediction>& predictions) {
    std::ofstream out(path);
    if (!out) {
        raise(ErrorKind::Parse, "cannot open '" + path + "' for writing");
    }
    for (const auto& p : predictions) {
        json rec;
        rec["id"] = p.id;
        rec["probs"] = p.probs;
        rec["valence"] = p.valence;
        out << rec.dump() << "\n";
    }
}

std::vector<Prediction> read_predictions(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        raise(ErrorKind::Parse, "cannot open prediction file '" + path + "'");
    }
    std::vector<Prediction> predictions;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            json rec = json::parse(line);
            Prediction p;
            p.id = rec.at("id").get<std::string>();
            p.probs = rec.at("probs").get<std::vector<double>>();
            p.valence = rec.at("valence").get<double>();
            predictions.push_back(std::move(p));
        } catch (const json::exception& e) {
            raise(ErrorKind::Parse,
                  path + " line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (predictions.empty()) {
        raise(ErrorKind::Contract, "prediction file '" + path + "' has no records");
    }
    return predictions;
}

}  // namespace fusionkit
