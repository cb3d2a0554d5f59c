#include "kgml/encoder.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace kgml::enc {

Vocab::Vocab() {
    add("<pad>");
    add("<unk>");
}

int Vocab::add(const std::string& token) {
    auto it = index_.find(token);
    if (it != index_.end()) return it->second;
    const int id = static_cast<int>(tokens_.size());
    tokens_.push_back(token);
    index_[token] = id;
    return id;
}

int Vocab::id(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnk : it->second;
}

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
        } else {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

void register_encoder_params(ParameterStore& store, int vocab_size, int d_word, int d_sent,
                             std::mt19937_64& rng) {
    if (vocab_size < 2 || d_word < 1 || d_sent < 1)
        throw NumericError("encoder: invalid dimensions");
    store.add("enc.embed", Group::encoder, rand_uniform(vocab_size, d_word, 0.5, rng));
    const double s = std::sqrt(6.0 / (d_word + d_sent));
    store.add("enc.proj.w", Group::encoder, rand_uniform(d_word, d_sent, s, rng));
    store.add("enc.proj.b", Group::encoder, Mat::Zero(1, d_sent));
}

void register_fusion_params(ParameterStore& store, int d_sent, int d_graph,
                            std::mt19937_64& rng) {
    if (d_sent < 1 || d_graph < 1) throw NumericError("fusion: invalid dimensions");
    const double s = std::sqrt(6.0 / (d_sent + d_graph + d_sent));
    store.add("fuse.w", Group::knowledge, rand_uniform(d_sent + d_graph, d_sent, s, rng));
    store.add("fuse.b", Group::knowledge, Mat::Zero(1, d_sent));
}

ad::Value encode_sentence(Bound& bound, const std::vector<int>& tokens) {
    std::vector<int> ids;
    for (int t : tokens)
        if (t != kPad) ids.push_back(t);
    if (ids.empty()) throw DataError("encode_sentence: no non-PAD tokens");
    std::sort(ids.begin(), ids.end());

    ad::Tape& tape = bound.tape();
    ad::Value bag = tape.rows_mean(bound.at("enc.embed"), ids);
    ad::Value proj = tape.add(tape.matmul(bag, bound.at("enc.proj.w")), bound.at("enc.proj.b"));
    return tape.relu(proj);
}

ad::Value fuse(Bound& bound, ad::Value sentence, ad::Value graph) {
    ad::Tape& tape = bound.tape();
    ad::Value cat = tape.concat_cols(sentence, graph);
    return tape.relu(tape.add(tape.matmul(cat, bound.at("fuse.w")), bound.at("fuse.b")));
}

ad::Value fuse_ablation_concat(ad::Tape& tape, ad::Value sentence, ad::Value graph) {
    if (graph.id < 0) return sentence;  // no-KG mode: nothing to append
    return tape.concat_cols(sentence, graph);
}

}  // namespace kgml::enc
