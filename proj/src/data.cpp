#include "kgml/data.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace kgml::data {

namespace {

std::string fmt_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {  // inclusive bounds
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

/// First k elements of a seeded partial Fisher-Yates over 0..n-1.
std::vector<int> sample_without_replacement(int n, int k, std::mt19937_64& rng) {
    std::vector<int> idx(static_cast<size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < k; ++i) std::swap(idx[i], idx[uniform_int(rng, i, n - 1)]);
    idx.resize(static_cast<size_t>(k));
    return idx;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);  // binary: stable newlines
    if (!out) throw DataError("cannot write file: " + path);
    return out;
}

}  // namespace

std::vector<int> Corpus::docs_with_label(const std::string& label) const {
    std::vector<int> out;
    for (size_t i = 0; i < docs.size(); ++i)
        if (docs[i].label == label) out.push_back(static_cast<int>(i));
    return out;
}

std::vector<int> Corpus::docs_with_user(const std::string& user) const {
    std::vector<int> out;
    for (size_t i = 0; i < docs.size(); ++i)
        if (docs[i].user == user) out.push_back(static_cast<int>(i));
    return out;
}

Corpus load_corpus(const std::string& corpus_path, const std::string& splits_path) {
    Corpus c;
    std::ifstream in(corpus_path);
    if (!in) throw DataError("cannot open corpus file: " + corpus_path);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream parts(line);
        Doc d;
        if (!std::getline(parts, d.label, '\t') || !std::getline(parts, d.user, '\t') ||
            !std::getline(parts, d.text))
            throw DataError(corpus_path + ":" + std::to_string(line_no) +
                            ": expected label<TAB>user<TAB>text");
        for (const auto& tok : enc::tokenize(d.text)) d.tokens.push_back(c.vocab.add(tok));
        c.docs.push_back(std::move(d));
    }

    std::ifstream sp(splits_path);
    if (!sp) throw DataError("cannot open splits file: " + splits_path);
    std::set<std::string> labels, users;
    for (const auto& d : c.docs) {
        labels.insert(d.label);
        if (d.user != "-") users.insert(d.user);
    }
    line_no = 0;
    while (std::getline(sp, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream parts(line);
        std::string split, name;
        if (!std::getline(parts, split, '\t') || !std::getline(parts, name))
            throw DataError(splits_path + ":" + std::to_string(line_no) +
                            ": expected split<TAB>name");
        if (users.count(name))
            c.user_splits[split].push_back(name);
        else if (labels.count(name))
            c.label_splits[split].push_back(name);
        else
            throw DataError(splits_path + ":" + std::to_string(line_no) +
                            ": name not present in corpus: " + name);
    }
    return c;
}

std::vector<int> link_entities(const std::string& text, const kb::KnowledgeBase& kb) {
    const std::vector<std::string> tokens = enc::tokenize(text);

    // longest KB name, measured in tokens
    size_t max_span = 1;
    for (const auto& name : kb.entities)
        max_span = std::max(max_span, enc::tokenize(name).size());

    std::vector<int> found;
    size_t pos = 0;
    while (pos < tokens.size()) {
        int matched = -1;
        size_t matched_len = 0;
        const size_t limit = std::min(max_span, tokens.size() - pos);
        for (size_t len = limit; len >= 1; --len) {
            std::string candidate = tokens[pos];
            for (size_t k = 1; k < len; ++k) candidate += " " + tokens[pos + k];
            const int id = kb.entity_id(candidate);
            if (id >= 0) {
                matched = id;
                matched_len = len;
                break;
            }
        }
        if (matched >= 0) {
            found.push_back(matched);
            pos += matched_len;
        } else {
            ++pos;
        }
    }
    std::sort(found.begin(), found.end());
    found.erase(std::unique(found.begin(), found.end()), found.end());
    return found;
}

void link_corpus(Corpus& corpus, const kb::KnowledgeBase& kb) {
    for (auto& d : corpus.docs) d.entities = link_entities(d.text, kb);
}

meta::Episode sample_episode(const Corpus& corpus, const std::string& split, int n_way,
                             int k_shot, int queries, std::mt19937_64& rng) {
    if (n_way < 1 || k_shot < 1 || queries < 1)
        throw DataError("sample_episode: N, K and Q must be positive");
    auto it = corpus.label_splits.find(split);
    if (it == corpus.label_splits.end()) throw DataError("sample_episode: unknown split: " + split);

    std::vector<std::string> eligible;
    for (const auto& label : it->second)
        if (static_cast<int>(corpus.docs_with_label(label).size()) >= k_shot + queries)
            eligible.push_back(label);
    std::sort(eligible.begin(), eligible.end());
    if (static_cast<int>(eligible.size()) < n_way)
        throw DataError("sample_episode: split '" + split + "' has " +
                        std::to_string(eligible.size()) + " eligible classes, need " +
                        std::to_string(n_way));

    meta::Episode ep;
    ep.way = n_way;
    ep.shots = k_shot;
    for (int c : sample_without_replacement(static_cast<int>(eligible.size()), n_way, rng))
        ep.class_names.push_back(eligible[static_cast<size_t>(c)]);

    for (int k = 0; k < n_way; ++k) {
        const std::vector<int> pool = corpus.docs_with_label(ep.class_names[static_cast<size_t>(k)]);
        const std::vector<int> pick =
            sample_without_replacement(static_cast<int>(pool.size()), k_shot + queries, rng);
        for (int j = 0; j < k_shot + queries; ++j) {
            const int doc = pool[static_cast<size_t>(pick[static_cast<size_t>(j)])];
            meta::Item item;
            item.tokens = corpus.docs[static_cast<size_t>(doc)].tokens;
            item.label = k;
            item.doc = doc;
            (j < k_shot ? ep.support : ep.query).push_back(std::move(item));
        }
    }
    return ep;
}

meta::Episode sample_user_task(const Corpus& corpus, const std::string& split,
                               int context_size, std::mt19937_64& rng,
                               const std::vector<std::string>& label_universe) {
    if (context_size < 1) throw DataError("sample_user_task: context size must be positive");
    auto it = corpus.user_splits.find(split);
    if (it == corpus.user_splits.end() || it->second.empty())
        throw DataError("sample_user_task: no users in split: " + split);
    const std::string& user =
        it->second[static_cast<size_t>(uniform_int(rng, 0, static_cast<int>(it->second.size()) - 1))];

    const std::vector<int> pool = corpus.docs_with_user(user);
    if (pool.empty()) throw DataError("sample_user_task: user has no documents: " + user);
    const int take = std::min(context_size, static_cast<int>(pool.size()));
    meta::Episode ep;
    ep.class_names = label_universe;
    for (int j : sample_without_replacement(static_cast<int>(pool.size()), take, rng)) {
        const int doc = pool[static_cast<size_t>(j)];
        meta::Item item;
        item.tokens = corpus.docs[static_cast<size_t>(doc)].tokens;
        const auto lit = std::find(label_universe.begin(), label_universe.end(),
                                   corpus.docs[static_cast<size_t>(doc)].label);
        if (lit == label_universe.end())
            throw DataError("sample_user_task: label outside universe: " +
                            corpus.docs[static_cast<size_t>(doc)].label);
        item.label = static_cast<int>(lit - label_universe.begin());
        item.doc = doc;
        ep.query.push_back(std::move(item));
    }
    return ep;
}

SynthFiles make_synthetic_benchmark(const SynthSpec& spec, std::uint64_t seed,
                                    const std::string& out_dir) {
    if (spec.classes_train < 1 || spec.classes_test < 1 || spec.entities_per_class < 2 ||
        spec.docs_per_class < 2 || spec.tokens_per_doc < spec.mentions_per_doc ||
        spec.mentions_per_doc < 1 || spec.embed_dim < 1 || spec.lambda < 0.0 ||
        spec.lambda > 1.0 || spec.vocab_shared < 1 || spec.vocab_per_class < 1)
        throw DataError("make_synthetic_benchmark: inconsistent spec");

    std::filesystem::create_directories(out_dir);
    SynthFiles files{out_dir + "/kb_triples.tsv", out_dir + "/kb_embeddings.tsv",
                     out_dir + "/corpus.tsv", out_dir + "/splits.tsv", out_dir + "/meta.txt"};
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const int n_classes = spec.classes_train + spec.classes_val + spec.classes_test;
    auto class_name = [](int c) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "c%03d", c);
        return std::string(buf);
    };
    auto entity_name = [&](int c, int e) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "e%03d_%03d", c, e);
        return std::string(buf);
    };

    // embeddings: per-class cluster centers with small within-class noise
    auto emb = open_out(files.embeddings);
    for (int c = 0; c < n_classes; ++c) {
        Eigen::VectorXd center(spec.embed_dim);
        for (int d = 0; d < spec.embed_dim; ++d) center(d) = gauss(rng);
        center *= spec.cluster_radius / center.norm();
        for (int e = 0; e < spec.entities_per_class; ++e) {
            emb << entity_name(c, e) << '\t';
            for (int d = 0; d < spec.embed_dim; ++d) {
                if (d) emb << ' ';
                emb << fmt_double(center(d) + spec.cluster_noise * gauss(rng));
            }
            emb << '\n';
        }
    }
    emb.close();

    // base KB: an intra-class chain over the first fraction of each class's
    // entities; the rest stay isolated until k-NN densification
    auto tri = open_out(files.triples);
    const int chain_len = std::max(
        2, static_cast<int>(spec.base_chain_fraction * spec.entities_per_class));
    for (int c = 0; c < n_classes; ++c)
        for (int e = 0; e + 1 < std::min(chain_len, spec.entities_per_class); ++e)
            tri << entity_name(c, e) << "\tr\t" << entity_name(c, e + 1) << '\n';
    tri.close();

    auto corpus = open_out(files.corpus);
    for (int c = 0; c < n_classes; ++c) {
        for (int doc = 0; doc < spec.docs_per_class; ++doc) {
            std::vector<std::string> toks;
            for (int m : sample_without_replacement(spec.entities_per_class,
                                                    spec.mentions_per_doc, rng))
                toks.push_back(entity_name(c, m));
            for (int f = spec.mentions_per_doc; f < spec.tokens_per_doc; ++f) {
                char buf[32];
                if (unit(rng) < spec.lambda)
                    std::snprintf(buf, sizeof(buf), "w%04d",
                                  uniform_int(rng, 0, spec.vocab_shared - 1));
                else
                    std::snprintf(buf, sizeof(buf), "t%03d_%03d", c,
                                  uniform_int(rng, 0, spec.vocab_per_class - 1));
                toks.emplace_back(buf);
            }
            corpus << class_name(c) << "\t-\t";
            for (size_t i = 0; i < toks.size(); ++i) corpus << (i ? " " : "") << toks[i];
            corpus << '\n';
        }
    }
    corpus.close();

    auto splits = open_out(files.splits);
    for (int c = 0; c < n_classes; ++c) {
        const char* split = c < spec.classes_train                      ? "train"
                            : c < spec.classes_train + spec.classes_val ? "val"
                                                                        : "test";
        splits << split << '\t' << class_name(c) << '\n';
    }
    splits.close();

    auto md = open_out(files.metadata);
    md << "kind=supervised\nclasses=" << n_classes << "\nlambda=" << fmt_double(spec.lambda)
       << "\nentities_per_class=" << spec.entities_per_class
       << "\ndocs_per_class=" << spec.docs_per_class << "\nembed_dim=" << spec.embed_dim << '\n';
    md.close();
    return files;
}

SynthFiles make_arm_benchmark(const ArmSpec& spec, std::uint64_t seed,
                              const std::string& out_dir) {
    if (spec.users_train < 1 || spec.users_test < 1 || spec.docs_per_user < 1 ||
        spec.style_noise < 0.0 || spec.style_noise >= 0.5)
        throw DataError("make_arm_benchmark: inconsistent spec");

    std::filesystem::create_directories(out_dir);
    SynthFiles files{out_dir + "/kb_triples.tsv", out_dir + "/kb_embeddings.tsv",
                     out_dir + "/corpus.tsv", out_dir + "/splits.tsv", out_dir + "/meta.txt"};
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    // minimal KB so extract-kg remains runnable on this corpus
    auto emb = open_out(files.embeddings);
    emb << "styleword\t1.0 0.0\ncontentword\t0.0 1.0\n";
    emb.close();
    auto tri = open_out(files.triples);
    tri << "styleword\tr\tcontentword\n";
    tri.close();

    const int n_users = spec.users_train + spec.users_val + spec.users_test;
    auto corpus = open_out(files.corpus);
    auto splits = open_out(files.splits);
    for (int u = 0; u < n_users; ++u) {
        char uname[16];
        std::snprintf(uname, sizeof(uname), "u%04d", u);
        const int z = uniform_int(rng, 0, 1);  // hidden per-user bit
        for (int d = 0; d < spec.docs_per_user; ++d) {
            const int content = uniform_int(rng, 0, 1);
            const int label = content ^ z;
            const int style = unit(rng) < spec.style_noise ? 1 - z : z;
            corpus << 'y' << label << '\t' << uname << "\tx" << content << " s" << style << '\n';
        }
        const char* split = u < spec.users_train                    ? "train"
                            : u < spec.users_train + spec.users_val ? "val"
                                                                    : "test";
        splits << split << '\t' << uname << '\n';
    }
    corpus.close();
    splits.close();

    auto md = open_out(files.metadata);
    md << "kind=unsupervised\nusers=" << n_users << "\nstyle_noise=" << fmt_double(spec.style_noise)
       << "\ndocs_per_user=" << spec.docs_per_user << '\n';
    md.close();
    return files;
}

}  // namespace kgml::data
