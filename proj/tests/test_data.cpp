#include "kgml/data.hpp"

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

using namespace kgml;

namespace {

std::string write_tmp(const std::string& name, const std::string& contents) {
    const auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream out(path);
    out << contents;
    return path.string();
}

kb::KnowledgeBase tiny_kb(const std::vector<std::string>& names) {
    std::ostringstream emb;
    for (size_t i = 0; i < names.size(); ++i) emb << names[i] << '\t' << i << ".0\n";
    static int counter = 0;
    const std::string tag = std::to_string(counter++);
    return kb::load_kb(write_tmp("data_tri_" + tag + ".tsv", ""),
                       write_tmp("data_emb_" + tag + ".tsv", emb.str()));
}

data::Corpus corpus_with(const std::string& corpus_tsv, const std::string& splits_tsv) {
    static int counter = 0;
    const std::string tag = std::to_string(counter++);
    return data::load_corpus(write_tmp("data_corpus_" + tag + ".tsv", corpus_tsv),
                             write_tmp("data_splits_" + tag + ".tsv", splits_tsv));
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("load_corpus parses records and split membership") {
    auto c = corpus_with(
        "pos\t-\tgreat movie night\n"
        "neg\t-\tterrible plot twist\n"
        "pos\t-\tgreat acting\n",
        "train\tpos\ntest\tneg\n");
    CHECK(c.docs.size() == 3);
    CHECK(c.docs_with_label("pos") == std::vector<int>{0, 2});
    CHECK(c.label_splits.at("train") == std::vector<std::string>{"pos"});
    CHECK(c.docs[0].tokens.size() == 3);
}

TEST_CASE("load_corpus classifies user splits") {
    auto c = corpus_with(
        "y0\tu1\thello there\n"
        "y1\tu2\tbye now\n",
        "train\tu1\ntest\tu2\n");
    CHECK(c.user_splits.at("train") == std::vector<std::string>{"u1"});
    CHECK(c.docs_with_user("u2") == std::vector<int>{1});
}

TEST_CASE("load_corpus rejects malformed rows with line numbers") {
    CHECK_THROWS_WITH_AS(corpus_with("only_one_field\n", "train\tx\n"),
                         doctest::Contains(":1"), DataError);
}

TEST_CASE("entity linking matches the longest span") {
    auto kb = tiny_kb({"new york", "new york city", "york"});
    auto ids = data::link_entities("i visited new york city yesterday", kb);
    CHECK(ids == std::vector<int>{kb.entity_id("new york city")});
}

TEST_CASE("entity linking dedups and sorts") {
    auto kb = tiny_kb({"apple", "banana"});
    auto ids = data::link_entities("banana apple banana apple", kb);
    CHECK(ids == std::vector<int>{0, 1});
}

TEST_CASE("entity linking is case-insensitive and misses cleanly") {
    auto kb = tiny_kb({"paris"});
    CHECK(data::link_entities("PARIS in spring", kb) == std::vector<int>{0});
    CHECK(data::link_entities("nothing to see", kb).empty());
}

TEST_CASE("linking is idempotent through link_corpus") {
    auto kb = tiny_kb({"alpha", "beta"});
    auto c = corpus_with("l\t-\talpha beta alpha\n", "train\tl\n");
    data::link_corpus(c, kb);
    auto once = c.docs[0].entities;
    data::link_corpus(c, kb);
    CHECK(c.docs[0].entities == once);
    CHECK(once == std::vector<int>{0, 1});
}

TEST_CASE("sample_episode shapes and densified labels") {
    std::ostringstream corpus_tsv;
    for (int cls = 0; cls < 4; ++cls)
        for (int d = 0; d < 8; ++d)
            corpus_tsv << "c" << cls << "\t-\tdoc " << cls << " " << d << "\n";
    auto c = corpus_with(corpus_tsv.str(), "train\tc0\ntrain\tc1\ntrain\tc2\ntrain\tc3\n");
    std::mt19937_64 rng(1);
    auto ep = data::sample_episode(c, "train", 3, 2, 4, rng);
    CHECK(ep.way == 3);
    CHECK(ep.shots == 2);
    CHECK(ep.support.size() == 6);
    CHECK(ep.query.size() == 12);
    CHECK(ep.class_names.size() == 3);

    std::set<int> support_docs, query_docs;
    std::set<int> labels;
    for (const auto& it : ep.support) {
        support_docs.insert(it.doc);
        labels.insert(it.label);
    }
    for (const auto& it : ep.query) query_docs.insert(it.doc);
    CHECK(labels == std::set<int>{0, 1, 2});
    // support and query never share a document
    for (int d : support_docs) CHECK(query_docs.count(d) == 0);
}

TEST_CASE("sample_episode with exactly one eligible class set is forced") {
    auto c = corpus_with("a\t-\tx one\na\t-\tx two\na\t-\tx three\n", "train\ta\n");
    std::mt19937_64 rng(3);
    auto ep = data::sample_episode(c, "train", 1, 1, 2, rng);
    CHECK(ep.class_names == std::vector<std::string>{"a"});
}

TEST_CASE("sample_episode rejects infeasible requests") {
    auto c = corpus_with("a\t-\tx\na\t-\ty\n", "train\ta\n");
    std::mt19937_64 rng(5);
    CHECK_THROWS_AS(data::sample_episode(c, "train", 2, 1, 1, rng), DataError);  // not enough classes
    CHECK_THROWS_AS(data::sample_episode(c, "train", 1, 2, 1, rng), DataError);  // not enough docs
    CHECK_THROWS_AS(data::sample_episode(c, "missing", 1, 1, 1, rng), DataError);
}

TEST_CASE("sampling is deterministic in the rng state") {
    std::ostringstream corpus_tsv;
    for (int cls = 0; cls < 5; ++cls)
        for (int d = 0; d < 6; ++d) corpus_tsv << "c" << cls << "\t-\tw " << cls << d << "\n";
    auto c = corpus_with(corpus_tsv.str(),
                         "train\tc0\ntrain\tc1\ntrain\tc2\ntrain\tc3\ntrain\tc4\n");
    std::mt19937_64 r1(17), r2(17);
    auto a = data::sample_episode(c, "train", 2, 1, 3, r1);
    auto b = data::sample_episode(c, "train", 2, 1, 3, r2);
    CHECK(a.class_names == b.class_names);
    for (size_t i = 0; i < a.support.size(); ++i) CHECK(a.support[i].doc == b.support[i].doc);
    for (size_t i = 0; i < a.query.size(); ++i) CHECK(a.query[i].doc == b.query[i].doc);
}

TEST_CASE("class selection is close to uniform over many samples") {
    std::ostringstream corpus_tsv;
    for (int cls = 0; cls < 4; ++cls)
        for (int d = 0; d < 4; ++d) corpus_tsv << "c" << cls << "\t-\tw\n";
    auto c = corpus_with(corpus_tsv.str(), "train\tc0\ntrain\tc1\ntrain\tc2\ntrain\tc3\n");
    std::mt19937_64 rng(23);
    std::map<std::string, int> counts;
    const int trials = 10000;
    for (int t = 0; t < trials; ++t) {
        auto ep = data::sample_episode(c, "train", 1, 1, 1, rng);
        counts[ep.class_names[0]]++;
    }
    // each class expected trials/4 = 2500; 5 sigma ~ 108
    for (const auto& [name, n] : counts) CHECK(std::abs(n - trials / 4) < 220);
}

TEST_CASE("sample_user_task truncates to context_size and keeps one user") {
    std::ostringstream corpus_tsv;
    for (int d = 0; d < 9; ++d) corpus_tsv << "y" << d % 2 << "\tu7\tdoc " << d << "\n";
    auto c = corpus_with(corpus_tsv.str(), "train\tu7\n");
    std::mt19937_64 rng(29);
    auto ep = data::sample_user_task(c, "train", 4, rng, {"y0", "y1"});
    CHECK(ep.query.size() == 4);
    CHECK(ep.support.empty());
    for (const auto& it : ep.query) CHECK((it.label == 0 || it.label == 1));
}

TEST_CASE("sample_user_task keeps all docs when fewer than context_size") {
    auto c = corpus_with("y0\tu1\ta\ny1\tu1\tb\n", "train\tu1\n");
    std::mt19937_64 rng(31);
    auto ep = data::sample_user_task(c, "train", 50, rng, {"y0", "y1"});
    CHECK(ep.query.size() == 2);
}

TEST_CASE("synthetic benchmark files are well-formed and loadable") {
    const auto dir = (std::filesystem::temp_directory_path() / "kgml_synth_a").string();
    data::SynthSpec spec;
    spec.classes_train = 3;
    spec.classes_val = 1;
    spec.classes_test = 2;
    spec.entities_per_class = 6;
    spec.docs_per_class = 8;
    auto files = data::make_synthetic_benchmark(spec, 11, dir);

    auto kb = kb::load_kb(files.triples, files.embeddings);
    CHECK(kb.size() == 6 * 6);
    auto corpus = data::load_corpus(files.corpus, files.splits);
    CHECK(corpus.docs.size() == 6 * 8);
    CHECK(corpus.label_splits.at("train").size() == 3);
    CHECK(corpus.label_splits.at("val").size() == 1);
    CHECK(corpus.label_splits.at("test").size() == 2);

    // every doc links at least its mention entities
    data::link_corpus(corpus, kb);
    int linked = 0;
    for (const auto& d : corpus.docs) linked += d.entities.empty() ? 0 : 1;
    CHECK(linked == static_cast<int>(corpus.docs.size()));
}

TEST_CASE("synthetic generation is byte-identical per seed") {
    const auto d1 = (std::filesystem::temp_directory_path() / "kgml_synth_b1").string();
    const auto d2 = (std::filesystem::temp_directory_path() / "kgml_synth_b2").string();
    data::SynthSpec spec;
    spec.classes_train = 2;
    spec.classes_val = 1;
    spec.classes_test = 1;
    spec.entities_per_class = 4;
    spec.docs_per_class = 5;
    auto f1 = data::make_synthetic_benchmark(spec, 42, d1);
    auto f2 = data::make_synthetic_benchmark(spec, 42, d2);
    CHECK(slurp(f1.triples) == slurp(f2.triples));
    CHECK(slurp(f1.embeddings) == slurp(f2.embeddings));
    CHECK(slurp(f1.corpus) == slurp(f2.corpus));
    CHECK(slurp(f1.splits) == slurp(f2.splits));

    auto f3 = data::make_synthetic_benchmark(spec, 43, d2);
    CHECK(slurp(f1.corpus) != slurp(f3.corpus));
}

TEST_CASE("arm benchmark labels are the XOR of content and the user bit") {
    const auto dir = (std::filesystem::temp_directory_path() / "kgml_arm_a").string();
    data::ArmSpec spec;
    spec.users_train = 4;
    spec.users_val = 1;
    spec.users_test = 2;
    spec.docs_per_user = 20;
    auto files = data::make_arm_benchmark(spec, 17, dir);
    auto corpus = data::load_corpus(files.corpus, files.splits);
    CHECK(corpus.docs.size() == 7 * 20);
    CHECK(corpus.user_splits.at("train").size() == 4);

    // within one user the content token determines the label: same content
    // bit -> same label for every doc of that user
    std::map<std::string, std::map<std::string, std::set<std::string>>> seen;
    for (const auto& d : corpus.docs) {
        std::istringstream is(d.text);
        std::string content, style;
        is >> content >> style;
        seen[d.user][content].insert(d.label);
    }
    for (const auto& [user, bycontent] : seen)
        for (const auto& [content, labels] : bycontent) CHECK(labels.size() == 1);
}
