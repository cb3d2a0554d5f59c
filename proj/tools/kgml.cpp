#include "kgml/config.hpp"
#include "kgml/data.hpp"
#include "kgml/run.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <memory>

namespace {

// collected as raw strings so flags override config-file values in CLI order
struct CommonArgs {
    std::string config_file;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_file, "key=value config file");
    cmd->add_option("--set", args.overrides, "config override, key=value (repeatable)");
}

kgml::RunConfig resolve(const CommonArgs& args) {
    kgml::RunConfig cfg;
    if (!args.config_file.empty()) kgml::load_config_file(cfg, args.config_file);
    for (const auto& kv : args.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw kgml::DataError("--set expects key=value, got: " + kv);
        kgml::apply_config_entry(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    cfg.validate();
    return cfg;
}

kgml::run::LogSink make_sink(const std::string& log_file) {
    if (log_file.empty())
        return [](const std::string& line) { std::cout << line << '\n'; };
    auto file = std::make_shared<std::ofstream>(log_file, std::ios::binary);
    if (!*file) throw kgml::DataError("cannot open log file: " + log_file);
    return [file](const std::string& line) {
        *file << line << '\n';
        file->flush();
        std::cout << line << '\n';
    };
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"KGML: knowledge-graph-enhanced meta-learning for text classification"};
    app.require_subcommand(1);

    CommonArgs extract_args, train_args, eval_args;
    auto* extract = app.add_subcommand("extract-kg", "dump per-sentence knowledge graphs");
    add_common(extract, extract_args);
    auto* train = app.add_subcommand("train", "train the selected engine");
    add_common(train, train_args);
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    add_common(eval, eval_args);

    auto* synth = app.add_subcommand("synth", "generate a synthetic benchmark");
    std::string synth_kind = "supervised", synth_out = "synth";
    std::uint64_t synth_seed = 7;
    double synth_lambda = 1.0;
    synth->add_option("--kind", synth_kind, "supervised|arm")
        ->check(CLI::IsMember({"supervised", "arm"}));
    synth->add_option("--out", synth_out, "output directory");
    synth->add_option("--seed", synth_seed, "generator seed");
    synth->add_option("--lambda", synth_lambda, "token uninformativeness in [0,1]")
        ->check(CLI::Range(0.0, 1.0));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? 0 : 1;
    }

    try {
        if (extract->parsed()) {
            const auto cfg = resolve(extract_args);
            kgml::run::cmd_extract_kg(cfg, make_sink(cfg.log_file));
        } else if (train->parsed()) {
            const auto cfg = resolve(train_args);
            kgml::run::cmd_train(cfg, make_sink(cfg.log_file));
        } else if (eval->parsed()) {
            const auto cfg = resolve(eval_args);
            kgml::run::cmd_eval(cfg, make_sink(cfg.log_file));
        } else if (synth->parsed()) {
            kgml::data::SynthFiles files;
            if (synth_kind == "arm") {
                files = kgml::data::make_arm_benchmark(kgml::data::ArmSpec{}, synth_seed, synth_out);
            } else {
                kgml::data::SynthSpec spec;
                spec.lambda = synth_lambda;
                files = kgml::data::make_synthetic_benchmark(spec, synth_seed, synth_out);
            }
            std::cout << "triples=" << files.triples << "\nembeddings=" << files.embeddings
                      << "\ncorpus=" << files.corpus << "\nsplits=" << files.splits
                      << "\nmetadata=" << files.metadata << '\n';
        }
    } catch (const kgml::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return 3;
    } catch (const kgml::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
