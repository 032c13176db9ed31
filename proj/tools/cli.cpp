// Copyright 2026 The aitd Authors
// SPDX-License-Identifier: Apache-2.0

#include "aitd/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "aitd/checkpoint.hpp"
#include "aitd/config.hpp"
#include "aitd/error.hpp"
#include "aitd/harness.hpp"
#include "aitd/metrics.hpp"
#include "aitd/synthetic.hpp"
#include "aitd/text.hpp"

namespace aitd::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Errors the user can fix by changing the invocation.
class UsageError : public Error {
public:
    using Error::Error;
};

void write_file(const fs::path& path, const std::string& bytes) {
    std::ofstream f(path, std::ios::binary);
    if (!f || !f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()))) {
        throw Error("cannot write " + path.string());
    }
}

std::string read_file(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw Error("cannot open " + path.string());
    }
    std::ostringstream buf;
    buf << f.rdbuf();
    return buf.str();
}

std::string abs(const fs::path& p) { return fs::absolute(p).lexically_normal().string(); }

json manifest(std::string_view command, json config, json inputs, const fs::path& out) {
    json m{{"format_version", kManifestVersion},
           {"command", command},
           {"config", std::move(config)},
           {"inputs", std::move(inputs)},
           {"output", abs(out)}};
    if (m["config"].contains("seed")) {
        m["seed"] = m["config"]["seed"];
    }
    return m;
}

void write_manifest(const fs::path& out, const json& m) {
    fs::create_directories(out);
    write_file(out / "manifest.json", m.dump(2) + "\n");
}

/// Flags shared by train and sweep.
struct RunFlags {
    std::string config;
    std::string data;
    std::string out;
    std::string from_manifest;
    std::optional<std::int64_t> seed;
    std::optional<std::int64_t> max_len;
    std::optional<std::string> model;
    std::optional<std::int64_t> rank;
    std::optional<std::string> pooling;

    void attach(CLI::App* app, bool data_required) {
        app->add_option("--config", config, "flat key = value run configuration")->check(CLI::ExistingFile);
        auto* d = app->add_option("--data", data, "directory written by prepare")->check(CLI::ExistingDirectory);
        auto* m = app->add_option("--from-manifest", from_manifest, "rerun exactly from a manifest.json")
                      ->check(CLI::ExistingFile);
        app->add_option("--out", out, "output directory")->required();
        app->add_option("--seed", seed, "master seed");
        app->add_option("--max-len", max_len, "prompt token budget")->check(CLI::PositiveNumber);
        app->add_option("--model", model, "encoder | decoder | baseline")
            ->check(CLI::IsMember({"encoder", "decoder", "baseline"}));
        app->add_option("--rank", rank, "LoRA rank")->check(CLI::PositiveNumber);
        app->add_option("--pooling", pooling, "first | last | mean")->check(CLI::IsMember({"first", "last", "mean"}));
        if (data_required) {
            d->excludes(m);
        }
    }

    bool overrides_given() const { return !config.empty() || seed || max_len || model || rank || pooling; }

    /// Resolved configuration and data directory.
    std::pair<RunConfig, std::string> resolve(std::string_view command) const {
        if (!from_manifest.empty()) {
            if (overrides_given()) {
                throw UsageError("--from-manifest cannot be combined with configuration flags");
            }
            const json m = json::parse(read_file(from_manifest));
            if (m.value("command", "") != command) {
                throw UsageError("manifest was written by '" + m.value("command", "") + "', not '" +
                                 std::string(command) + "'");
            }
            if (m.value("format_version", 0) != kManifestVersion) {
                throw FormatError("unsupported manifest format_version " + m.value("format_version", json()).dump());
            }
            return {RunConfig::from_json(m.at("config")), m.at("inputs").at("data").get<std::string>()};
        }
        if (data.empty()) {
            throw UsageError("--data or --from-manifest is required");
        }
        RunConfig c = config.empty() ? RunConfig() : RunConfig::load(config);
        if (seed) c.set("seed", std::to_string(*seed));
        if (max_len) c.set("max_len", std::to_string(*max_len));
        if (model) c.set("model", *model);
        if (rank) c.set("decoder.rank", std::to_string(*rank));
        if (pooling) c.set("decoder.pooling", *pooling);
        if (!harness::parse_model_kind(c.get_string("model"))) {
            throw UsageError("unknown model kind '" + c.get_string("model") + "' (encoder | decoder | baseline)");
        }
        return {c, abs(data)};
    }
};

text::Split split_arg(const std::string& name) {
    const auto s = text::parse_split(name);
    if (!s) {
        throw UsageError("unknown split '" + name + "'");
    }
    return *s;
}

void write_report(const fs::path& out, const std::string& name, const metrics::EvalReport& report,
                  std::size_t bin_width) {
    const auto hist = metrics::error_length_histogram(report, bin_width);
    write_file(out / (name + ".csv"), metrics::reports_to_csv({{name, report}}));
    json doc = report.to_json();
    doc["error_length_histogram"] = hist.to_json();
    write_file(out / (name + ".json"), doc.dump(2) + "\n");
    write_file(out / (name + "_confusion.svg"), metrics::confusion_svg(report, name + " confusion matrix"));
    write_file(out / (name + "_error_length.svg"), metrics::histogram_svg(hist, name + " error length"));
}

// ---------------------------------------------------------------------------

struct PrepareArgs {
    std::string corpus;
    std::string lexicon;
    std::string out;
    bool synthetic = false;
    std::size_t count = 2000;
    std::uint64_t seed = synthetic::SyntheticSpec{}.seed;
};

int cmd_prepare(const PrepareArgs& a, std::ostream& out) {
    if (a.synthetic == !a.corpus.empty()) {
        throw UsageError("prepare needs exactly one of --corpus or --synthetic");
    }
    json inputs = json::object();
    if (a.synthetic) {
        inputs["synthetic"] = {{"count", a.count}, {"seed", a.seed}};
    } else {
        inputs["corpus"] = abs(a.corpus);
    }
    if (!a.lexicon.empty()) {
        inputs["lexicon"] = abs(a.lexicon);
    }
    write_manifest(a.out, manifest("prepare", json::object(), inputs, a.out));

    std::vector<text::LabeledExample> examples;
    text::Lexicon lexicon;
    if (a.synthetic) {
        synthetic::SyntheticSpec spec;
        spec.count = a.count;
        spec.seed = a.seed;
        auto generated = synthetic::generate(spec);
        examples = std::move(generated.examples);
        lexicon = std::move(generated.lexicon);
    } else {
        examples = text::load_jsonl(a.corpus);
    }
    if (!a.lexicon.empty()) {
        lexicon = text::Lexicon::load(a.lexicon);
    }
    const auto data = harness::Dataset::from_corpus(examples, std::move(lexicon));
    data.save(a.out);
    out << "train " << data.train.size() << " dev " << data.dev.size() << " test " << data.test.size() << " vocab "
        << data.vocab.size() << "\n";
    return kExitOk;
}

int cmd_train(const RunFlags& f, std::ostream& out) {
    const auto [config, data_dir] = f.resolve("train");
    const fs::path dir = f.out;
    write_manifest(dir, manifest("train", config.to_json(), {{"data", data_dir}}, dir));
    const auto data = harness::Dataset::load(data_dir);
    const auto trained = harness::train_model(config, data);
    write_file(dir / "model.ckpt", trained.result.best_checkpoint);
    write_file(dir / "history.csv", trained.history);
    write_report(dir, "dev_report", trained.result.best.report, config.get_size("bin_width"));
    out << "best evaluation " << trained.result.best_evaluation << " (step " << trained.result.best_step
        << "): dev accuracy " << trained.result.best.accuracy << ", macro F1 " << trained.result.best.macro_f1
        << "\n";
    return kExitOk;
}

struct EvalArgs {
    std::string checkpoint;
    std::string data;
    std::string split = "test";
    std::string out;
    std::size_t bin_width = 50;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
    const fs::path dir = a.out;
    const auto split = split_arg(a.split);
    write_manifest(dir, manifest("eval", {{"split", a.split}, {"bin_width", a.bin_width}},
                                 {{"checkpoint", abs(a.checkpoint)}, {"data", abs(a.data)}}, dir));
    const auto model = harness::load_classifier(read_checkpoint(a.checkpoint));
    const auto data = harness::Dataset::load(a.data);
    const auto fp = model->vocab_fingerprint();
    if (!fp.empty() && fp != data.vocab.fingerprint()) {
        throw Error("vocabulary mismatch: checkpoint vocabulary " + fp + " vs data vocabulary " +
                    data.vocab.fingerprint());
    }
    const auto report = harness::evaluate(*model, data.split(split));
    write_report(dir, "report", report, a.bin_width);
    out << a.split << " accuracy " << report.accuracy << ", macro F1 " << report.macro.f1 << "\n";
    return kExitOk;
}

struct PredictArgs {
    std::string checkpoint;
    std::string text;
    std::string file;
};

int cmd_predict(const PredictArgs& a, std::ostream& out) {
    std::vector<std::string> inputs;
    if (!a.file.empty()) {
        std::istringstream lines(read_file(a.file));
        std::string line;
        while (std::getline(lines, line)) {
            if (!line.empty() && line.back() == '\r') {
                line.pop_back();
            }
            inputs.push_back(line);
        }
    } else {
        inputs.push_back(a.text);
    }
    if (inputs.empty()) {
        throw Error("empty input: no texts to classify");
    }
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (inputs[i].empty()) {
            throw Error("empty input text" + (a.file.empty() ? std::string() : " on line " + std::to_string(i + 1)));
        }
    }
    const auto model = harness::load_classifier(read_checkpoint(a.checkpoint));
    const std::string kind(harness::model_kind_name(model->kind()));
    char buf[64];
    for (const auto& t : inputs) {
        const auto p = model->predict(t);
        std::snprintf(buf, sizeof buf, "%d\t%.6f\t", p.label, p.p_ai);
        out << buf << kind << "\n";
    }
    return kExitOk;
}

int cmd_sweep(const RunFlags& f, const std::string& ranks_flag, std::ostream& out) {
    const auto [config, data_dir] = f.resolve("sweep");
    if (config.get_string("model") != "decoder") {
        throw UsageError("sweep needs model = decoder, got '" + config.get_string("model") + "'");
    }
    RunConfig run = config;
    if (!ranks_flag.empty()) {
        run.set("decoder.ranks", ranks_flag);
    }
    const auto ranks = harness::parse_ranks(run.get_string("decoder.ranks"));
    const auto split = split_arg(run.get_string("eval_split"));
    const fs::path dir = f.out;
    write_manifest(dir, manifest("sweep", run.to_json(), {{"data", data_dir}}, dir));
    const auto data = harness::Dataset::load(data_dir);
    const auto groups = harness::rank_sweep(run, data, ranks, split);
    write_file(dir / "sweep.csv", metrics::reports_to_csv(groups));
    json doc = json::object();
    for (const auto& [name, report] : groups) {
        doc[name] = report.to_json();
        out << name << " accuracy " << report.accuracy << ", macro F1 " << report.macro.f1 << "\n";
    }
    write_file(dir / "sweep.json", doc.dump(2) + "\n");
    return kExitOk;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"AI-generated Chinese text detection lab", "aitd"};
    app.require_subcommand(1);

    PrepareArgs prep;
    auto* prepare = app.add_subcommand("prepare", "split a corpus and build the vocabulary");
    prepare->add_option("--corpus", prep.corpus, "labelled JSONL corpus")->check(CLI::ExistingFile);
    prepare->add_flag("--synthetic", prep.synthetic, "generate the seeded synthetic corpus instead");
    prepare->add_option("--count", prep.count, "synthetic corpus size")->check(CLI::PositiveNumber);
    prepare->add_option("--seed", prep.seed, "synthetic corpus seed");
    prepare->add_option("--lexicon", prep.lexicon, "one word per line")->check(CLI::ExistingFile);
    prepare->add_option("--out", prep.out, "output data directory")->required();

    RunFlags train_flags;
    auto* train = app.add_subcommand("train", "train one model with early stopping");
    train_flags.attach(train, true);

    EvalArgs ev;
    auto* eval = app.add_subcommand("eval", "score a checkpoint on a split");
    eval->add_option("--checkpoint", ev.checkpoint)->required()->check(CLI::ExistingFile);
    eval->add_option("--data", ev.data)->required()->check(CLI::ExistingDirectory);
    eval->add_option("--split", ev.split, "train | dev | test");
    eval->add_option("--bin-width", ev.bin_width, "error-length bin width")->check(CLI::PositiveNumber);
    eval->add_option("--out", ev.out)->required();

    PredictArgs pr;
    auto* predict = app.add_subcommand("predict", "classify texts: label, AI probability, model kind");
    predict->add_option("--checkpoint", pr.checkpoint)->required()->check(CLI::ExistingFile);
    auto* text_opt = predict->add_option("--text", pr.text, "a single text");
    auto* file_opt = predict->add_option("--file", pr.file, "one text per line")->check(CLI::ExistingFile);
    text_opt->excludes(file_opt);

    RunFlags sweep_flags;
    std::string ranks;
    auto* sweep = app.add_subcommand("sweep", "LoRA rank sweep of the decoder");
    sweep_flags.attach(sweep, true);
    sweep->add_option("--ranks", ranks, "comma-separated ranks, e.g. 4,8,16");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        err << "aitd: usage error: " << msg << "\n";
        return kExitUsage;
    }

    try {
        if (prepare->parsed()) return cmd_prepare(prep, out);
        if (train->parsed()) return cmd_train(train_flags, out);
        if (eval->parsed()) return cmd_eval(ev, out);
        if (predict->parsed()) {
            if (text_opt->count() == 0 && file_opt->count() == 0) {
                throw UsageError("predict needs --text or --file");
            }
            return cmd_predict(pr, out);
        }
        if (sweep->parsed()) return cmd_sweep(sweep_flags, ranks, out);
    } catch (const UsageError& e) {
        err << "aitd: usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ConfigError& e) {
        err << "aitd: usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        err << "aitd: error: " << msg << "\n";
        return kExitError;
    }
    return kExitUsage;
}

} // namespace aitd::cli
