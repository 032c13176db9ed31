// Copyright 2026 The aitd Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "aitd/checkpoint.hpp"
#include "aitd/cli.hpp"
#include "aitd/harness.hpp"
#include "aitd/metrics.hpp"
#include "aitd/synthetic.hpp"

using namespace aitd;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

void spit(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("aitd_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

const char* kTinyConfig = R"(# small models for tests
max_len = 64
batch_size = 4
max_steps = 6
eval_every = 3
encoder.layers = 1
encoder.dim = 16
encoder.heads = 2
encoder.ffn_dim = 32
decoder.layers = 1
decoder.dim = 16
decoder.query_heads = 2
decoder.kv_heads = 1
decoder.head_dim = 8
decoder.ffn_dim = 32
decoder.rank = 2
decoder.pooling = last
baseline.dim = 8
baseline.buckets = 256
baseline.epochs = 3
)";

/// Synthetic data directory plus a tiny config file.
fs::path prepared(const std::string& name) {
    const auto dir = scratch(name);
    REQUIRE(run({"prepare", "--synthetic", "--count", "100", "--seed", "5", "--out", (dir / "data").string()}).code ==
            0);
    spit(dir / "tiny.conf", kTinyConfig);
    return dir;
}

} // namespace

TEST_CASE("prepare: three split files plus vocab, train-only vocabulary, deterministic") {
    const auto dir = scratch("prepare");
    std::string corpus;
    corpus += R"({"id":"a","text":"春天来了","label":0,"split":"train"})" "\n";
    corpus += R"({"id":"b","text":"此外综上","label":1,"split":"train"})" "\n";
    corpus += R"({"id":"c","text":"鑫鑫","label":1,"split":"dev"})" "\n";
    corpus += R"({"id":"d","text":"春天","label":0,"split":"test"})" "\n";
    spit(dir / "corpus.jsonl", corpus);
    const auto r = run({"prepare", "--corpus", (dir / "corpus.jsonl").string(), "--out", (dir / "d1").string()});
    REQUIRE(r.code == 0);
    for (const char* f : {"train.jsonl", "dev.jsonl", "test.jsonl", "vocab.json", "manifest.json"}) {
        CHECK(fs::exists(dir / "d1" / f));
    }
    const auto vocab = text::Vocabulary::load(dir / "d1" / "vocab.json");
    CHECK_FALSE(vocab.find("鑫"));
    CHECK(vocab.find("春"));
    CHECK(text::tokenize_chars("鑫", vocab)[0] == text::Vocabulary::kUnk);
    REQUIRE(run({"prepare", "--corpus", (dir / "corpus.jsonl").string(), "--out", (dir / "d2").string()}).code == 0);
    CHECK(slurp(dir / "d1" / "vocab.json") == slurp(dir / "d2" / "vocab.json"));

    spit(dir / "nodev.jsonl", R"({"id":"a","text":"春天","label":0,"split":"train"})" "\n"
                              R"({"id":"b","text":"此外","label":1,"split":"test"})" "\n");
    const auto bad = run({"prepare", "--corpus", (dir / "nodev.jsonl").string(), "--out", (dir / "d3").string()});
    CHECK(bad.code != 0);
    CHECK(bad.err.find("dev") != std::string::npos);
    CHECK(std::count(bad.err.begin(), bad.err.end(), '\n') == 1);
}

TEST_CASE("train: every kind, artifacts, manifest materializes defaults, rerun is byte-identical") {
    const auto dir = prepared("train");
    for (const char* kind : {"encoder", "decoder", "baseline"}) {
        CAPTURE(kind);
        const auto out = dir / kind;
        const auto r = run({"train", "--data", (dir / "data").string(), "--config", (dir / "tiny.conf").string(),
                            "--model", kind, "--out", out.string()});
        REQUIRE(r.code == 0);
        for (const char* f : {"manifest.json", "model.ckpt", "history.csv", "dev_report.csv", "dev_report.json"}) {
            CHECK(fs::exists(out / f));
        }
        const auto m = nlohmann::json::parse(slurp(out / "manifest.json"));
        CHECK(m["command"] == "train");
        CHECK(m["format_version"] == cli::kManifestVersion);
        CHECK(m["config"]["model"] == kind);
        CHECK(m["config"].size() == config_schema().size());
        CHECK(m["seed"] == 13);

        const auto again = dir / (std::string(kind) + "_again");
        REQUIRE(run({"train", "--from-manifest", (out / "manifest.json").string(), "--out", again.string()}).code == 0);
        for (const char* f : {"model.ckpt", "history.csv", "dev_report.csv", "dev_report.json"}) {
            CHECK(slurp(out / f) == slurp(again / f));
        }
    }
    const auto seeded = dir / "seeded";
    REQUIRE(run({"train", "--data", (dir / "data").string(), "--config", (dir / "tiny.conf").string(), "--model",
                 "encoder", "--seed", "99", "--out", seeded.string()})
                .code == 0);
    CHECK(slurp(seeded / "model.ckpt") != slurp(dir / "encoder" / "model.ckpt"));
}

TEST_CASE("train: usage errors and the manifest is written before training") {
    const auto dir = prepared("train_errors");
    const auto data = (dir / "data").string();
    CHECK(run({"train", "--data", data, "--model", "svm", "--out", (dir / "x").string()}).code == cli::kExitUsage);
    spit(dir / "svm.conf", "model = svm\n");
    CHECK(run({"train", "--data", data, "--config", (dir / "svm.conf").string(), "--out", (dir / "y").string()}).code ==
          cli::kExitUsage);
    CHECK(run({"train", "--out", (dir / "z").string()}).code == cli::kExitUsage);
    CHECK(run({"bogus"}).code == cli::kExitUsage);

    spit(dir / "badpool.conf", std::string(kTinyConfig) + "decoder.pooling = middle\n");
    const auto r = run({"train", "--data", data, "--config", (dir / "badpool.conf").string(), "--model", "decoder",
                        "--out", (dir / "w").string()});
    CHECK(r.code != 0);
    CHECK(fs::exists(dir / "w" / "manifest.json"));
    CHECK_FALSE(fs::exists(dir / "w" / "model.ckpt"));
}

TEST_CASE("eval: report layout, per-example record count, vocabulary mismatch") {
    const auto dir = prepared("eval");
    const auto data = (dir / "data").string();
    REQUIRE(run({"train", "--data", data, "--config", (dir / "tiny.conf").string(), "--model", "decoder", "--out",
                 (dir / "m").string()})
                .code == 0);
    const auto ckpt = (dir / "m" / "model.ckpt").string();
    REQUIRE(run({"eval", "--checkpoint", ckpt, "--data", data, "--split", "test", "--out", (dir / "e").string()}).code ==
            0);
    const auto csv = slurp(dir / "e" / "report.csv");
    std::vector<std::string> rows;
    std::istringstream lines(csv);
    for (std::string l; std::getline(lines, l);) rows.push_back(l.substr(0, l.find(',', l.find(',') + 1)));
    CHECK(rows == std::vector<std::string>{"group,row", "report,human", "report,ai", "report,accuracy",
                                           "report,macro avg", "report,weighted avg"});
    const auto doc = nlohmann::json::parse(slurp(dir / "e" / "report.json"));
    const auto test = text::load_jsonl(dir / "data" / "test.jsonl");
    CHECK(doc["examples"].size() == test.size());
    CHECK(fs::exists(dir / "e" / "report_confusion.svg"));
    CHECK(fs::exists(dir / "e" / "report_error_length.svg"));
    CHECK(metrics::reports_from_csv(csv).at(0).second.total() == test.size());

    // Data prepared from a different corpus has a different vocabulary.
    spit(dir / "other.jsonl", R"({"id":"a","text":"鑫淼","label":0,"split":"train"})" "\n"
                              R"({"id":"b","text":"森焱","label":1,"split":"dev"})" "\n"
                              R"({"id":"c","text":"垚","label":1,"split":"test"})" "\n");
    REQUIRE(run({"prepare", "--corpus", (dir / "other.jsonl").string(), "--out", (dir / "other").string()}).code == 0);
    const auto mismatch =
        run({"eval", "--checkpoint", ckpt, "--data", (dir / "other").string(), "--out", (dir / "e2").string()});
    CHECK(mismatch.code != 0);
    const auto fp_ckpt = text::Vocabulary::load(dir / "data" / "vocab.json").fingerprint();
    const auto fp_data = text::Vocabulary::load(dir / "other" / "vocab.json").fingerprint();
    CHECK(mismatch.err.find(fp_ckpt) != std::string::npos);
    CHECK(mismatch.err.find(fp_data) != std::string::npos);
}

TEST_CASE("predict: one line per input, order preserved, consistent with re-scoring") {
    const auto dir = prepared("predict");
    REQUIRE(run({"train", "--data", (dir / "data").string(), "--config", (dir / "tiny.conf").string(), "--model",
                 "encoder", "--out", (dir / "m").string()})
                .code == 0);
    const auto ckpt = (dir / "m" / "model.ckpt").string();
    const auto single = run({"predict", "--checkpoint", ckpt, "--text", "此外综上所述今天天气"});
    REQUIRE(single.code == 0);
    CHECK(std::count(single.out.begin(), single.out.end(), '\n') == 1);
    CHECK(single.out.find("\tencoder\n") != std::string::npos);

    const auto texts = text::load_jsonl(dir / "data" / "dev.jsonl");
    std::string file;
    for (const auto& ex : texts) file += ex.text + "\n";
    spit(dir / "in.txt", file);
    const auto many = run({"predict", "--checkpoint", ckpt, "--file", (dir / "in.txt").string()});
    REQUIRE(many.code == 0);
    const auto model = harness::load_classifier(read_checkpoint(ckpt));
    std::istringstream lines(many.out);
    std::size_t i = 0;
    for (std::string l; std::getline(lines, l); ++i) {
        REQUIRE(i < texts.size());
        int label = -1;
        double p = -1.0;
        char kind[32] = {};
        REQUIRE(std::sscanf(l.c_str(), "%d\t%lf\t%31s", &label, &p, kind) == 3);
        CHECK(std::string(kind) == "encoder");
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
        const auto again = model->predict(texts[i].text);
        CHECK(label == again.label);
        CHECK(p == doctest::Approx(again.p_ai).epsilon(1e-5));
    }
    CHECK(i == texts.size());

    CHECK(run({"predict", "--checkpoint", ckpt, "--text", ""}).code != 0);
    spit(dir / "empty.txt", "");
    CHECK(run({"predict", "--checkpoint", ckpt, "--file", (dir / "empty.txt").string()}).code != 0);
    CHECK(run({"predict", "--checkpoint", ckpt}).code == cli::kExitUsage);
}

TEST_CASE("sweep: one group per rank, csv round trip, decoder only") {
    const auto dir = prepared("sweep");
    const auto data = (dir / "data").string();
    const auto conf = (dir / "tiny.conf").string();
    const auto r = run({"sweep", "--data", data, "--config", conf, "--model", "decoder", "--ranks", "2,4,8", "--out",
                        (dir / "s").string()});
    REQUIRE(r.code == 0);
    const auto csv = slurp(dir / "s" / "sweep.csv");
    const auto groups = metrics::reports_from_csv(csv);
    REQUIRE(groups.size() == 3);
    CHECK(groups[0].first == "r2");
    CHECK(groups[2].first == "r8");
    CHECK(metrics::reports_to_csv(groups) == csv);

    REQUIRE(run({"sweep", "--data", data, "--config", conf, "--model", "decoder", "--ranks", "4", "--out",
                 (dir / "one").string()})
                .code == 0);
    CHECK(metrics::reports_from_csv(slurp(dir / "one" / "sweep.csv")).size() == 1);
    // Same seed and rank inside a sweep and alone give the same report.
    CHECK(metrics::reports_from_csv(slurp(dir / "one" / "sweep.csv"))[0].second == groups[1].second);

    CHECK(run({"sweep", "--data", data, "--config", conf, "--model", "baseline", "--out", (dir / "b").string()}).code ==
          cli::kExitUsage);
}
