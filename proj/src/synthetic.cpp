// Copyright 2026 The aitd Authors
// SPDX-License-Identifier: Apache-2.0

#include "aitd/synthetic.hpp"

#include <array>
#include <cstdio>

#include "aitd/error.hpp"
#include "aitd/rng.hpp"

namespace aitd::synthetic {

namespace {

constexpr std::array<std::string_view, 16> kAiMarkers{
    "此外", "综上所述", "总而言之", "值得注意的是", "首先", "其次", "显著", "全面",
    "进一步", "因此", "具有", "提升", "有效地", "与此同时", "方面", "至关重要"};

constexpr std::array<std::string_view, 16> kHumanMarkers{
    "哈哈", "我觉得", "其实", "反正", "好像", "挺好", "真的", "吧",
    "啊", "嘛", "超级", "随便", "懒得", "咱们", "估计", "那个"};

constexpr std::array<std::string_view, 40> kShared{
    "今天", "我们", "公园", "学习", "工作", "城市", "时间", "朋友", "问题", "生活",
    "天气", "学校", "老师", "同学", "手机", "电脑", "音乐", "电影", "周末", "晚上",
    "早上", "吃饭", "米饭", "面条", "地铁", "公司", "家人", "孩子", "小狗", "春天",
    "夏天", "秋天", "冬天", "经济", "技术", "文化", "历史", "发展", "社会", "环境"};

} // namespace

std::span<const std::string_view> ai_markers() { return kAiMarkers; }
std::span<const std::string_view> human_markers() { return kHumanMarkers; }
std::span<const std::string_view> shared_words() { return kShared; }

SyntheticCorpus generate(const SyntheticSpec& spec) {
    if (spec.count == 0 || spec.min_words == 0 || spec.max_words < spec.min_words) {
        throw ConfigError("synthetic: count and word range must be positive and ordered");
    }
    if (spec.train_fraction <= 0.0 || spec.dev_fraction <= 0.0 || spec.train_fraction + spec.dev_fraction > 1.0) {
        throw ConfigError("synthetic: split fractions must be positive and sum to at most 1");
    }
    if (spec.own_marker_rate < 0.0 || spec.other_marker_rate < 0.0 ||
        spec.own_marker_rate + spec.other_marker_rate > 1.0) {
        throw ConfigError("synthetic: marker rates must be non-negative and sum to at most 1");
    }
    Rng rng(derive_seed(spec.seed, "synthetic/text"));
    SyntheticCorpus out;
    for (auto list : {ai_markers(), human_markers(), shared_words()}) {
        for (auto w : list) {
            out.lexicon.add(w);
        }
    }
    out.examples.reserve(spec.count);
    for (std::size_t i = 0; i < spec.count; ++i) {
        const bool ai = i % 2 == 1;
        const auto own = ai ? ai_markers() : human_markers();
        const auto other = ai ? human_markers() : ai_markers();
        const std::size_t n = spec.min_words + rng.below(spec.max_words - spec.min_words + 1);
        std::string textv;
        for (std::size_t w = 0; w < n; ++w) {
            const double u = rng.uniform();
            if (u < spec.own_marker_rate) {
                textv += own[rng.below(own.size())];
            } else if (u < spec.own_marker_rate + spec.other_marker_rate) {
                textv += other[rng.below(other.size())];
            } else {
                textv += kShared[rng.below(kShared.size())];
            }
        }
        text::LabeledExample ex;
        ex.text = std::move(textv);
        ex.label = ai ? text::Label::kAi : text::Label::kHuman;
        out.examples.push_back(std::move(ex));
    }
    Rng order(derive_seed(spec.seed, "synthetic/split"));
    order.shuffle(std::span(out.examples));
    const auto n_train = static_cast<std::size_t>(static_cast<double>(spec.count) * spec.train_fraction);
    const auto n_dev = static_cast<std::size_t>(static_cast<double>(spec.count) * spec.dev_fraction);
    for (std::size_t i = 0; i < out.examples.size(); ++i) {
        auto& ex = out.examples[i];
        ex.split = i < n_train ? text::Split::kTrain : (i < n_train + n_dev ? text::Split::kDev : text::Split::kTest);
        char id[32];
        std::snprintf(id, sizeof id, "syn-%05zu", i);
        ex.id = id;
    }
    return out;
}

} // namespace aitd::synthetic
