// Copyright 2026 The aitd Authors
// SPDX-License-Identifier: Apache-2.0

#include "aitd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "aitd/error.hpp"

namespace aitd::metrics {

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_short(double v, int digits) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&':
            out += "&amp;";
            break;
        case '<':
            out += "&lt;";
            break;
        case '>':
            out += "&gt;";
            break;
        case '"':
            out += "&quot;";
            break;
        default:
            out += c;
        }
    }
    return out;
}

void check_label(int value, const char* what) {
    if (value != 0 && value != 1) {
        throw Error(std::string("metrics: ") + what + " label " + std::to_string(value) + " is not 0 or 1");
    }
}

nlohmann::json scores_json(const ClassScores& s) {
    return {{"precision", s.precision},
            {"recall", s.recall},
            {"f1", s.f1},
            {"support", s.support},
            {"precision_undefined", s.precision_undefined},
            {"recall_undefined", s.recall_undefined},
            {"f1_undefined", s.f1_undefined}};
}

ClassScores scores_from(const nlohmann::json& j) {
    ClassScores s;
    s.precision = j.at("precision").get<double>();
    s.recall = j.at("recall").get<double>();
    s.f1 = j.at("f1").get<double>();
    s.support = j.at("support").get<std::size_t>();
    s.precision_undefined = j.at("precision_undefined").get<bool>();
    s.recall_undefined = j.at("recall_undefined").get<bool>();
    s.f1_undefined = j.at("f1_undefined").get<bool>();
    return s;
}

nlohmann::json averages_json(const Averages& a) {
    return {{"precision", a.precision}, {"recall", a.recall}, {"f1", a.f1}};
}

Averages averages_from(const nlohmann::json& j) {
    return Averages{j.at("precision").get<double>(), j.at("recall").get<double>(), j.at("f1").get<double>()};
}

} // namespace

double f1_score(double precision, double recall) {
    const double denom = precision + recall;
    return denom > 0.0 ? 2.0 * precision * recall / denom : 0.0;
}

ConfusionMatrix confusion_matrix(std::span<const int> preds, std::span<const int> golds) {
    if (preds.size() != golds.size()) {
        throw Error("metrics: " + std::to_string(preds.size()) + " predictions but " + std::to_string(golds.size()) +
                    " gold labels");
    }
    ConfusionMatrix m;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        check_label(preds[i], "predicted");
        check_label(golds[i], "gold");
        ++m.counts[golds[i]][preds[i]];
    }
    return m;
}

EvalReport report_from_confusion(const ConfusionMatrix& confusion) {
    EvalReport r;
    r.confusion = confusion;
    const std::size_t total = confusion.total();
    if (total == 0) {
        throw Error("metrics: empty evaluation set");
    }
    for (int c = 0; c < 2; ++c) {
        const std::size_t tp = confusion.counts[c][c];
        const std::size_t fp = confusion.counts[1 - c][c];
        const std::size_t fn = confusion.counts[c][1 - c];
        ClassScores& s = r.classes[c];
        s.support = tp + fn;
        s.precision_undefined = tp + fp == 0;
        s.recall_undefined = tp + fn == 0;
        s.precision = s.precision_undefined ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
        s.recall = s.recall_undefined ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
        s.f1_undefined = s.precision + s.recall == 0.0;
        s.f1 = f1_score(s.precision, s.recall);
    }
    r.accuracy = static_cast<double>(confusion.counts[0][0] + confusion.counts[1][1]) / static_cast<double>(total);
    r.macro = Averages{(r.classes[0].precision + r.classes[1].precision) / 2.0,
                       (r.classes[0].recall + r.classes[1].recall) / 2.0, (r.classes[0].f1 + r.classes[1].f1) / 2.0};
    const double w0 = static_cast<double>(r.classes[0].support) / static_cast<double>(total);
    const double w1 = static_cast<double>(r.classes[1].support) / static_cast<double>(total);
    r.weighted = Averages{w0 * r.classes[0].precision + w1 * r.classes[1].precision,
                          w0 * r.classes[0].recall + w1 * r.classes[1].recall,
                          w0 * r.classes[0].f1 + w1 * r.classes[1].f1};
    return r;
}

EvalReport compute_metrics(std::span<const int> preds, std::span<const int> golds) {
    if (preds.empty() && golds.empty()) {
        throw Error("metrics: empty evaluation set");
    }
    return report_from_confusion(confusion_matrix(preds, golds));
}

EvalReport compute_metrics(std::vector<ExampleRecord> records) {
    std::vector<int> preds, golds;
    preds.reserve(records.size());
    golds.reserve(records.size());
    for (const auto& r : records) {
        preds.push_back(r.pred);
        golds.push_back(r.gold);
    }
    EvalReport report = compute_metrics(preds, golds);
    report.examples = std::move(records);
    return report;
}

nlohmann::json EvalReport::to_json() const {
    nlohmann::json examples_json = nlohmann::json::array();
    for (const auto& e : examples) {
        examples_json.push_back(
            {{"id", e.id}, {"gold", e.gold}, {"pred", e.pred}, {"length", e.length}, {"p_ai", e.p_ai}});
    }
    return {{"classes", {{kClassNames[0], scores_json(classes[0])}, {kClassNames[1], scores_json(classes[1])}}},
            {"accuracy", accuracy},
            {"macro", averages_json(macro)},
            {"weighted", averages_json(weighted)},
            {"confusion", {{"rows", "gold"}, {"columns", "predicted"}, {"counts", confusion.counts}}},
            {"total", total()},
            {"examples", examples_json}};
}

EvalReport EvalReport::from_json(const nlohmann::json& doc) {
    try {
        EvalReport r;
        r.classes[0] = scores_from(doc.at("classes").at(kClassNames[0]));
        r.classes[1] = scores_from(doc.at("classes").at(kClassNames[1]));
        r.accuracy = doc.at("accuracy").get<double>();
        r.macro = averages_from(doc.at("macro"));
        r.weighted = averages_from(doc.at("weighted"));
        r.confusion.counts = doc.at("confusion").at("counts").get<std::array<std::array<std::size_t, 2>, 2>>();
        for (const auto& e : doc.at("examples")) {
            r.examples.push_back(ExampleRecord{e.at("id").get<std::string>(), e.at("gold").get<int>(),
                                               e.at("pred").get<int>(), e.at("length").get<std::size_t>(),
                                               e.at("p_ai").get<double>()});
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("report json: ") + e.what());
    }
}

double ErrorLengthHistogram::error_rate(std::size_t bin) const {
    return totals.at(bin) == 0 ? 0.0 : static_cast<double>(errors.at(bin)) / static_cast<double>(totals.at(bin));
}

nlohmann::json ErrorLengthHistogram::to_json() const {
    nlohmann::json bins = nlohmann::json::array();
    for (std::size_t i = 0; i < totals.size(); ++i) {
        bins.push_back({{"lower", i * bin_width},
                        {"upper", (i + 1) * bin_width},
                        {"errors", errors[i]},
                        {"total", totals[i]},
                        {"error_rate", error_rate(i)}});
    }
    return {{"bin_width", bin_width}, {"bins", bins}};
}

ErrorLengthHistogram error_length_histogram(const EvalReport& report, std::size_t bin_width) {
    if (bin_width == 0) {
        throw Error("error_length_histogram: bin width must be positive");
    }
    ErrorLengthHistogram h;
    h.bin_width = bin_width;
    std::size_t longest = 0;
    for (const auto& e : report.examples) {
        longest = std::max(longest, e.length);
    }
    const std::size_t bins = report.examples.empty() ? 0 : longest / bin_width + 1;
    h.errors.assign(bins, 0);
    h.totals.assign(bins, 0);
    for (const auto& e : report.examples) {
        const std::size_t b = e.length / bin_width;
        ++h.totals[b];
        if (e.gold != e.pred) {
            ++h.errors[b];
        }
    }
    return h;
}

std::string reports_to_csv(const std::vector<std::pair<std::string, EvalReport>>& groups) {
    std::ostringstream out;
    out << "group,row,precision,recall,f1,support\n";
    for (const auto& [group, r] : groups) {
        if (group.find_first_of(",\"\n") != std::string::npos) {
            throw Error("report group name may not contain commas, quotes or newlines: " + group);
        }
        for (int c = 0; c < 2; ++c) {
            const auto& s = r.classes[c];
            out << group << ',' << kClassNames[c] << ',' << fmt17(s.precision) << ',' << fmt17(s.recall) << ','
                << fmt17(s.f1) << ',' << s.support << '\n';
        }
        out << group << ",accuracy,,," << fmt17(r.accuracy) << ',' << r.total() << '\n';
        out << group << ",macro avg," << fmt17(r.macro.precision) << ',' << fmt17(r.macro.recall) << ','
            << fmt17(r.macro.f1) << ',' << r.total() << '\n';
        out << group << ",weighted avg," << fmt17(r.weighted.precision) << ',' << fmt17(r.weighted.recall) << ','
            << fmt17(r.weighted.f1) << ',' << r.total() << '\n';
    }
    return out.str();
}

std::vector<std::pair<std::string, EvalReport>> reports_from_csv(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line) || line != "group,row,precision,recall,f1,support") {
        throw FormatError("report csv: missing or unexpected header");
    }
    struct Group {
        std::map<std::string, std::vector<std::string>> rows;
        std::string raw;
    };
    std::vector<std::string> order;
    std::map<std::string, Group> groups;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) {
            fields.push_back(f);
        }
        if (line.back() == ',') {
            fields.emplace_back();
        }
        if (fields.size() != 6) {
            throw FormatError("report csv: line " + std::to_string(line_no) + ": expected 6 fields");
        }
        if (!groups.count(fields[0])) {
            order.push_back(fields[0]);
        }
        Group& g = groups[fields[0]];
        g.rows[fields[1]] = fields;
        g.raw += line + '\n';
    }
    const std::string header = "group,row,precision,recall,f1,support\n";
    std::vector<std::pair<std::string, EvalReport>> out;
    for (const auto& name : order) {
        const Group& g = groups[name];
        ConfusionMatrix m;
        for (int c = 0; c < 2; ++c) {
            auto it = g.rows.find(kClassNames[c]);
            if (it == g.rows.end()) {
                throw FormatError("report csv: group " + name + " lacks row " + kClassNames[c]);
            }
            const std::size_t support = std::stoull(it->second[5]);
            const double recall = std::stod(it->second[3]);
            const auto tp = static_cast<std::size_t>(std::llround(recall * static_cast<double>(support)));
            m.counts[c][c] = tp;
            m.counts[c][1 - c] = support - tp;
        }
        EvalReport r = report_from_confusion(m);
        // The rebuilt counts must reproduce every serialized value.
        if (header + g.raw != reports_to_csv({{name, r}})) {
            throw FormatError("report csv: group " + name + " is incomplete or internally inconsistent");
        }
        out.emplace_back(name, std::move(r));
    }
    return out;
}

std::string confusion_svg(const EvalReport& report, const std::string& title) {
    const int cell = 120, left = 110, top = 70;
    std::size_t peak = 1;
    for (const auto& row : report.confusion.counts) {
        for (std::size_t v : row) {
            peak = std::max(peak, v);
        }
    }
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << left + 2 * cell + 30 << "\" height=\""
      << top + 2 * cell + 60 << "\" font-family=\"sans-serif\" font-size=\"14\">\n";
    s << "<text x=\"10\" y=\"24\" font-size=\"16\">" << xml_escape(title) << "</text>\n";
    s << "<text x=\"" << left + cell << "\" y=\"" << top - 28 << "\" text-anchor=\"middle\">predicted</text>\n";
    s << "<text x=\"20\" y=\"" << top + cell << "\" transform=\"rotate(-90 20 " << top + cell
      << ")\" text-anchor=\"middle\">gold</text>\n";
    for (int g = 0; g < 2; ++g) {
        s << "<text x=\"" << left - 8 << "\" y=\"" << top + g * cell + cell / 2 + 5 << "\" text-anchor=\"end\">"
          << kClassNames[g] << "</text>\n";
        s << "<text x=\"" << left + g * cell + cell / 2 << "\" y=\"" << top - 8 << "\" text-anchor=\"middle\">"
          << kClassNames[g] << "</text>\n";
        for (int p = 0; p < 2; ++p) {
            const std::size_t v = report.confusion.counts[g][p];
            const int shade = 245 - static_cast<int>(185.0 * static_cast<double>(v) / static_cast<double>(peak));
            s << "<rect x=\"" << left + p * cell << "\" y=\"" << top + g * cell << "\" width=\"" << cell
              << "\" height=\"" << cell << "\" fill=\"rgb(" << shade << ',' << shade << ",255)\" stroke=\"#333\"/>\n";
            s << "<text x=\"" << left + p * cell + cell / 2 << "\" y=\"" << top + g * cell + cell / 2 + 5
              << "\" text-anchor=\"middle\">" << v << "</text>\n";
        }
    }
    s << "<text x=\"10\" y=\"" << top + 2 * cell + 35 << "\">accuracy " << fmt_short(report.accuracy, 4)
      << ", macro F1 " << fmt_short(report.macro.f1, 4) << "</text>\n";
    s << "</svg>\n";
    return s.str();
}

std::string histogram_svg(const ErrorLengthHistogram& histogram, const std::string& title) {
    const int left = 60, top = 40, height = 220, bar = 28;
    const std::size_t bins = histogram.totals.size();
    std::size_t peak = 1;
    for (std::size_t v : histogram.totals) {
        peak = std::max(peak, v);
    }
    const int width = static_cast<int>(std::max<std::size_t>(bins, 1)) * bar;
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << left + width + 40 << "\" height=\""
      << top + height + 70 << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    s << "<text x=\"10\" y=\"22\" font-size=\"15\">" << xml_escape(title) << "</text>\n";
    s << "<line x1=\"" << left << "\" y1=\"" << top + height << "\" x2=\"" << left + width << "\" y2=\""
      << top + height << "\" stroke=\"#333\"/>\n";
    s << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + height
      << "\" stroke=\"#333\"/>\n";
    s << "<text x=\"" << left - 6 << "\" y=\"" << top + 4 << "\" text-anchor=\"end\">" << peak << "</text>\n";
    for (std::size_t i = 0; i < bins; ++i) {
        const int x = left + static_cast<int>(i) * bar;
        const int th = static_cast<int>(height * static_cast<double>(histogram.totals[i]) / static_cast<double>(peak));
        const int eh = static_cast<int>(height * static_cast<double>(histogram.errors[i]) / static_cast<double>(peak));
        s << "<rect x=\"" << x + 2 << "\" y=\"" << top + height - th << "\" width=\"" << bar - 4 << "\" height=\""
          << th << "\" fill=\"#c8d4ea\"/>\n";
        s << "<rect x=\"" << x + 2 << "\" y=\"" << top + height - eh << "\" width=\"" << bar - 4 << "\" height=\""
          << eh << "\" fill=\"#d9534f\"/>\n";
        s << "<text x=\"" << x + bar / 2 << "\" y=\"" << top + height + 14 << "\" text-anchor=\"middle\">"
          << i * histogram.bin_width << "</text>\n";
    }
    s << "<text x=\"" << left << "\" y=\"" << top + height + 36 << "\">text length (characters, bin width "
      << histogram.bin_width << "); red = errors, blue = all examples</text>\n";
    s << "</svg>\n";
    return s.str();
}

} // namespace aitd::metrics
