#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "textcnn/common.hpp"

namespace textcnn::metrics {

/// C x C counts; rows are actual classes, columns predicted classes.
class ConfusionMatrix {
public:
    ConfusionMatrix() = default;
    explicit ConfusionMatrix(std::size_t classes, std::vector<std::string> labels = {})
        : classes_(classes), counts_(classes * classes, 0), labels_(std::move(labels)) {
        if (labels_.empty()) {
            for (std::size_t i = 0; i < classes; ++i) {
                labels_.push_back(std::to_string(i + 1));
            }
        }
        if (labels_.size() != classes) {
            throw InvalidArgument("confusion matrix needs one label per class");
        }
    }

    std::size_t classes() const { return classes_; }
    const std::vector<std::string>& labels() const { return labels_; }

    std::uint64_t at(std::size_t actual, std::size_t predicted) const {
        return counts_[actual * classes_ + predicted];
    }

    void add(std::size_t actual, std::size_t predicted, std::uint64_t n = 1) {
        if (actual >= classes_ || predicted >= classes_) {
            throw InvalidArgument("class id out of range for a " + std::to_string(classes_) +
                                  "-class confusion matrix");
        }
        counts_[actual * classes_ + predicted] += n;
    }

    std::uint64_t total() const {
        std::uint64_t t = 0;
        for (auto c : counts_) t += c;
        return t;
    }

    std::uint64_t trace() const {
        std::uint64_t t = 0;
        for (std::size_t i = 0; i < classes_; ++i) t += at(i, i);
        return t;
    }

    std::uint64_t row_sum(std::size_t actual) const {
        std::uint64_t t = 0;
        for (std::size_t p = 0; p < classes_; ++p) t += at(actual, p);
        return t;
    }

    std::uint64_t column_sum(std::size_t predicted) const {
        std::uint64_t t = 0;
        for (std::size_t a = 0; a < classes_; ++a) t += at(a, predicted);
        return t;
    }

    bool operator==(const ConfusionMatrix&) const = default;

private:
    std::size_t classes_ = 0;
    std::vector<std::uint64_t> counts_;
    std::vector<std::string> labels_;
};

inline ConfusionMatrix confusion_from_predictions(
    const std::vector<std::pair<std::size_t, std::size_t>>& actual_predicted, std::size_t classes,
    std::vector<std::string> labels = {}) {
    ConfusionMatrix cm(classes, std::move(labels));
    for (const auto& [a, p] : actual_predicted) {
        cm.add(a, p);
    }
    return cm;
}

struct ClassMetrics {
    double precision = 0;  // percent
    double recall = 0;
    double f1 = 0;
    std::uint64_t support = 0;
};

/// All metrics are percentages in [0, 100], kept unrounded.
struct EvalReport {
    double accuracy = 0;
    double macro_precision = 0;
    double macro_recall = 0;
    double macro_f1 = 0;
    std::vector<ClassMetrics> per_class;
    ConfusionMatrix confusion;
};

inline double safe_ratio(double num, double den) { return den == 0 ? 0.0 : num / den; }

/// Per-class precision/recall/F1 with 0/0 taken as 0, macro-averaged without
/// weights over all C classes. Macro F1 is the mean of per-class F1 values.
inline EvalReport metrics_from_confusion(const ConfusionMatrix& cm) {
    const std::uint64_t total = cm.total();
    if (total == 0) {
        throw InvalidArgument("cannot compute metrics from an empty confusion matrix");
    }
    EvalReport r;
    r.confusion = cm;
    r.accuracy = 100.0 * static_cast<double>(cm.trace()) / static_cast<double>(total);
    const std::size_t C = cm.classes();
    double sp = 0, sr = 0, sf = 0;
    for (std::size_t c = 0; c < C; ++c) {
        const double tp = static_cast<double>(cm.at(c, c));
        const double p = safe_ratio(tp, static_cast<double>(cm.column_sum(c)));
        const double rc = safe_ratio(tp, static_cast<double>(cm.row_sum(c)));
        const double f = safe_ratio(2 * p * rc, p + rc);
        r.per_class.push_back({100 * p, 100 * rc, 100 * f, cm.row_sum(c)});
        sp += p;
        sr += rc;
        sf += f;
    }
    r.macro_precision = 100 * sp / static_cast<double>(C);
    r.macro_recall = 100 * sr / static_cast<double>(C);
    r.macro_f1 = 100 * sf / static_cast<double>(C);
    return r;
}

/// Two decimals, half away from zero.
inline double round_percent(double x) {
    return std::round(x * 100.0) / 100.0;
}

inline std::string format_percent(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", round_percent(x));
    return buf;
}

inline nlohmann::json report_to_json(const EvalReport& r) {
    nlohmann::json j;
    j["accuracy"] = round_percent(r.accuracy);
    j["macro_precision"] = round_percent(r.macro_precision);
    j["macro_recall"] = round_percent(r.macro_recall);
    j["macro_f1"] = round_percent(r.macro_f1);
    nlohmann::json per = nlohmann::json::array();
    for (std::size_t c = 0; c < r.per_class.size(); ++c) {
        const auto& m = r.per_class[c];
        per.push_back({{"label", r.confusion.labels()[c]},
                       {"precision", round_percent(m.precision)},
                       {"recall", round_percent(m.recall)},
                       {"f1", round_percent(m.f1)},
                       {"support", m.support}});
    }
    j["per_class"] = per;
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t a = 0; a < r.confusion.classes(); ++a) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t p = 0; p < r.confusion.classes(); ++p) {
            row.push_back(r.confusion.at(a, p));
        }
        rows.push_back(row);
    }
    j["confusion"] = rows;
    j["labels"] = r.confusion.labels();
    return j;
}

/// Human-readable summary, per-class table and confusion matrix.
inline std::string format_report(const EvalReport& r) {
    std::ostringstream out;
    out << "accuracy " << format_percent(r.accuracy) << "  precision " << format_percent(r.macro_precision)
        << "  recall " << format_percent(r.macro_recall) << "  f1 " << format_percent(r.macro_f1) << "\n\n";
    std::size_t width = 5;
    for (const auto& l : r.confusion.labels()) width = std::max(width, l.size());
    out << std::left << std::setw(static_cast<int>(width)) << "class" << std::right << std::setw(11)
        << "precision" << std::setw(9) << "recall" << std::setw(9) << "f1" << std::setw(9) << "support\n";
    for (std::size_t c = 0; c < r.per_class.size(); ++c) {
        const auto& m = r.per_class[c];
        out << std::left << std::setw(static_cast<int>(width)) << r.confusion.labels()[c] << std::right
            << std::setw(11) << format_percent(m.precision) << std::setw(9) << format_percent(m.recall)
            << std::setw(9) << format_percent(m.f1) << std::setw(9) << m.support << "\n";
    }
    out << "\nconfusion (rows actual, columns predicted)\n";
    for (std::size_t a = 0; a < r.confusion.classes(); ++a) {
        for (std::size_t p = 0; p < r.confusion.classes(); ++p) {
            out << std::setw(6) << r.confusion.at(a, p);
        }
        out << "\n";
    }
    return out.str();
}

/// Square matrix of nonnegative integers, one row per line, comma separated.
/// Lines starting with '#' are comments.
inline ConfusionMatrix load_confusion_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open confusion matrix file '" + path + "'");
    }
    std::vector<std::vector<std::uint64_t>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::uint64_t> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(std::stoull(cell));
            } catch (const std::exception&) {
                throw IoError("bad confusion matrix cell '" + cell + "' in '" + path + "'");
            }
        }
        rows.push_back(std::move(row));
    }
    ConfusionMatrix cm(rows.size());
    for (std::size_t a = 0; a < rows.size(); ++a) {
        if (rows[a].size() != rows.size()) {
            throw IoError("confusion matrix in '" + path + "' is not square");
        }
        for (std::size_t p = 0; p < rows.size(); ++p) {
            cm.add(a, p, rows[a][p]);
        }
    }
    return cm;
}

}  // namespace textcnn::metrics
