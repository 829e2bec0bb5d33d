#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <iterator>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "textcnn/common.hpp"

namespace textcnn::text {

// Column names of the consumer-complaints export.
inline constexpr std::string_view kDefaultTextColumn = "Consumer complaint narrative";
inline constexpr std::string_view kDefaultLabelColumn = "Product";

/// Streaming RFC 4180 record reader. Quoted fields may span lines; "" inside
/// a quoted field is a literal quote. Both \n and \r\n terminate records.
class CsvReader {
public:
    explicit CsvReader(std::istream& in) : in_(in) {
        // Skip a UTF-8 byte-order mark.
        if (in_.peek() == 0xEF) {
            char bom[3];
            in_.read(bom, 3);
            if (!(static_cast<unsigned char>(bom[1]) == 0xBB &&
                  static_cast<unsigned char>(bom[2]) == 0xBF)) {
                in_.seekg(0);
            }
        }
    }

    struct Record {
        std::vector<std::string> fields;
        bool malformed = false;
        std::string problem;
    };

    /// Returns the next record, or nullopt at end of input.
    std::optional<Record> next() {
        if (in_.peek() == std::char_traits<char>::eof()) {
            return std::nullopt;
        }
        Record rec;
        std::string field;
        bool in_quotes = false;
        bool field_was_quoted = false;
        bool after_quote = false;  // closing quote seen, field must end now
        while (true) {
            const int ci = in_.get();
            if (ci == std::char_traits<char>::eof()) {
                if (in_quotes) {
                    rec.malformed = true;
                    rec.problem = "unterminated quoted field";
                }
                rec.fields.push_back(std::move(field));
                return rec;
            }
            const char c = static_cast<char>(ci);
            if (in_quotes) {
                if (c == '"') {
                    if (in_.peek() == '"') {
                        in_.get();
                        field.push_back('"');
                    } else {
                        in_quotes = false;
                        after_quote = true;
                    }
                } else {
                    field.push_back(c);
                }
                continue;
            }
            if (c == ',') {
                rec.fields.push_back(std::move(field));
                field.clear();
                field_was_quoted = false;
                after_quote = false;
                continue;
            }
            if (c == '\n' || c == '\r') {
                if (c == '\r' && in_.peek() == '\n') {
                    in_.get();
                }
                rec.fields.push_back(std::move(field));
                return rec;
            }
            if (c == '"') {
                if (field.empty() && !field_was_quoted) {
                    in_quotes = true;
                    field_was_quoted = true;
                    continue;
                }
                rec.malformed = true;
                rec.problem = "stray quote inside unquoted field";
                field.push_back(c);
                continue;
            }
            if (after_quote) {
                rec.malformed = true;
                rec.problem = "characters after closing quote";
            }
            field.push_back(c);
        }
    }

private:
    std::istream& in_;
};

struct LabeledText {
    std::string text;
    std::string label;

    bool operator==(const LabeledText&) const = default;
};

struct CsvIssue {
    std::size_t row = 0;  // 1-based data row (header excluded)
    std::string message;
};

struct CsvLoadResult {
    std::vector<LabeledText> rows;
    std::size_t raw_rows = 0;       // data records read, before any filtering
    std::size_t dropped_empty = 0;  // rows whose text was empty/whitespace
    std::vector<CsvIssue> issues;   // unparseable rows (skipped)
};

inline bool is_blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(),
                       [](unsigned char c) { return std::isspace(c) != 0; });
}

inline CsvLoadResult load_labeled_csv(std::istream& in, std::string_view text_column,
                                      std::string_view label_column) {
    CsvReader reader(in);
    auto header = reader.next();
    if (!header || header->malformed) {
        throw IoError("CSV has no readable header row");
    }
    const auto& names = header->fields;
    auto column_index = [&](std::string_view name) {
        auto it = std::find(names.begin(), names.end(), name);
        if (it == names.end()) {
            throw InvalidArgument("CSV header has no column named '" + std::string(name) + "'");
        }
        return static_cast<std::size_t>(it - names.begin());
    };
    const std::size_t text_idx = column_index(text_column);
    const std::size_t label_idx = column_index(label_column);

    CsvLoadResult result;
    while (auto rec = reader.next()) {
        // A bare trailing newline at EOF shows up as one empty field.
        if (rec->fields.size() == 1 && rec->fields[0].empty() && names.size() > 1) {
            continue;
        }
        ++result.raw_rows;
        if (rec->malformed) {
            result.issues.push_back({result.raw_rows, rec->problem});
            continue;
        }
        if (rec->fields.size() != names.size()) {
            result.issues.push_back(
                {result.raw_rows, "expected " + std::to_string(names.size()) + " fields, got " +
                                      std::to_string(rec->fields.size())});
            continue;
        }
        std::string& text = rec->fields[text_idx];
        if (is_blank(text)) {
            ++result.dropped_empty;
            continue;
        }
        result.rows.push_back({std::move(text), std::move(rec->fields[label_idx])});
    }
    return result;
}

inline CsvLoadResult load_labeled_csv(const std::string& path, std::string_view text_column,
                                      std::string_view label_column) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open CSV file '" + path + "'");
    }
    return load_labeled_csv(in, text_column, label_column);
}

/// Quotes a field when it contains a delimiter, quote or line break.
inline std::string csv_escape(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) {
        return std::string(field);
    }
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') {
            out += "\"\"";
        } else {
            out.push_back(c);
        }
    }
    out.push_back('"');
    return out;
}

}  // namespace textcnn::text
