#include "mmmi/csv_io.hpp"

#include "mmmi/errors.hpp"
#include "mmmi/numfmt.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <regex>

namespace mmmi {

namespace {

std::vector<std::string> split_record(const std::string& line, std::size_t line_no) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (quoted) throw DataError("csv line " + std::to_string(line_no) + ": unterminated quote");
    fields.push_back(std::move(cur));
    return fields;
}

std::string quote_if_needed(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

double parse_number(const std::string& s, const std::string& column, std::size_t row) {
    double v = 0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (!s.empty() && *first == '+') ++first;
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last || !std::isfinite(v))
        throw DataError("column '" + column + "' row " + std::to_string(row + 1) + ": '" + s + "' is not a number");
    return v;
}

}  // namespace

CsvTable parse_csv(std::istream& in) {
    CsvTable t;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_record(line, line_no);
        if (t.header.empty()) {
            t.header = std::move(fields);
            continue;
        }
        if (fields.size() != t.header.size())
            throw DataError("csv line " + std::to_string(line_no) + ": expected " + std::to_string(t.header.size()) +
                            " fields, found " + std::to_string(fields.size()));
        t.rows.push_back(std::move(fields));
    }
    if (t.header.empty()) throw DataError("csv: no header row");
    return t;
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    return parse_csv(in);
}

void write_csv(std::ostream& out, const CsvTable& table) {
    auto write_row = [&](const std::vector<std::string>& row) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << quote_if_needed(row[i]);
        out << '\n';
    };
    write_row(table.header);
    for (const auto& r : table.rows) write_row(r);
}

LoadedDataset dataset_from_csv(const CsvTable& table, const DatasetSchema& schema) {
    const auto ncol = table.header.size();
    const std::string id_name = schema.subject_id.empty() ? table.header.front() : schema.subject_id;

    auto has_column = [&](const std::string& n) {
        return std::find(table.header.begin(), table.header.end(), n) != table.header.end();
    };
    if (!has_column(id_name)) throw ConfigError("schema: subject_id column '" + id_name + "' not in CSV header");
    if (schema.group && !has_column(*schema.group))
        throw ConfigError("schema: group column '" + *schema.group + "' not in CSV header");
    for (const auto& o : schema.outcomes)
        if (!has_column(o)) throw ConfigError("schema: outcome column '" + o + "' not in CSV header");

    static const std::regex outcome_re(R"(y_t(\d+))");
    std::vector<ColumnInfo> cols(ncol);
    for (std::size_t c = 0; c < ncol; ++c) {
        const auto& name = table.header[c];
        ColumnInfo info{name, ColumnRole::covariate, ColumnType::continuous, 0.0};
        std::smatch match;
        if (name == id_name) {
            info.role = ColumnRole::subject_id;
            info.type = ColumnType::nominal;
        } else if (schema.group && name == *schema.group) {
            info.role = ColumnRole::group;
            info.type = ColumnType::nominal;
        } else if (!schema.outcomes.empty()) {
            if (std::find(schema.outcomes.begin(), schema.outcomes.end(), name) != schema.outcomes.end()) {
                info.role = ColumnRole::outcome;
                if (auto it = schema.time_codes.find(name); it != schema.time_codes.end()) info.time = it->second;
                else if (std::regex_match(name, match, outcome_re)) info.time = std::stod(match[1].str());
                else throw ConfigError("schema: outcome column '" + name + "' needs a time code");
            }
        } else if (std::regex_match(name, match, outcome_re)) {
            info.role = ColumnRole::outcome;
            auto it = schema.time_codes.find(name);
            info.time = it != schema.time_codes.end() ? it->second : std::stod(match[1].str());
        }
        if (auto it = schema.types.find(name); it != schema.types.end()) info.type = it->second;
        cols[c] = info;
    }

    const auto n = static_cast<Eigen::Index>(table.rows.size());
    Eigen::MatrixXd values(n, static_cast<Eigen::Index>(ncol));
    MissingMask mask = MissingMask::Constant(n, static_cast<Eigen::Index>(ncol), false);
    for (Eigen::Index r = 0; r < n; ++r) {
        const auto& row = table.rows[static_cast<std::size_t>(r)];
        for (std::size_t c = 0; c < ncol; ++c) {
            const auto cc = static_cast<Eigen::Index>(c);
            if (row[c].empty()) {
                mask(r, cc) = true;
                values(r, cc) = kMissing;
            } else {
                values(r, cc) = parse_number(row[c], table.header[c], static_cast<std::size_t>(r));
            }
        }
    }
    return {LongitudinalDataset(std::move(cols), std::move(values), std::move(mask)), table};
}

LoadedDataset read_dataset_csv(const std::filesystem::path& path, const DatasetSchema& schema) {
    return dataset_from_csv(read_csv(path), schema);
}

void write_dataset_csv(std::ostream& out, const LongitudinalDataset& d, const CsvTable* raw) {
    CsvTable t;
    for (const auto& c : d.columns()) t.header.push_back(c.name);
    t.rows.resize(static_cast<std::size_t>(d.rows()));
    for (Eigen::Index r = 0; r < d.rows(); ++r) {
        auto& row = t.rows[static_cast<std::size_t>(r)];
        row.resize(static_cast<std::size_t>(d.cols()));
        for (Eigen::Index c = 0; c < d.cols(); ++c) {
            auto& cell = row[static_cast<std::size_t>(c)];
            if (d.is_missing(r, c)) continue;
            const std::string* original =
                raw ? &raw->rows.at(static_cast<std::size_t>(r)).at(static_cast<std::size_t>(c)) : nullptr;
            cell = (original && !original->empty()) ? *original : format_shortest(d.value(r, c));
        }
    }
    write_csv(out, t);
}

void write_dataset_csv(const std::filesystem::path& path, const LongitudinalDataset& d, const CsvTable* raw) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    write_dataset_csv(out, d, raw);
}

}  // namespace mmmi
