#pragma once

#include "mmmi/dataset.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mmmi {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

CsvTable parse_csv(std::istream& in);
CsvTable read_csv(const std::filesystem::path& path);
void write_csv(std::ostream& out, const CsvTable& table);

/// Column roles for a dataset CSV. Missing cells are empty strings.
struct DatasetSchema {
    // Empty: the first CSV column.
    std::string subject_id;
    std::optional<std::string> group;
    // Empty: every column named y_t{k}, with time code k.
    std::vector<std::string> outcomes;
    std::map<std::string, double> time_codes;
    std::map<std::string, ColumnType> types;
};

struct LoadedDataset {
    LongitudinalDataset data;
    // Original cell text, kept so observed cells can be written back byte-for-byte.
    CsvTable raw;
};

LoadedDataset dataset_from_csv(const CsvTable& table, const DatasetSchema& schema);
LoadedDataset read_dataset_csv(const std::filesystem::path& path, const DatasetSchema& schema);

/// Writes `d` as CSV. Cells observed in `d` that were non-empty in `raw` are
/// copied verbatim; all other values use shortest round-trip formatting.
void write_dataset_csv(std::ostream& out, const LongitudinalDataset& d, const CsvTable* raw = nullptr);
void write_dataset_csv(const std::filesystem::path& path, const LongitudinalDataset& d, const CsvTable* raw = nullptr);

}  // namespace mmmi
