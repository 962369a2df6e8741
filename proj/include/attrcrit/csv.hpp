#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "attrcrit/errors.hpp"

namespace attrcrit {

/// Shortest text that round-trips the double exactly; deterministic for a
/// given binary, which the byte-identical-output contract depends on.
inline std::string formatDouble(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// CSV files carry a versioned comment line first:
///   # attrcrit <kind> v<version>
/// followed by the column header, then data rows. Parsers reject unknown
/// versions and kinds.
inline std::string csvVersionLine(const std::string& kind, int version) {
    return "# attrcrit " + kind + " v" + std::to_string(version);
}

inline void checkCsvVersionLine(const std::string& line, const std::string& kind, int version) {
    if (line != csvVersionLine(kind, version)) {
        throw VersionError("csv: expected '" + csvVersionLine(kind, version) + "', got '" + line +
                           "'");
    }
}

inline std::vector<std::string> splitCsvLine(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    std::size_t columnIndex(const std::string& name) const {
        for (std::size_t i = 0; i < columns.size(); ++i) {
            if (columns[i] == name) return i;
        }
        throw FormatError("csv: missing column '" + name + "'");
    }
};

inline CsvTable readCsv(const std::filesystem::path& path, const std::string& kind, int version) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open csv " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw FormatError("csv: empty file " + path.string());
    checkCsvVersionLine(line, kind, version);

    CsvTable table;
    // header comment lines (counters etc.) may precede the column header
    while (std::getline(in, line)) {
        if (line.rfind("# ", 0) == 0) continue;
        table.columns = splitCsvLine(line);
        break;
    }
    if (table.columns.empty()) throw FormatError("csv: missing column header");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto fields = splitCsvLine(line);
        if (fields.size() != table.columns.size()) {
            throw FormatError("csv: row width mismatch in " + path.string());
        }
        table.rows.push_back(std::move(fields));
    }
    return table;
}

} // namespace attrcrit
