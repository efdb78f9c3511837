#include "lintrain/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "lintrain/errors.hpp"

namespace lintrain::csv {

std::string format_float(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

namespace {

void validate(const std::vector<Row>& rows, const Schema& schema) {
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != schema.columns.size())
            throw Error("csv: row " + std::to_string(r) + " has " +
                        std::to_string(rows[r].size()) + " cells, schema expects " +
                        std::to_string(schema.columns.size()));
        for (std::size_t c = 0; c < schema.columns.size(); ++c) {
            const auto want = schema.columns[c].second;
            const bool ok = (want == ColType::Int && rows[r][c].index() == 0) ||
                            (want == ColType::Float && rows[r][c].index() == 1) ||
                            (want == ColType::Str && rows[r][c].index() == 2);
            if (!ok)
                throw Error("csv: row " + std::to_string(r) + " column '" +
                            schema.columns[c].first + "' has the wrong type");
        }
    }
}

} // namespace

void emit_csv(const std::vector<Row>& rows, const Schema& schema, const std::string& path) {
    validate(rows, schema); // nothing is written if any row is malformed

    std::ostringstream out;
    for (std::size_t c = 0; c < schema.columns.size(); ++c) {
        if (c) out << ',';
        out << schema.columns[c].first;
    }
    out << '\n';
    for (const Row& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out << ',';
            switch (row[c].index()) {
            case 0: out << std::get<std::int64_t>(row[c]); break;
            case 1: out << format_float(std::get<double>(row[c])); break;
            case 2: out << std::get<std::string>(row[c]); break;
            }
        }
        out << '\n';
    }

    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw IoError("csv: cannot open " + path + " for writing");
    const std::string text = out.str();
    file.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!file) throw IoError("csv: write failed: " + path);
}

std::vector<Row> parse_csv(const std::string& path, const Schema& schema) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw IoError("csv: cannot open " + path);
    std::string line;
    if (!std::getline(file, line)) throw DataError("csv: missing header in " + path);

    std::string want_header;
    for (std::size_t c = 0; c < schema.columns.size(); ++c) {
        if (c) want_header += ',';
        want_header += schema.columns[c].first;
    }
    if (line != want_header)
        throw DataError("csv: header mismatch in " + path + ": got '" + line + "'");

    std::vector<Row> rows;
    while (std::getline(file, line)) {
        if (line.empty()) continue;
        Row row;
        std::size_t start = 0;
        for (std::size_t c = 0; c < schema.columns.size(); ++c) {
            const bool last = c + 1 == schema.columns.size();
            const std::size_t comma = last ? line.size() : line.find(',', start);
            if (comma == std::string::npos)
                throw DataError("csv: short row in " + path);
            const std::string cell = line.substr(start, comma - start);
            start = comma + 1;
            switch (schema.columns[c].second) {
            case ColType::Int: {
                std::int64_t v = 0;
                const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
                if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
                    throw DataError("csv: bad integer '" + cell + "' in " + path);
                row.emplace_back(v);
                break;
            }
            case ColType::Float: {
                double v = 0.0;
                const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
                if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
                    throw DataError("csv: bad float '" + cell + "' in " + path);
                row.emplace_back(v);
                break;
            }
            case ColType::Str:
                row.emplace_back(cell);
                break;
            }
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace lintrain::csv
