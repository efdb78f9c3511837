#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace lintrain::csv {

enum class ColType { Int, Float, Str };

struct Schema {
    std::vector<std::pair<std::string, ColType>> columns;
};

using Value = std::variant<std::int64_t, double, std::string>;
using Row = std::vector<Value>;

/// Shortest round-trip decimal form of a double ('.' decimal, locale-free).
std::string format_float(double value);

/// Validates every row against the schema before anything is written, then
/// emits '\n'-terminated lines with full round-trip float precision.
void emit_csv(const std::vector<Row>& rows, const Schema& schema, const std::string& path);

/// Parses a file produced by emit_csv back into typed rows (header checked).
std::vector<Row> parse_csv(const std::string& path, const Schema& schema);

} // namespace lintrain::csv
