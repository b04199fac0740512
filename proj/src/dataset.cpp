#include "twocultures/dataset.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace twocultures::io {

namespace {

// One CSV record, honoring quoted fields; returns false at end of input.
bool read_record(std::istream& in, std::vector<std::string>& fields) {
    fields.clear();
    std::string field;
    bool quoted = false;
    bool any = false;
    int c;
    while ((c = in.get()) != EOF) {
        any = true;
        if (quoted) {
            if (c == '"') {
                if (in.peek() == '"') {
                    field.push_back('"');
                    in.get();
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(static_cast<char>(c));
            }
            continue;
        }
        if (c == '"' && field.empty()) {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(field);
            field.clear();
        } else if (c == '\n') {
            break;
        } else if (c == '\r') {
            if (in.peek() == '\n') in.get();
            break;
        } else {
            field.push_back(static_cast<char>(c));
        }
    }
    if (!any) return false;
    fields.push_back(field);
    return true;
}

std::string trimmed(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t");
    return s.substr(begin, end - begin + 1);
}

double parse_cell(const std::string& raw, Index row, const std::string& column) {
    const std::string cell = trimmed(raw);
    if (cell.empty()) {
        throw ValidationError("csv: empty cell at data row " + std::to_string(row) +
                              ", column '" + column + "'");
    }
    errno = 0;
    char* end = nullptr;
    const double value = std::strtod(cell.c_str(), &end);
    if (end != cell.c_str() + cell.size() || errno == ERANGE || !std::isfinite(value)) {
        throw ValidationError("csv: cell '" + cell + "' at data row " + std::to_string(row) +
                              ", column '" + column + "' is not a finite decimal number");
    }
    return value;
}

}  // namespace

TabularFile read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("csv: cannot open '" + path + "'");

    TabularFile table;
    table.path = path;

    std::vector<std::string> fields;
    if (!read_record(in, fields) || fields.empty()) {
        throw ValidationError("csv: '" + path + "' has no header row");
    }
    for (const std::string& name : fields) table.columns.push_back(trimmed(name));

    std::vector<double> cells;
    Index rows = 0;
    const Index width = static_cast<Index>(table.columns.size());
    while (read_record(in, fields)) {
        if (fields.size() == 1 && trimmed(fields[0]).empty()) continue;  // trailing blank line
        if (static_cast<Index>(fields.size()) != width) {
            throw ValidationError("csv: data row " + std::to_string(rows + 1) + " has " +
                                  std::to_string(fields.size()) + " fields, expected " +
                                  std::to_string(width));
        }
        for (Index j = 0; j < width; ++j) {
            cells.push_back(parse_cell(fields[static_cast<std::size_t>(j)], rows + 1,
                                       table.columns[static_cast<std::size_t>(j)]));
        }
        ++rows;
    }
    if (rows == 0) throw ValidationError("csv: '" + path + "' has no data rows");

    table.values = Matrix(rows, width);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < width; ++j)
            table.values(i, j) = cells[static_cast<std::size_t>(i * width + j)];
    return table;
}

Dataset split_columns(const TabularFile& table, const std::vector<std::string>& input_cols,
                      const std::vector<std::string>& output_cols) {
    const auto find = [&](const std::string& name) {
        const auto it = std::find(table.columns.begin(), table.columns.end(), name);
        if (it == table.columns.end()) {
            throw ValidationError("csv: column '" + name + "' not found in '" + table.path + "'");
        }
        return static_cast<Index>(it - table.columns.begin());
    };

    Dataset data;
    if (input_cols.empty() && output_cols.empty()) {
        if (table.columns.size() < 2) {
            throw ValidationError("csv: need at least two columns for a default input/output split");
        }
        data.input_names.assign(table.columns.begin(), table.columns.end() - 1);
        data.output_names = {table.columns.back()};
    } else if (input_cols.empty() || output_cols.empty()) {
        throw ValidationError("csv: specify both input and output columns, or neither");
    } else {
        data.input_names = input_cols;
        data.output_names = output_cols;
    }

    data.x = Matrix(table.values.rows(), static_cast<Index>(data.input_names.size()));
    for (std::size_t j = 0; j < data.input_names.size(); ++j)
        data.x.col(static_cast<Index>(j)) = table.values.col(find(data.input_names[j]));
    data.y = Matrix(table.values.rows(), static_cast<Index>(data.output_names.size()));
    for (std::size_t j = 0; j < data.output_names.size(); ++j)
        data.y.col(static_cast<Index>(j)) = table.values.col(find(data.output_names[j]));
    return data;
}

Dataset load_csv(const std::string& path, const std::vector<std::string>& input_cols,
                 const std::vector<std::string>& output_cols) {
    return split_columns(read_csv(path), input_cols, output_cols);
}

}  // namespace twocultures::io
