#pragma once

#include "twocultures/matrix.hpp"

#include <string>
#include <vector>

namespace twocultures::io {

struct TabularFile {
    std::string path;
    std::vector<std::string> columns;
    Matrix values;  // rows x columns, all finite
};

struct Dataset {
    Matrix x;
    Matrix y;
    std::vector<std::string> input_names;
    std::vector<std::string> output_names;
};

// RFC-4180-style CSV with a header row; every cell must parse as a finite
// decimal number. Parse failures report the row and column.
TabularFile read_csv(const std::string& path);

// Splits a table into input/output blocks by column name. Empty selections
// default to all-but-last as inputs and the last column as output.
Dataset split_columns(const TabularFile& table, const std::vector<std::string>& input_cols,
                      const std::vector<std::string>& output_cols);

Dataset load_csv(const std::string& path, const std::vector<std::string>& input_cols,
                 const std::vector<std::string>& output_cols);

}  // namespace twocultures::io
