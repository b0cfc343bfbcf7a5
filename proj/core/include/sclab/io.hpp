#pragma once
#include <json.hpp>
#include <string>
#include <vector>

#include "sclab/model.hpp"

namespace sclab::io {

using json = nlohmann::json;

std::string sha256_hex(const std::string& bytes);

// Shortest round-trip decimal form; used for every CSV cell.
std::string fmt(double v);

json to_json(const GridSpec& g);
json to_json(const PerturbationSpec& p);
json to_json(const ModelParams& m);
GridSpec grid_from_json(const json& j);
PerturbationSpec perturbation_from_json(const json& j);
ModelParams model_from_json(const json& j);

std::string model_hash(const ModelParams& m);

// Write through a temporary file and rename, so readers never see partial files.
void write_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header);
    void row(const std::vector<std::string>& cells);
    void row(const std::vector<double>& cells);
    const std::string& str() const { return buf_; }
    std::size_t rows() const { return rows_; }

private:
    std::size_t cols_;
    std::size_t rows_ = 0;
    std::string buf_;
};

}  // namespace sclab::io
