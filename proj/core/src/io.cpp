#include "sclab/io.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sclab/error.hpp"

namespace sclab::io {

std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 15]);
    }
    return out;
}

std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

json to_json(const GridSpec& g) {
    return json{{"kind", grid_kind_name(g.kind)},
                {"N", g.N},
                {"points_per_wavelength", g.points_per_wavelength},
                {"knee", g.knee},
                {"sigma", g.sigma}};
}

json to_json(const PerturbationSpec& p) { return json{{"beta", p.beta}, {"a_pot", p.a_pot}, {"a_met", p.a_met}}; }

json to_json(const ModelParams& m) {
    return json{{"alpha", m.alpha},       {"d", m.d},
                {"h", m.h},               {"L", m.L},
                {"r_inner", m.r_inner},   {"eta", m.eta},
                {"grid", to_json(m.grid)}, {"potential", potential_name(m.potential)},
                {"perturbation", to_json(m.pert)}, {"v_shift", m.v_shift}};
}

GridSpec grid_from_json(const json& j) {
    GridSpec g;
    g.kind = grid_kind_from_name(j.value("kind", std::string("log-uniform")));
    g.N = j.value("N", std::size_t(0));
    g.points_per_wavelength = j.value("points_per_wavelength", 16.0);
    g.knee = j.value("knee", 0.0);
    g.sigma = j.value("sigma", -1.0);
    return g;
}

PerturbationSpec perturbation_from_json(const json& j) {
    PerturbationSpec p;
    p.beta = j.value("beta", 1.0);
    p.a_pot = j.value("a_pot", 0.0);
    p.a_met = j.value("a_met", 0.0);
    return p;
}

ModelParams model_from_json(const json& j) {
    ModelParams m;
    m.alpha = j.value("alpha", m.alpha);
    m.d = j.value("d", m.d);
    m.h = j.value("h", m.h);
    m.L = j.value("L", m.L);
    m.r_inner = j.value("r_inner", m.r_inner);
    m.eta = j.value("eta", m.eta);
    if (j.contains("grid")) m.grid = grid_from_json(j.at("grid"));
    m.potential = potential_from_name(j.value("potential", std::string("reference")));
    if (j.contains("perturbation")) m.pert = perturbation_from_json(j.at("perturbation"));
    m.v_shift = j.value("v_shift", 0.0);
    return m;
}

std::string model_hash(const ModelParams& m) { return sha256_hex(to_json(m).dump()); }

void write_atomic(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    const fs::path tmp = p.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        require(bool(f), ErrorCode::Io, "cannot write " + tmp.string());
        f << content;
        require(bool(f), ErrorCode::Io, "short write to " + tmp.string());
    }
    fs::rename(tmp, p);
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    require(bool(f), ErrorCode::Io, "cannot read " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

CsvWriter::CsvWriter(std::vector<std::string> header) : cols_(header.size()) { row(header); rows_ = 0; }

void CsvWriter::row(const std::vector<std::string>& cells) {
    require(cells.size() == cols_, ErrorCode::Io, "csv row width mismatch");
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) buf_.push_back(',');
        buf_ += cells[i];
    }
    buf_.push_back('\n');
    ++rows_;
}

void CsvWriter::row(const std::vector<double>& cells) {
    std::vector<std::string> s;
    s.reserve(cells.size());
    for (double v : cells) s.push_back(fmt(v));
    row(s);
}

}  // namespace sclab::io
