#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "mbot/common.hpp"

namespace mbot {

// Fixed shortest-round-trip formatting so identical runs write identical bytes.
inline std::string fmt_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}
inline std::string fmt_num(std::uint64_t v) { return std::to_string(v); }
inline std::string fmt_num(std::int64_t v) { return std::to_string(v); }

class CsvWriter {
  public:
    explicit CsvWriter(const std::string& path) : file_(path, std::ios::binary), os_(&file_) {
        if (!file_) throw IOError("cannot open for writing: " + path);
    }
    explicit CsvWriter(std::ostream& os) : os_(&os) {}
    // os_ may point at file_, so the object must stay put
    CsvWriter(const CsvWriter&) = delete;
    CsvWriter& operator=(const CsvWriter&) = delete;
    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) *os_ << ',';
            *os_ << cells[i];
        }
        *os_ << '\n';
    }
    void close() {
        os_->flush();
        if (os_->fail()) throw IOError("csv write failed");
        if (file_.is_open()) file_.close();
    }

  private:
    std::ofstream file_;
    std::ostream* os_;
};

namespace detail {

inline double parse_double(const std::string& cell, const std::string& path) {
    std::size_t b = cell.find_first_not_of(" \t");
    std::size_t e = cell.find_last_not_of(" \t");
    if (b == std::string::npos)
        throw ValidationError("malformed csv cell in " + path);
    double v = 0.0;
    const auto res = std::from_chars(cell.data() + b, cell.data() + e + 1, v);
    if (res.ec != std::errc() || res.ptr != cell.data() + e + 1)
        throw ValidationError("malformed csv number '" + cell + "' in " + path);
    return v;
}

inline std::vector<std::string> split_csv_line(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            cells.push_back(line.substr(start));
            break;
        }
        cells.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return cells;
}

}  // namespace detail

// Point cloud CSV: header "x0,...,x{d-1}" or "x0,...,x{d-1},w"; one point per
// row. Weights are normalized to sum exactly to one (uniform when absent).
inline PointCloud load_cloud_csv(const std::string& path, Vec& weights) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IOError("cannot open: " + path);
    std::string line;
    if (!std::getline(is, line)) throw ValidationError("empty csv: " + path);
    const auto header = detail::split_csv_line(line);
    if (header.empty() || header[0].empty() || header[0][0] != 'x')
        throw ValidationError("csv must start with an x0,... header: " + path);
    const bool has_w = header.back() == "w";
    const std::size_t d = header.size() - (has_w ? 1 : 0);
    if (d == 0) throw ValidationError("csv has no coordinate columns: " + path);
    PointCloud X;
    X.d = d;
    weights.clear();
    while (std::getline(is, line)) {
        if (line.empty() || line == "\r") continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size())
            throw ValidationError("csv row width mismatch in " + path);
        for (std::size_t c = 0; c < d; ++c)
            X.coords.push_back(detail::parse_double(cells[c], path));
        if (has_w) weights.push_back(detail::parse_double(cells[d], path));
    }
    X.n = X.coords.size() / d;
    if (X.n == 0) throw ValidationError("csv has no data rows: " + path);
    if (has_w) {
        double total = 0.0;
        std::size_t top = 0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            if (weights[i] < 0.0)
                throw ValidationError("negative weight in " + path);
            total += weights[i];
            if (weights[i] > weights[top]) top = i;
        }
        if (!(total > 0.0)) throw ValidationError("weights sum to zero in " + path);
        double s = 0.0;
        for (double& w : weights) s += (w /= total);
        weights[top] += 1.0 - s;  // absorb the rounding residue
    } else {
        weights = uniform_weights(X.n);
    }
    return X;
}

inline PointCloud load_cloud_csv(const std::string& path) {
    Vec w;
    return load_cloud_csv(path, w);
}

inline void save_cloud_csv(const std::string& path, const PointCloud& X,
                           const Vec* weights = nullptr) {
    if (weights && weights->size() != X.n)
        throw ValidationError("save_cloud_csv: weight count mismatch");
    CsvWriter out(path);
    std::vector<std::string> cells;
    for (std::size_t c = 0; c < X.d; ++c) cells.push_back("x" + std::to_string(c));
    if (weights) cells.push_back("w");
    out.row(cells);
    for (std::size_t i = 0; i < X.n; ++i) {
        cells.clear();
        for (std::size_t c = 0; c < X.d; ++c) cells.push_back(fmt_num(X.coords[i * X.d + c]));
        if (weights) cells.push_back(fmt_num((*weights)[i]));
        out.row(cells);
    }
    out.close();
}

}  // namespace mbot
