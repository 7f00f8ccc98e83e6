#ifndef AGESIR_CSV_HPP
#define AGESIR_CSV_HPP

#include <cstdio>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace agesir {

/** Full-precision decimal rendering (17 significant digits). */
inline std::string csv_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header) : out_(path) {
        if (!out_) throw std::runtime_error("CsvWriter: cannot open " + path);
        for (std::size_t j = 0; j < header.size(); ++j) {
            if (j) out_ << ',';
            out_ << header[j];
        }
        out_ << '\n';
        columns_ = header.size();
    }

    void row(std::span<const double> values) {
        if (values.size() != columns_) throw std::invalid_argument("CsvWriter: column count mismatch");
        for (std::size_t j = 0; j < values.size(); ++j) {
            if (j) out_ << ',';
            out_ << csv_num(values[j]);
        }
        out_ << '\n';
    }

private:
    std::ofstream out_;
    std::size_t columns_;
};

} // namespace agesir

#endif
