#pragma once

// Reads experiment CSVs back into cumulative-regret series and writes
// quantile reports.

#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "smartchoices/errors.hpp"
#include "smartchoices/harness/experiment.hpp"
#include "smartchoices/harness/metrics.hpp"

namespace smartchoices::harness {

/// Cumulative regret per baseline, in episode order, from one run's CSV.
inline std::map<std::string, std::vector<double>> read_regret_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kCsvHeader) throw ConfigError("CSV header does not match");
    std::map<std::string, std::vector<double>> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::string cell;
        std::istringstream is(line);
        while (std::getline(is, cell, ',')) f.push_back(cell);
        if (f.size() != 11) throw ConfigError("CSV line " + std::to_string(lineno) + ": expected 11 columns");
        try {
            out[f[4]].push_back(std::stod(f[7]));
        } catch (const std::exception&) {
            throw ConfigError("CSV line " + std::to_string(lineno) + ": bad cum_regret '" + f[7] + "'");
        }
    }
    return out;
}

inline std::map<std::string, std::vector<double>> read_regret_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    try {
        return read_regret_csv(in);
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

/// Columns: baseline,row,q1,...,mean
inline void write_report_csv(std::ostream& os, const std::string& baseline, const QuantileReport& rep,
                             bool header = true) {
    if (header) {
        os << "baseline,row";
        for (double q : rep.quantile_levels) os << ",q" << format_number(q);
        os << ",mean\n";
    }
    for (const auto& r : rep.rows) {
        os << baseline << ',' << r.label;
        for (double v : r.quantiles) os << ',' << format_number(v);
        os << ',' << format_number(r.mean) << '\n';
    }
}

}  // namespace smartchoices::harness
