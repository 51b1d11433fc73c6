#pragma once

// Regret bookkeeping and Table-2 style summaries.
//
// regret r_e = choice cost - baseline cost, C_e = r_1 + ... + r_e.
// Break-even is the 1-based episode from which C stays negative to the end.
// Quantiles use the nearest-rank rule: the ceil(q/100 * n)-th smallest value.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace smartchoices::harness {

struct RegretSeries {
    std::vector<double> regret;
    std::vector<double> cumulative;
};

inline RegretSeries cumulative_regret(const std::vector<double>& costs, const std::vector<double>& baseline_costs) {
    if (costs.size() != baseline_costs.size())
        throw std::invalid_argument("cumulative_regret: cost series lengths differ");
    RegretSeries s;
    s.regret.resize(costs.size());
    s.cumulative.resize(costs.size());
    double c = 0.0;
    for (std::size_t i = 0; i < costs.size(); ++i) {
        s.regret[i] = costs[i] - baseline_costs[i];
        c += s.regret[i];
        s.cumulative[i] = c;
    }
    return s;
}

/// 1-based episode e with C_j < 0 for every j >= e, or nullopt.
inline std::optional<std::size_t> break_even(const std::vector<double>& cumulative) {
    std::size_t e = cumulative.size();
    while (e > 0 && cumulative[e - 1] < 0.0) --e;
    if (e == cumulative.size()) return std::nullopt;
    return e + 1;
}

/// Nearest-rank quantile, q in percent (0, 100]. q = 0 gives the minimum.
inline double nearest_rank(std::vector<double> values, double q) {
    if (values.empty()) throw std::invalid_argument("nearest_rank: empty sample");
    if (!(q >= 0.0 && q <= 100.0)) throw std::invalid_argument("nearest_rank: q must lie in [0, 100]");
    const auto n = values.size();
    auto rank = static_cast<std::size_t>(std::ceil(q / 100.0 * static_cast<double>(n) - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, n);
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(rank - 1), values.end());
    return values[rank - 1];
}

inline const std::vector<double> kTableQuantiles{1, 5, 10, 25, 50, 75, 90, 95, 99};

struct ReportRow {
    std::string label;  ///< "regret@<episode>" or "break_even"
    std::size_t episode = 0;
    std::vector<double> quantiles;
    double mean = 0.0;  ///< break-even row: fraction of runs that reached it
};

struct QuantileReport {
    std::vector<double> quantile_levels;
    std::vector<ReportRow> rows;
};

/// `runs` holds one cumulative-regret series per run. Checkpoints past the end
/// of a run use its last value. With `per_episode`, C_e is divided by e.
/// Runs that never break even count as +infinity in the break-even quantiles.
inline QuantileReport quantile_report(const std::vector<std::vector<double>>& runs,
                                      const std::vector<std::size_t>& checkpoints,
                                      const std::vector<double>& quantiles = kTableQuantiles, bool per_episode = false) {
    if (runs.empty()) throw std::invalid_argument("quantile_report needs at least one run");
    QuantileReport rep;
    rep.quantile_levels = quantiles;
    for (auto cp : checkpoints) {
        if (cp == 0) throw std::invalid_argument("checkpoints are 1-based");
        std::vector<double> vals;
        for (const auto& r : runs) {
            if (r.empty()) throw std::invalid_argument("quantile_report: empty run");
            const std::size_t e = std::min(cp, r.size());
            vals.push_back(per_episode ? r[e - 1] / static_cast<double>(e) : r[e - 1]);
        }
        ReportRow row{"regret@" + std::to_string(cp), cp, {}, 0.0};
        for (double q : quantiles) row.quantiles.push_back(nearest_rank(vals, q));
        double sum = 0.0;
        for (double v : vals) sum += v;
        row.mean = sum / static_cast<double>(vals.size());
        rep.rows.push_back(std::move(row));
    }
    std::vector<double> be;
    std::size_t reached = 0;
    for (const auto& r : runs) {
        const auto e = break_even(r);
        reached += e.has_value();
        be.push_back(e ? static_cast<double>(*e) : std::numeric_limits<double>::infinity());
    }
    ReportRow row{"break_even", 0, {}, static_cast<double>(reached) / static_cast<double>(runs.size())};
    for (double q : quantiles) row.quantiles.push_back(nearest_rank(be, q));
    rep.rows.push_back(std::move(row));
    return rep;
}

}  // namespace smartchoices::harness
