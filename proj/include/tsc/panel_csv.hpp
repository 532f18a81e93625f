#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "tsc/io.hpp"
#include "tsc/panel.hpp"

namespace tsc {

enum class CsvSchema { Wide, Long };

struct CsvLoadOptions {
    /// Treated unit id; the first unit in the file when absent.
    std::optional<std::string> treated;
    /// Either the label of the first post-treatment period, or (when no label
    /// matches) an integer count of pre-treatment periods.
    std::optional<std::string> t0;
    OutcomeKind kind;
};

namespace detail {

inline bool is_covariate_column(const std::string& name) { return name.rfind("z_", 0) == 0; }

inline std::string strip_time_prefix(const std::string& name) {
    return name.rfind("y_", 0) == 0 ? name.substr(2) : name;
}

inline bool is_missing(std::string_view cell) {
    cell = io::trim(cell);
    return cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan";
}

inline double parse_cell(const std::string& cell, std::size_t line_no, const std::string& column) {
    if (is_missing(cell))
        fail(ErrorCode::RaggedPanel, "missing value at line " + std::to_string(line_no) + ", column " + column);
    auto v = io::parse_double(cell);
    if (!v)
        fail(ErrorCode::ParseError,
             "cannot parse '" + cell + "' at line " + std::to_string(line_no) + ", column " + column);
    return *v;
}

inline PanelDataset finish_load(PanelDataset d, const CsvLoadOptions& opt) {
    d.kind = opt.kind;
    if (opt.treated) {
        auto it = std::find(d.unit_ids.begin(), d.unit_ids.end(), *opt.treated);
        require(it != d.unit_ids.end(), ErrorCode::DimensionMismatch, "treated unit '" + *opt.treated + "' not found");
        d.treated_index = static_cast<Index>(it - d.unit_ids.begin());
    } else {
        d.treated_index = 0;
    }
    require(opt.t0.has_value(), ErrorCode::InvalidT0, "treatment time t0 was not supplied");
    auto it = std::find(d.time_labels.begin(), d.time_labels.end(), *opt.t0);
    if (it != d.time_labels.end()) {
        d.t0 = static_cast<Index>(it - d.time_labels.begin());
    } else {
        auto v = io::parse_double(*opt.t0);
        require(v.has_value() && *v == std::floor(*v), ErrorCode::InvalidT0,
                "t0 '" + *opt.t0 + "' is neither a time label nor an integer");
        d.t0 = static_cast<Index>(*v);
    }
    return validate(std::move(d));
}

inline PanelDataset load_wide(const std::vector<std::string>& lines, const CsvLoadOptions& opt) {
    const auto header = io::split_csv_line(lines.front());
    require(header.size() >= 3, ErrorCode::ParseError, "wide header needs a unit column and at least two periods");
    std::vector<std::size_t> cov_cols, time_cols;
    for (std::size_t c = 1; c < header.size(); ++c)
        (is_covariate_column(header[c]) ? cov_cols : time_cols).push_back(c);

    PanelDataset d;
    const auto n = static_cast<Index>(lines.size() - 1);
    d.outcomes.resize(n, static_cast<Index>(time_cols.size()));
    d.covariates.resize(n, static_cast<Index>(cov_cols.size()));
    for (std::size_t c : time_cols) d.time_labels.push_back(strip_time_prefix(header[c]));

    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto fields = io::split_csv_line(lines[r]);
        if (fields.size() != header.size())
            fail(fields.size() < header.size() ? ErrorCode::RaggedPanel : ErrorCode::ParseError,
                 "line " + std::to_string(r + 1) + " has " + std::to_string(fields.size()) + " fields, header has " +
                     std::to_string(header.size()));
        const auto i = static_cast<Index>(r - 1);
        d.unit_ids.push_back(fields[0]);
        for (std::size_t k = 0; k < cov_cols.size(); ++k)
            d.covariates(i, static_cast<Index>(k)) = parse_cell(fields[cov_cols[k]], r + 1, header[cov_cols[k]]);
        for (std::size_t k = 0; k < time_cols.size(); ++k)
            d.outcomes(i, static_cast<Index>(k)) = parse_cell(fields[time_cols[k]], r + 1, header[time_cols[k]]);
    }
    return finish_load(std::move(d), opt);
}

inline PanelDataset load_long(const std::vector<std::string>& lines, const CsvLoadOptions& opt) {
    const auto header = io::split_csv_line(lines.front());
    std::optional<std::size_t> unit_col, time_col, outcome_col;
    std::vector<std::size_t> cov_cols;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c] == "unit") unit_col = c;
        else if (header[c] == "time") time_col = c;
        else if (header[c] == "outcome") outcome_col = c;
        else if (is_covariate_column(header[c])) cov_cols.push_back(c);
        else fail(ErrorCode::ParseError, "unexpected column '" + header[c] + "' in long panel");
    }
    require(unit_col && time_col && outcome_col, ErrorCode::ParseError,
            "long panel needs columns unit, time, outcome");

    std::vector<std::string> units, times;
    std::map<std::string, std::size_t> unit_pos, time_pos;
    struct Cell {
        std::size_t unit, time;
        double value;
    };
    std::vector<Cell> cells;
    std::vector<std::vector<double>> covs;

    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto fields = io::split_csv_line(lines[r]);
        if (fields.size() != header.size())
            fail(ErrorCode::ParseError, "line " + std::to_string(r + 1) + " has " + std::to_string(fields.size()) +
                                            " fields, header has " + std::to_string(header.size()));
        const std::string& u = fields[*unit_col];
        const std::string& t = fields[*time_col];
        auto [uit, unew] = unit_pos.emplace(u, units.size());
        if (unew) units.push_back(u);
        auto [tit, tnew] = time_pos.emplace(t, times.size());
        if (tnew) times.push_back(t);

        std::vector<double> z;
        for (std::size_t c : cov_cols) z.push_back(parse_cell(fields[c], r + 1, header[c]));
        if (unew) {
            covs.push_back(z);
        } else if (covs[uit->second] != z) {
            fail(ErrorCode::CovariateNotConstant, "covariates of unit '" + u + "' change at line " + std::to_string(r + 1));
        }
        cells.push_back({uit->second, tit->second, parse_cell(fields[*outcome_col], r + 1, "outcome")});
    }

    // Numeric time labels are ordered numerically, others by first appearance.
    std::vector<std::size_t> order(times.size());
    std::iota(order.begin(), order.end(), 0);
    const bool numeric = std::all_of(times.begin(), times.end(), [](const std::string& s) { return io::parse_double(s).has_value(); });
    if (numeric)
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return *io::parse_double(times[a]) < *io::parse_double(times[b]); });
    std::vector<std::size_t> column_of(times.size());
    for (std::size_t k = 0; k < order.size(); ++k) column_of[order[k]] = k;

    PanelDataset d;
    const auto n = static_cast<Index>(units.size());
    const auto t = static_cast<Index>(times.size());
    d.outcomes = Eigen::MatrixXd::Constant(n, t, std::numeric_limits<double>::quiet_NaN());
    std::vector<char> seen(static_cast<std::size_t>(n * t), 0);
    for (const Cell& c : cells) {
        const auto col = column_of[c.time];
        auto& flag = seen[c.unit * static_cast<std::size_t>(t) + col];
        if (flag) fail(ErrorCode::ParseError, "duplicate cell for unit '" + units[c.unit] + "' time '" + times[c.time] + "'");
        flag = 1;
        d.outcomes(static_cast<Index>(c.unit), static_cast<Index>(col)) = c.value;
    }
    for (std::size_t u = 0; u < units.size(); ++u)
        for (std::size_t k = 0; k < order.size(); ++k)
            if (!seen[u * static_cast<std::size_t>(t) + k])
                fail(ErrorCode::RaggedPanel, "no outcome for unit '" + units[u] + "' at time '" + times[order[k]] + "'");

    d.covariates.resize(n, static_cast<Index>(cov_cols.size()));
    for (Index i = 0; i < n; ++i)
        for (Index k = 0; k < d.covariates.cols(); ++k)
            d.covariates(i, k) = covs[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
    d.unit_ids = units;
    for (std::size_t k : order) d.time_labels.push_back(times[k]);
    return finish_load(std::move(d), opt);
}

}  // namespace detail

inline PanelDataset load_panel_csv(const std::filesystem::path& path, CsvSchema schema, const CsvLoadOptions& opt) {
    const auto lines = io::read_csv_lines(path);
    return schema == CsvSchema::Wide ? detail::load_wide(lines, opt) : detail::load_long(lines, opt);
}

inline std::string panel_to_csv(const PanelDataset& d, CsvSchema schema) {
    std::string out;
    const Index p = d.n_covariates();
    auto unit_label = [&](Index i) {
        return d.unit_ids.empty() ? std::to_string(i + 1) : d.unit_ids[static_cast<std::size_t>(i)];
    };
    auto time_label = [&](Index s) {
        return d.time_labels.empty() ? std::to_string(s + 1) : d.time_labels[static_cast<std::size_t>(s)];
    };
    if (schema == CsvSchema::Wide) {
        out += "unit";
        for (Index k = 0; k < p; ++k) out += ",z_" + std::to_string(k + 1);
        for (Index s = 0; s < d.n_periods(); ++s) out += "," + io::csv_escape("y_" + time_label(s));
        out += '\n';
        for (Index i = 0; i < d.n_units(); ++i) {
            out += io::csv_escape(unit_label(i));
            for (Index k = 0; k < p; ++k) out += "," + io::format_double(d.covariates(i, k));
            for (Index s = 0; s < d.n_periods(); ++s) out += "," + io::format_double(d.outcomes(i, s));
            out += '\n';
        }
    } else {
        out += "unit,time,outcome";
        for (Index k = 0; k < p; ++k) out += ",z_" + std::to_string(k + 1);
        out += '\n';
        for (Index i = 0; i < d.n_units(); ++i)
            for (Index s = 0; s < d.n_periods(); ++s) {
                out += io::csv_escape(unit_label(i)) + "," + io::csv_escape(time_label(s)) + "," +
                       io::format_double(d.outcomes(i, s));
                for (Index k = 0; k < p; ++k) out += "," + io::format_double(d.covariates(i, k));
                out += '\n';
            }
    }
    return out;
}

inline void write_panel_csv(const PanelDataset& d, const std::filesystem::path& path, CsvSchema schema) {
    io::write_text(path, panel_to_csv(d, schema));
}

/// Load options that reproduce `d`'s treated unit and treatment time.
inline CsvLoadOptions options_for(const PanelDataset& d) {
    CsvLoadOptions opt;
    opt.treated = d.unit_ids.at(static_cast<std::size_t>(d.treated_index));
    opt.t0 = d.time_labels.at(static_cast<std::size_t>(d.t0));
    opt.kind = d.kind;
    return opt;
}

}  // namespace tsc
