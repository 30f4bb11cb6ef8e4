#include "macroq/panel.hpp"

#include "macroq/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace macroq {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::string strip_quotes(std::string s) {
    s = trim(s);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
        s = s.substr(1, s.size() - 2);
    }
    return s;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        cells.push_back(strip_quotes(cell));
    }
    if (!line.empty() && line.back() == ',') cells.push_back("");
    return cells;
}

bool is_missing_token(const std::string& cell) {
    if (cell.empty()) return true;
    std::string up;
    for (char c : cell) up.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    return up == "NA" || up == "NAN" || up == ".";
}

double parse_cell(const std::string& cell, int line_no, const std::string& col) {
    if (is_missing_token(cell)) return kNaN;
    try {
        size_t pos = 0;
        double v = std::stod(cell, &pos);
        while (pos < cell.size() && std::isspace(static_cast<unsigned char>(cell[pos]))) ++pos;
        if (pos != cell.size()) throw std::invalid_argument(cell);
        return v;
    } catch (const std::exception&) {
        throw DataError("line " + std::to_string(line_no) + ", column " + col +
                        ": cannot parse value '" + cell + "'");
    }
}

bool lowercase_equals(const std::string& a, const std::string& b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(a[i])) != std::tolower(static_cast<unsigned char>(b[i])))
            return false;
    }
    return true;
}

} // namespace

PanelFormat parse_panel_format(const std::string& name) {
    if (name == "fredmd-csv") return PanelFormat::fredmd_csv;
    if (name == "plain-csv") return PanelFormat::plain_csv;
    throw ConfigError("unknown panel format '" + name + "' (expected fredmd-csv or plain-csv)");
}

int SeriesPanel::column(const std::string& name) const {
    auto it = std::find(names.begin(), names.end(), name);
    return it == names.end() ? -1 : static_cast<int>(it - names.begin());
}

void SeriesPanel::validate() const {
    if (cols() == 0) throw DataError("panel has no predictor columns");
    if (rows() == 0) throw DataError("panel has no data rows");
    for (int t = 1; t < rows(); ++t) {
        int gap = months_between(dates[t - 1], dates[t]);
        if (gap != 1) {
            throw DataError("panel dates must be consecutive months; gap of " + std::to_string(gap) +
                            " months between " + dates[t - 1].str() + " and " + dates[t].str());
        }
    }
    for (int j = 0; j < cols(); ++j) {
        bool any = false;
        for (int t = 0; t < rows() && !any; ++t) any = std::isfinite(values(t, j));
        if (!any) throw DataError("column '" + names[j] + "' has no non-missing observations");
    }
    if (!transform_codes.empty() && static_cast<int>(transform_codes.size()) != cols()) {
        throw DataError("transform code row width does not match predictor count");
    }
}

SeriesPanel load_panel(const std::string& path, PanelFormat format) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open panel file: " + path);

    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        lines.push_back(line);
    }
    if (lines.empty()) throw DataError("panel file is empty: " + path);

    auto header = split_csv_line(lines[0]);
    if (header.size() < 2) throw DataError("header must contain a date column plus at least one series");
    if (!lowercase_equals(header[0], "date") && !lowercase_equals(header[0], "sasdate")) {
        throw DataError("first header cell must be 'date' (got '" + header[0] + "')");
    }

    SeriesPanel panel;
    panel.names.assign(header.begin() + 1, header.end());
    const int k = panel.cols();

    size_t first_data = 1;
    if (lines.size() > 1) {
        auto second = split_csv_line(lines[1]);
        bool transform_row = !second.empty() && !looks_like_month(second[0]);
        if (format == PanelFormat::fredmd_csv && transform_row) {
            if (static_cast<int>(second.size()) != k + 1) {
                throw DataError("line 2: transform code row has " + std::to_string(second.size()) +
                                " cells, expected " + std::to_string(k + 1));
            }
            panel.transform_codes.resize(k);
            for (int j = 0; j < k; ++j) {
                double code = parse_cell(second[j + 1], 2, panel.names[j]);
                if (!std::isfinite(code)) throw DataError("line 2: missing transform code for '" + panel.names[j] + "'");
                panel.transform_codes[j] = static_cast<int>(std::lround(code));
            }
            first_data = 2;
        } else if (format == PanelFormat::fredmd_csv) {
            throw DataError("fredmd-csv requires a transform code row (non-date first cell on line 2)");
        }
    }

    std::vector<MonthDate> dates;
    std::vector<std::vector<double>> rows;
    for (size_t i = first_data; i < lines.size(); ++i) {
        auto cells = split_csv_line(lines[i]);
        int line_no = static_cast<int>(i + 1);
        bool all_empty = true;
        for (const auto& cell : cells) all_empty = all_empty && cell.empty();
        if (all_empty) continue; // stray separator-only row

        if (static_cast<int>(cells.size()) != k + 1) {
            throw DataError("line " + std::to_string(line_no) + ": expected " + std::to_string(k + 1) +
                            " cells, found " + std::to_string(cells.size()));
        }
        if (!looks_like_month(cells[0])) {
            throw DataError("line " + std::to_string(line_no) + ": unparseable date '" + cells[0] + "'");
        }
        dates.push_back(parse_month(cells[0]));
        std::vector<double> row(k);
        for (int j = 0; j < k; ++j) row[j] = parse_cell(cells[j + 1], line_no, panel.names[j]);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError("panel file has no data rows: " + path);

    panel.dates = std::move(dates);
    panel.values.resize(static_cast<int>(rows.size()), k);
    for (int t = 0; t < panel.rows(); ++t)
        for (int j = 0; j < k; ++j) panel.values(t, j) = rows[t][j];

    panel.validate();
    return panel;
}

std::map<std::string, int> transforms_from_codes(const SeriesPanel& panel) {
    std::map<std::string, int> out;
    if (panel.transform_codes.empty()) return out;
    for (int j = 0; j < panel.cols(); ++j) out[panel.names[j]] = panel.transform_codes[j];
    return out;
}

SeriesPanel apply_transforms(const SeriesPanel& panel, const std::map<std::string, int>& transforms) {
    SeriesPanel out = panel;
    const int T = panel.rows();

    auto lagged = [&](int j, int t, int lag) -> double {
        if (t - lag < 0) return kNaN;
        return panel.values(t - lag, j);
    };

    for (const auto& [name, code] : transforms) {
        int j = panel.column(name);
        if (j < 0) throw DataError("transform for unknown series '" + name + "'");
        if (code < 1 || code > 7) throw ConfigError("transform code for '" + name + "' must be 1..7");
        for (int t = T - 1; t >= 0; --t) {
            double x0 = panel.values(t, j);
            double x1 = lagged(j, t, 1);
            double x2 = lagged(j, t, 2);
            double v = kNaN;
            switch (code) {
                case 1: v = x0; break;
                case 2: v = x0 - x1; break;
                case 3: v = (x0 - x1) - (x1 - x2); break;
                case 4: v = x0 > 0 ? std::log(x0) : kNaN; break;
                case 5: v = (x0 > 0 && x1 > 0) ? std::log(x0) - std::log(x1) : kNaN; break;
                case 6:
                    v = (x0 > 0 && x1 > 0 && x2 > 0)
                            ? (std::log(x0) - std::log(x1)) - (std::log(x1) - std::log(x2))
                            : kNaN;
                    break;
                case 7: {
                    double p0 = (x1 != 0.0) ? x0 / x1 - 1.0 : kNaN;
                    double p1 = (x2 != 0.0) ? x1 / x2 - 1.0 : kNaN;
                    v = p0 - p1;
                    break;
                }
            }
            out.values(t, j) = v;
        }
    }
    out.validate();
    return out;
}

} // namespace macroq
