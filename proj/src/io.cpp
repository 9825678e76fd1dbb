#include "tailrisk/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "tailrisk/special.hpp"

namespace tailrisk {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

bool iso_date_ok(const std::string& d) {
    if (d.size() != 10 || d[4] != '-' || d[7] != '-') return false;
    for (int i : {0, 1, 2, 3, 5, 6, 8, 9})
        if (!std::isdigit(static_cast<unsigned char>(d[i]))) return false;
    int mo = (d[5] - '0') * 10 + (d[6] - '0');
    int da = (d[8] - '0') * 10 + (d[9] - '0');
    return mo >= 1 && mo <= 12 && da >= 1 && da <= 31;
}

[[noreturn]] void csv_fail(int line, const std::string& what) {
    throw std::invalid_argument("csv line " + std::to_string(line) + ": " + what);
}

}  // namespace

PriceTable ingest_csv_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;

    if (!std::getline(in, line)) throw std::invalid_argument("csv: empty input");
    ++lineno;
    std::vector<std::string> header = split_csv_line(line);
    if (header.size() < 2 || trim(header[0]) != "date")
        csv_fail(lineno, "header must be 'date,TICKER1,...'");
    PriceTable table;
    for (std::size_t j = 1; j < header.size(); ++j) {
        std::string t = trim(header[j]);
        if (t.empty()) csv_fail(lineno, "empty ticker name");
        table.tickers.push_back(t);
    }
    const std::size_t d = table.tickers.size();

    struct Row {
        std::string date;
        std::vector<double> px;
    };
    std::vector<Row> rows;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        std::vector<std::string> f = split_csv_line(line);
        if (f.size() != d + 1) csv_fail(lineno, "expected " + std::to_string(d + 1) + " fields");
        Row r;
        r.date = trim(f[0]);
        if (!iso_date_ok(r.date)) csv_fail(lineno, "bad ISO-8601 date '" + r.date + "'");
        bool missing = false;
        for (std::size_t j = 1; j <= d; ++j) {
            std::string cell = trim(f[j]);
            if (cell.empty()) {
                missing = true;
                continue;
            }
            char* end = nullptr;
            double v = std::strtod(cell.c_str(), &end);
            if (end != cell.c_str() + cell.size()) csv_fail(lineno, "malformed number '" + cell + "'");
            if (!(v > 0.0)) csv_fail(lineno, "non-positive price " + cell);
            r.px.push_back(v);
        }
        if (missing) {
            ++table.dropped_rows;
            continue;
        }
        rows.push_back(std::move(r));
    }
    if (rows.empty()) throw std::invalid_argument("csv: no usable rows");

    bool sorted = std::is_sorted(rows.begin(), rows.end(),
                                 [](const Row& a, const Row& b) { return a.date < b.date; });
    if (!sorted) {
        std::stable_sort(rows.begin(), rows.end(),
                         [](const Row& a, const Row& b) { return a.date < b.date; });
        table.warnings.push_back("dates out of order: rows sorted by date");
    }
    std::vector<Row> unique_rows;
    for (auto& r : rows) {
        if (!unique_rows.empty() && unique_rows.back().date == r.date) {
            ++table.dropped_rows;
            if (table.warnings.empty() || table.warnings.back().find("duplicate") == std::string::npos)
                table.warnings.push_back("duplicate dates: keeping the first row of each day");
            continue;
        }
        unique_rows.push_back(std::move(r));
    }

    table.close.resize(static_cast<Eigen::Index>(unique_rows.size()), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < unique_rows.size(); ++i) {
        table.dates.push_back(unique_rows[i].date);
        for (std::size_t j = 0; j < d; ++j) table.close(i, j) = unique_rows[i].px[j];
    }
    return table;
}

PriceTable ingest_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return ingest_csv_text(buf.str());
}

ReturnTable compute_returns(const PriceTable& prices) {
    const Eigen::Index t_len = prices.close.rows();
    if (t_len < 2) throw std::invalid_argument("compute_returns: need at least two rows");
    ReturnTable out;
    out.tickers = prices.tickers;
    out.returns.resize(t_len - 1, prices.close.cols());
    for (Eigen::Index t = 1; t < t_len; ++t) {
        out.dates.push_back(prices.dates[t]);
        for (Eigen::Index j = 0; j < prices.close.cols(); ++j)
            out.returns(t - 1, j) =
                100.0 * (std::log(prices.close(t, j)) - std::log(prices.close(t - 1, j)));
    }
    return out;
}

std::vector<AssetStats> describe(const ReturnTable& returns) {
    const Eigen::Index n = returns.returns.rows();
    if (n < 8) throw std::invalid_argument("describe: need at least 8 observations");
    std::vector<AssetStats> out;
    for (Eigen::Index j = 0; j < returns.returns.cols(); ++j) {
        Eigen::VectorXd r = returns.returns.col(j);
        AssetStats s;
        s.ticker = returns.tickers[j];
        s.n = static_cast<int>(n);
        s.max = r.maxCoeff();
        s.min = r.minCoeff();
        s.mean = r.mean();
        Eigen::ArrayXd c = r.array() - s.mean;
        double m2 = c.square().mean();
        s.stddev = std::sqrt(c.square().sum() / (n - 1));
        if (m2 <= 0.0) {
            s.degenerate = true;
            s.skewness = s.kurtosis = std::numeric_limits<double>::quiet_NaN();
            s.jb_stat = std::numeric_limits<double>::quiet_NaN();
            s.jb_pvalue = std::numeric_limits<double>::quiet_NaN();
        } else {
            s.skewness = c.cube().mean() / std::pow(m2, 1.5);
            s.kurtosis = c.pow(4).mean() / (m2 * m2);
            s.jb_stat =
                n / 6.0 * (s.skewness * s.skewness + 0.25 * std::pow(s.kurtosis - 3.0, 2.0));
            s.jb_pvalue = chi_square_sf(s.jb_stat, 2);
        }
        out.push_back(s);
    }
    return out;
}

std::string stats_to_json_string(const std::vector<AssetStats>& stats) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& s : stats) {
        nlohmann::ordered_json j;
        j["ticker"] = s.ticker;
        j["n"] = s.n;
        j["max"] = s.max;
        j["mean"] = s.mean;
        j["min"] = s.min;
        j["std"] = s.stddev;
        j["kurtosis"] = s.degenerate ? nlohmann::ordered_json(nullptr)
                                     : nlohmann::ordered_json(s.kurtosis);
        j["skewness"] = s.degenerate ? nlohmann::ordered_json(nullptr)
                                     : nlohmann::ordered_json(s.skewness);
        j["jb_stat"] = s.degenerate ? nlohmann::ordered_json(nullptr)
                                    : nlohmann::ordered_json(s.jb_stat);
        j["jb_pvalue"] = s.degenerate ? nlohmann::ordered_json(nullptr)
                                      : nlohmann::ordered_json(s.jb_pvalue);
        j["degenerate"] = s.degenerate;
        arr.push_back(std::move(j));
    }
    return arr.dump();
}

std::string stats_to_text(const std::vector<AssetStats>& stats) {
    char buf[256];
    std::string out;
    std::snprintf(buf, sizeof(buf), "%-10s %9s %9s %9s %9s %9s %9s %12s\n", "", "Max", "Mean",
                  "Min", "Std", "Kurtosis", "Skewness", "JB-test");
    out += buf;
    for (const auto& s : stats) {
        if (s.degenerate) {
            std::snprintf(buf, sizeof(buf), "%-10s %9.4f %9.4f %9.4f %9.4f %9s %9s %12s\n",
                          s.ticker.c_str(), s.max, s.mean, s.min, s.stddev, "-", "-",
                          "degenerate");
        } else {
            std::snprintf(buf, sizeof(buf), "%-10s %9.4f %9.4f %9.4f %9.4f %9.4f %9.4f %12.0f\n",
                          s.ticker.c_str(), s.max, s.mean, s.min, s.stddev, s.kurtosis,
                          s.skewness, s.jb_stat);
        }
        out += buf;
    }
    return out;
}

}  // namespace tailrisk
