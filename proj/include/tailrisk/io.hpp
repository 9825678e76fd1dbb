#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace tailrisk {

struct PriceTable {
    std::vector<std::string> dates;    // ISO-8601, strictly increasing
    std::vector<std::string> tickers;
    Eigen::MatrixXd close;             // T x d adjusted closes, positive
    int dropped_rows = 0;              // rows lost to missing fields / duplicate dates
    std::vector<std::string> warnings;
};

// CSV layout: header "date,TICKER1,TICKER2,...", ISO dates, one row per day.
// Rows with any empty field are dropped (count reported); out-of-order dates
// are sorted with a warning; malformed cells and non-positive prices are hard
// errors carrying the line number.
PriceTable ingest_csv(const std::string& path);
PriceTable ingest_csv_text(const std::string& text);

struct ReturnTable {
    std::vector<std::string> dates;  // length T-1, the later day of each pair
    std::vector<std::string> tickers;
    Eigen::MatrixXd returns;         // (T-1) x d, percent log-returns
};

ReturnTable compute_returns(const PriceTable& prices);

struct AssetStats {
    std::string ticker;
    int n = 0;
    double max = 0.0, mean = 0.0, min = 0.0, stddev = 0.0;
    double kurtosis = 0.0;  // raw (normal = 3)
    double skewness = 0.0;
    double jb_stat = 0.0;
    double jb_pvalue = 1.0;
    bool degenerate = false;
};

// Per-asset descriptive statistics with the Jarque-Bera normality test,
// JB = n/6 (S^2 + (K-3)^2 / 4) against chi-square(2).
std::vector<AssetStats> describe(const ReturnTable& returns);

std::string stats_to_json_string(const std::vector<AssetStats>& stats);
std::string stats_to_text(const std::vector<AssetStats>& stats);

}  // namespace tailrisk
