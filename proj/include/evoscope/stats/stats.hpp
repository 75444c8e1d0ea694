#pragma once

/// @file stats.hpp
/// @brief z-scoring, OLS with cluster-robust errors, random-intercept linear
/// mixed model fit by maximum likelihood, and 2-D binned outcome tables.

#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace evoscope::stats {

class ConstantColumn : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class RankDeficient : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class ColumnGap : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// (v - mean) / sd with the n-1 denominator. Throws ConstantColumn when sd is 0.
std::vector<double> zscore(std::span<const double> v);

/// zscore(a_z ⊙ b_z). Inputs are expected to be z-scored already.
std::vector<double> interaction_z(std::span<const double> a_z, std::span<const double> b_z);

struct Coefficient {
    std::string name;
    double estimate = 0.0;
    double se = 0.0;        // clustered / robust / model-based, per cov_type
    double naive_se = 0.0;  // classical OLS (or ML model-based for mixed)
    double stat = 0.0;
    double p_value = 1.0;
};

struct RegressionResult {
    std::string kind;      // "ols" | "mixed"
    std::string cov_type;  // "cluster" | "hc1" | "naive" | "ml"
    std::vector<Coefficient> coefficients;
    std::size_t n = 0;
    std::size_t groups = 0;
    double r2 = 0.0;
    double adj_r2 = 0.0;
    double log_likelihood = 0.0;
    double sigma2 = 0.0;  // residual variance
    double tau2 = 0.0;    // random-intercept variance (mixed)
    double lambda = 0.0;  // tau2 / sigma2 (mixed)
    bool converged = true;
    std::vector<std::string> warnings;

    const Coefficient& at(const std::string& name) const;
    Eigen::VectorXd beta() const;
    nlohmann::json to_json() const;
    /// term,estimate,se,naive_se,stat,p_value rows followed by fit statistics.
    std::string to_csv() const;
};

struct DesignMatrix {
    Eigen::VectorXd y;
    Eigen::MatrixXd x;                  // includes the intercept column
    std::vector<std::string> names;     // one per column of x
    std::vector<std::string> clusters;  // empty → no clustering
};

/// β = (XᵀX)⁻¹Xᵀy. With ≥ 2 clusters the covariance is the cluster sandwich
/// scaled by G/(G-1)·(n-1)/(n-p) and p-values use t(G-1); one cluster falls
/// back to HC1 with a warning; no clusters gives classical errors with t(n-p).
RegressionResult ols_fit(const DesignMatrix& d);

struct MixedDesign {
    Eigen::VectorXd y;
    Eigen::MatrixXd x;
    std::vector<std::string> names;
    std::vector<std::string> groups;
};

struct MixedOptions {
    double lambda_max = 1e6;
    int grid_points = 49;  // log-spaced over [1e-8, lambda_max], plus λ = 0
    int max_brent_iter = 200;
};

/// y = Xβ + u_g + ε by maximum likelihood, with β and σ² profiled out for a
/// given λ = τ²/σ² and λ found by grid search plus Brent refinement.
/// Throws std::invalid_argument with fewer than 2 groups.
RegressionResult mixed_fit(const MixedDesign& d, const MixedOptions& opt = {});

/// Same likelihood at a fixed λ (λ = 0 is pooled OLS by ML).
RegressionResult mixed_fit_fixed_lambda(const MixedDesign& d, double lambda);

struct Bin2dCell {
    std::size_t ix = 0, iy = 0;
    double x_lo = 0, x_hi = 0, y_lo = 0, y_hi = 0;
    std::size_t count = 0;
    double mean = 0.0;  // NaN when count == 0
};

/// Equal-width bins over each axis's observed range; bins × bins cells in
/// row-major (ix, iy) order.
std::vector<Bin2dCell> bin2d(std::span<const double> x, std::span<const double> y, std::span<const double> outcome,
                             std::size_t bins);

/// Minimal CSV table: header row plus string cells.
class DataFrame {
public:
    static DataFrame read_csv(const std::string& path);
    static DataFrame parse_csv(const std::string& text);

    const std::vector<std::string>& columns() const { return columns_; }
    std::size_t rows() const { return rows_.size(); }
    bool has(const std::string& column) const;
    std::vector<std::string> text(const std::string& column) const;
    /// Throws ColumnGap for a missing column, std::invalid_argument for a non-numeric cell.
    std::vector<double> numeric(const std::string& column) const;

    void add_column(const std::string& name, std::vector<std::string> values);
    void append_row(std::vector<std::string> row);
    const std::vector<std::string>& row(std::size_t i) const { return rows_[i]; }
    std::string to_csv() const;

private:
    std::size_t index(const std::string& column) const;
    std::vector<std::string> columns_;
    std::vector<std::vector<std::string>> rows_;
};

/// Named OLS specifications over the run-descriptor table. Response is
/// best_final_perf_z; task indicators are always added.
struct OlsSpec {
    std::string name;
    std::vector<std::string> predictors;  // z-scored descriptor columns
};
const std::vector<OlsSpec>& ols_specs();

/// Descriptor table columns: model, task, best_final_fitness and the raw
/// predictor columns (avg_novelty, initial_nov, avg_breakthrough_rate,
/// zero_shot_perf). Rows are averaged per (model, task) first. The response
/// and zero_shot_perf are z-scored within task, the other predictors over the
/// whole table. Errors are clustered by model.
RegressionResult fit_ols_spec(const DataFrame& descriptors, const std::string& spec_name);

/// Generation table columns: model, task, run_id, generation,
/// prob_breakthrough, mean_novelty, max_novelty, h_spatial, h_fitness.
/// "concurrent" predicts generation t, "lagged" predicts t+1 within a run.
RegressionResult fit_mixed_spec(const DataFrame& generations, const std::string& spec_name);

}  // namespace evoscope::stats
