#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numbers>
#include <set>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/tools/minima.hpp>

#include "evoscope/stats/stats.hpp"

namespace evoscope::stats {

std::vector<double> zscore(std::span<const double> v) {
    if (v.size() < 2) throw ConstantColumn("z-score needs at least 2 values");
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
    if (!(sd > 0.0)) throw ConstantColumn("z-score of a constant column");
    std::vector<double> out;
    out.reserve(v.size());
    for (double x : v) out.push_back((x - mean) / sd);
    return out;
}

std::vector<double> interaction_z(std::span<const double> a_z, std::span<const double> b_z) {
    if (a_z.size() != b_z.size()) throw std::invalid_argument("interaction columns differ in length");
    std::vector<double> prod(a_z.size());
    for (std::size_t i = 0; i < a_z.size(); ++i) prod[i] = a_z[i] * b_z[i];
    return zscore(prod);
}

const Coefficient& RegressionResult::at(const std::string& name) const {
    for (const auto& c : coefficients)
        if (c.name == name) return c;
    throw std::out_of_range("no coefficient named '" + name + "'");
}

Eigen::VectorXd RegressionResult::beta() const {
    Eigen::VectorXd b(static_cast<Eigen::Index>(coefficients.size()));
    for (std::size_t i = 0; i < coefficients.size(); ++i) b(static_cast<Eigen::Index>(i)) = coefficients[i].estimate;
    return b;
}

nlohmann::json RegressionResult::to_json() const {
    nlohmann::json coefs = nlohmann::json::array();
    for (const auto& c : coefficients)
        coefs.push_back({{"term", c.name}, {"estimate", c.estimate}, {"se", c.se}, {"naive_se", c.naive_se},
                         {"stat", c.stat}, {"p_value", c.p_value}});
    nlohmann::json j = {{"kind", kind}, {"cov_type", cov_type}, {"coefficients", coefs}, {"n", n},
                        {"groups", groups}, {"converged", converged}, {"warnings", warnings}};
    if (kind == "ols") {
        j["r2"] = r2;
        j["adj_r2"] = adj_r2;
    } else {
        j["log_likelihood"] = log_likelihood;
        j["sigma2"] = sigma2;
        j["tau2"] = tau2;
        j["lambda"] = lambda;
    }
    return j;
}

std::string RegressionResult::to_csv() const {
    std::string out = "term,estimate,se,naive_se,stat,p_value\n";
    char buf[256];
    for (const auto& c : coefficients) {
        std::snprintf(buf, sizeof buf, ",%.10g,%.10g,%.10g,%.10g,%.10g\n", c.estimate, c.se, c.naive_se, c.stat,
                      c.p_value);
        out += c.name + buf;
    }
    auto stat_row = [&](const char* name, double v) {
        std::snprintf(buf, sizeof buf, "%s,%.10g,,,,\n", name, v);
        out += buf;
    };
    stat_row("n", static_cast<double>(n));
    stat_row("groups", static_cast<double>(groups));
    if (kind == "ols") {
        stat_row("r2", r2);
        stat_row("adj_r2", adj_r2);
    } else {
        stat_row("log_likelihood", log_likelihood);
        stat_row("sigma2", sigma2);
        stat_row("tau2", tau2);
    }
    return out;
}

namespace {

double two_sided_t(double stat, double df) {
    if (!std::isfinite(stat)) return 0.0;
    boost::math::students_t dist(df);
    return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(stat)));
}

double two_sided_normal(double stat) {
    if (!std::isfinite(stat)) return 0.0;
    boost::math::normal dist;
    return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(stat)));
}

void check_design(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, const std::vector<std::string>& names) {
    if (x.rows() != y.size()) throw std::invalid_argument("design and response differ in length");
    if (static_cast<std::size_t>(x.cols()) != names.size()) throw std::invalid_argument("one name per column required");
    if (!y.allFinite() || !x.allFinite()) throw std::invalid_argument("design contains non-finite entries");
    if (x.rows() <= x.cols()) throw std::invalid_argument("need more rows than columns");
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    if (qr.rank() < x.cols()) throw RankDeficient("design matrix is rank deficient");
}

}  // namespace

RegressionResult ols_fit(const DesignMatrix& d) {
    check_design(d.y, d.x, d.names);
    const auto n = static_cast<std::size_t>(d.x.rows());
    const auto p = static_cast<std::size_t>(d.x.cols());
    if (!d.clusters.empty() && d.clusters.size() != n) throw std::invalid_argument("one cluster id per row required");

    const Eigen::VectorXd beta = d.x.colPivHouseholderQr().solve(d.y);
    const Eigen::VectorXd resid = d.y - d.x * beta;
    const Eigen::MatrixXd bread = (d.x.transpose() * d.x).inverse();
    const double rss = resid.squaredNorm();
    const double dn = static_cast<double>(n), dp = static_cast<double>(p);
    const Eigen::MatrixXd naive = bread * (rss / (dn - dp));

    RegressionResult r;
    r.kind = "ols";
    r.n = n;
    const double tss = (d.y.array() - d.y.mean()).square().sum();
    r.r2 = tss > 0.0 ? 1.0 - rss / tss : 1.0;
    r.adj_r2 = 1.0 - (1.0 - r.r2) * (dn - 1.0) / (dn - dp);
    r.sigma2 = rss / (dn - dp);

    Eigen::MatrixXd cov = naive;
    double df = dn - dp;
    std::map<std::string, std::vector<Eigen::Index>> clusters;
    for (std::size_t i = 0; i < d.clusters.size(); ++i) clusters[d.clusters[i]].push_back(static_cast<Eigen::Index>(i));
    r.groups = clusters.size();
    if (clusters.size() >= 2) {
        Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(d.x.cols(), d.x.cols());
        for (const auto& [id, rows] : clusters) {
            Eigen::VectorXd score = Eigen::VectorXd::Zero(d.x.cols());
            for (auto i : rows) score += d.x.row(i).transpose() * resid(i);
            meat += score * score.transpose();
        }
        const double g = static_cast<double>(clusters.size());
        cov = (g / (g - 1.0)) * ((dn - 1.0) / (dn - dp)) * bread * meat * bread;
        df = g - 1.0;
        r.cov_type = "cluster";
    } else if (clusters.size() == 1) {
        Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(d.x.cols(), d.x.cols());
        for (Eigen::Index i = 0; i < d.x.rows(); ++i)
            meat += d.x.row(i).transpose() * d.x.row(i) * (resid(i) * resid(i));
        cov = (dn / (dn - dp)) * bread * meat * bread;
        r.cov_type = "hc1";
        r.warnings.push_back("single cluster: falling back to heteroskedasticity-robust (HC1) errors");
    } else {
        r.cov_type = "naive";
    }

    for (std::size_t k = 0; k < p; ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        Coefficient c;
        c.name = d.names[k];
        c.estimate = beta(kk);
        c.se = std::sqrt(std::max(0.0, cov(kk, kk)));
        c.naive_se = std::sqrt(std::max(0.0, naive(kk, kk)));
        c.stat = c.se > 0.0 ? c.estimate / c.se : std::numeric_limits<double>::infinity();
        c.p_value = two_sided_t(c.stat, df);
        r.coefficients.push_back(c);
    }
    return r;
}

namespace {

struct GroupBlock {
    std::vector<Eigen::Index> rows;
    Eigen::MatrixXd xtx;
    Eigen::VectorXd xt1;
    Eigen::VectorXd xty;
    double sum_y = 0.0;
};

struct Profile {
    double loglik = -std::numeric_limits<double>::infinity();
    double sigma2 = 0.0;
    Eigen::VectorXd beta;
    Eigen::MatrixXd a;  // Σ XᵀV⁻¹X
};

class MixedLikelihood {
public:
    explicit MixedLikelihood(const MixedDesign& d) : d_(d) {
        std::map<std::string, std::size_t> index;
        for (std::size_t i = 0; i < d.groups.size(); ++i) {
            auto [it, fresh] = index.try_emplace(d.groups[i], blocks_.size());
            if (fresh) blocks_.emplace_back();
            blocks_[it->second].rows.push_back(static_cast<Eigen::Index>(i));
        }
        const Eigen::Index p = d.x.cols();
        for (auto& b : blocks_) {
            b.xtx = Eigen::MatrixXd::Zero(p, p);
            b.xt1 = Eigen::VectorXd::Zero(p);
            b.xty = Eigen::VectorXd::Zero(p);
            for (auto i : b.rows) {
                b.xtx += d.x.row(i).transpose() * d.x.row(i);
                b.xt1 += d.x.row(i).transpose();
                b.xty += d.x.row(i).transpose() * d.y(i);
                b.sum_y += d.y(i);
            }
        }
    }

    std::size_t groups() const { return blocks_.size(); }

    Profile at(double lambda) const {
        const Eigen::Index p = d_.x.cols();
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p, p);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(p);
        double logdet = 0.0;
        for (const auto& b : blocks_) {
            const double ng = static_cast<double>(b.rows.size());
            const double c = lambda / (1.0 + ng * lambda);
            a += b.xtx - c * b.xt1 * b.xt1.transpose();
            rhs += b.xty - c * b.xt1 * b.sum_y;
            logdet += std::log1p(ng * lambda);
        }
        Profile pr;
        pr.beta = a.ldlt().solve(rhs);
        pr.a = std::move(a);
        const Eigen::VectorXd resid = d_.y - d_.x * pr.beta;
        double q = 0.0;
        for (const auto& b : blocks_) {
            const double ng = static_cast<double>(b.rows.size());
            const double c = lambda / (1.0 + ng * lambda);
            double ss = 0.0, s = 0.0;
            for (auto i : b.rows) {
                ss += resid(i) * resid(i);
                s += resid(i);
            }
            q += ss - c * s * s;
        }
        const double n = static_cast<double>(d_.y.size());
        pr.sigma2 = q / n;
        pr.loglik = -0.5 * n * (std::log(2.0 * std::numbers::pi * pr.sigma2) + 1.0) - 0.5 * logdet;
        return pr;
    }

private:
    const MixedDesign& d_;
    std::vector<GroupBlock> blocks_;
};

RegressionResult mixed_result(const MixedDesign& d, const MixedLikelihood& lik, const Profile& pr, double lambda) {
    RegressionResult r;
    r.kind = "mixed";
    r.cov_type = "ml";
    r.n = static_cast<std::size_t>(d.y.size());
    r.groups = lik.groups();
    r.lambda = lambda;
    r.sigma2 = pr.sigma2;
    r.tau2 = lambda * pr.sigma2;
    r.log_likelihood = pr.loglik;
    const Eigen::MatrixXd cov = pr.sigma2 * pr.a.inverse();
    for (Eigen::Index k = 0; k < d.x.cols(); ++k) {
        Coefficient c;
        c.name = d.names[static_cast<std::size_t>(k)];
        c.estimate = pr.beta(k);
        c.se = std::sqrt(std::max(0.0, cov(k, k)));
        c.naive_se = c.se;
        c.stat = c.se > 0.0 ? c.estimate / c.se : std::numeric_limits<double>::infinity();
        c.p_value = two_sided_normal(c.stat);
        r.coefficients.push_back(c);
    }
    return r;
}

void check_mixed(const MixedDesign& d) {
    check_design(d.y, d.x, d.names);
    if (d.groups.size() != static_cast<std::size_t>(d.y.size())) throw std::invalid_argument("one group id per row required");
    std::set<std::string> distinct(d.groups.begin(), d.groups.end());
    if (distinct.size() < 2) throw std::invalid_argument("mixed model needs at least 2 groups");
}

}  // namespace

RegressionResult mixed_fit_fixed_lambda(const MixedDesign& d, double lambda) {
    check_mixed(d);
    if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
    MixedLikelihood lik(d);
    return mixed_result(d, lik, lik.at(lambda), lambda);
}

RegressionResult mixed_fit(const MixedDesign& d, const MixedOptions& opt) {
    check_mixed(d);
    MixedLikelihood lik(d);

    std::vector<double> grid = {0.0};
    const double lo = std::log(1e-8), hi = std::log(opt.lambda_max);
    const int pts = std::max(2, opt.grid_points);
    for (int i = 0; i < pts; ++i) grid.push_back(std::exp(lo + (hi - lo) * i / (pts - 1)));

    std::size_t best_i = 0;
    double best_ll = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double ll = lik.at(grid[i]).loglik;
        if (ll > best_ll) {
            best_ll = ll;
            best_i = i;
        }
    }

    double best_lambda = grid[best_i];
    bool converged = true;
    const std::size_t left = best_i == 0 ? 0 : best_i - 1;
    const std::size_t right = std::min(best_i + 1, grid.size() - 1);
    boost::uintmax_t iters = static_cast<boost::uintmax_t>(opt.max_brent_iter);
    std::pair<double, double> found;
    if (grid[left] > 0.0) {
        found = boost::math::tools::brent_find_minima([&](double t) { return -lik.at(std::exp(t)).loglik; },
                                                      std::log(grid[left]), std::log(grid[right]), 52, iters);
        found.first = std::exp(found.first);
    } else {
        found = boost::math::tools::brent_find_minima([&](double l) { return -lik.at(l).loglik; }, grid[left],
                                                      grid[right], 52, iters);
    }
    if (iters >= static_cast<boost::uintmax_t>(opt.max_brent_iter)) converged = false;
    if (-found.second > best_ll) best_lambda = found.first;

    auto r = mixed_result(d, lik, lik.at(best_lambda), best_lambda);
    if (best_i + 1 == grid.size()) {
        converged = false;
        r.warnings.push_back("variance ratio reached the search bound");
    }
    r.converged = converged;
    if (!converged && r.warnings.empty()) r.warnings.push_back("variance ratio search did not converge");
    return r;
}

std::vector<Bin2dCell> bin2d(std::span<const double> x, std::span<const double> y, std::span<const double> outcome,
                             std::size_t bins) {
    if (bins < 2) throw std::invalid_argument("bin2d needs at least 2 bins per axis");
    if (x.size() != y.size() || x.size() != outcome.size()) throw std::invalid_argument("bin2d inputs differ in length");
    double xlo = 0, xhi = 0, ylo = 0, yhi = 0;
    if (!x.empty()) {
        xlo = *std::min_element(x.begin(), x.end());
        xhi = *std::max_element(x.begin(), x.end());
        ylo = *std::min_element(y.begin(), y.end());
        yhi = *std::max_element(y.begin(), y.end());
    }
    auto slot = [bins](double v, double lo, double hi) -> std::size_t {
        if (!(hi > lo)) return 0;
        const auto k = static_cast<std::size_t>(std::floor((v - lo) / (hi - lo) * static_cast<double>(bins)));
        return std::min(k, bins - 1);
    };
    std::vector<Bin2dCell> cells(bins * bins);
    std::vector<double> sums(bins * bins, 0.0);
    const double xw = (xhi - xlo) / static_cast<double>(bins), yw = (yhi - ylo) / static_cast<double>(bins);
    for (std::size_t ix = 0; ix < bins; ++ix)
        for (std::size_t iy = 0; iy < bins; ++iy) {
            auto& c = cells[ix * bins + iy];
            c.ix = ix;
            c.iy = iy;
            c.x_lo = xlo + xw * static_cast<double>(ix);
            c.x_hi = ix + 1 == bins ? xhi : xlo + xw * static_cast<double>(ix + 1);
            c.y_lo = ylo + yw * static_cast<double>(iy);
            c.y_hi = iy + 1 == bins ? yhi : ylo + yw * static_cast<double>(iy + 1);
        }
    for (std::size_t i = 0; i < x.size(); ++i) {
        const std::size_t k = slot(x[i], xlo, xhi) * bins + slot(y[i], ylo, yhi);
        ++cells[k].count;
        sums[k] += outcome[i];
    }
    for (std::size_t k = 0; k < cells.size(); ++k)
        cells[k].mean = cells[k].count ? sums[k] / static_cast<double>(cells[k].count)
                                       : std::numeric_limits<double>::quiet_NaN();
    return cells;
}

}  // namespace evoscope::stats
