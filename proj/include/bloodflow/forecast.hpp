#pragma once

// Forecasting a bank's acceptance ratio `horizon` days past a training window,
// with linear-trend, ARIMA and LSTM models, plus percent-difference scoring.

#include "bloodflow/error.hpp"
#include "bloodflow/lstm.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace bloodflow {

struct ForecastTask {
    int bank_id = 0;
    std::vector<double> series;
    int train_len = 170;
    int horizon = 10;

    std::span<const double> train() const {
        return std::span<const double>(series).first(static_cast<std::size_t>(train_len));
    }
    std::size_t target_index() const { return static_cast<std::size_t>(train_len + horizon - 1); }
    double actual() const { return series.at(target_index()); }

    void validate() const {
        if (train_len < 2) throw ValidationError("must be at least 2", "train_len");
        if (horizon < 1) throw ValidationError("must be at least 1", "horizon");
        if (series.size() < static_cast<std::size_t>(train_len + horizon))
            throw ValidationError("bank " + std::to_string(bank_id) + " has " + std::to_string(series.size()) +
                                      " days; need at least " + std::to_string(train_len + horizon),
                                  "series");
        for (double v : series)
            if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("values must lie in [0,1]", "series");
    }
};

inline double clamp_unit(double v) { return std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : v; }

// ---- linear trend --------------------------------------------------------

struct LinearFit {
    double intercept = 0.0;
    double slope = 0.0;
    double at(double day) const { return intercept + slope * day; }
};

// Ordinary least squares of y on day index 1..n.
inline LinearFit fit_linear(std::span<const double> y) {
    const auto n = static_cast<double>(y.size());
    if (y.size() < 2) throw ValidationError("need at least 2 points", "series");
    const double x_mean = (n + 1.0) / 2.0;
    const double y_mean = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double dx = static_cast<double>(i + 1) - x_mean;
        sxy += dx * (y[i] - y_mean);
        sxx += dx * dx;
    }
    const double slope = sxy / sxx;
    return {y_mean - slope * x_mean, slope};
}

inline double fit_predict_linear(const ForecastTask& task) {
    task.validate();
    const LinearFit fit = fit_linear(task.train());
    return clamp_unit(fit.at(static_cast<double>(task.train_len + task.horizon)));
}

// ---- ARIMA ----------------------------------------------------------------

struct ArimaOrder {
    int p = 1;
    int d = 1;
    int q = 1;
    friend bool operator==(const ArimaOrder&, const ArimaOrder&) = default;
};

inline std::string to_string(const ArimaOrder& o) {
    return std::to_string(o.p) + "," + std::to_string(o.d) + "," + std::to_string(o.q);
}

inline ArimaOrder parse_arima_order(std::string_view text) {
    ArimaOrder o;
    char tail = 0;
    const std::string s(text);
    if (std::sscanf(s.c_str(), "%d,%d,%d%c", &o.p, &o.d, &o.q, &tail) != 3 || o.p < 0 || o.d < 0 || o.q < 0)
        throw ValidationError("expected p,d,q with non-negative integers, got '" + s + "'", "arima_order");
    return o;
}

// Model on the d-times differenced series w:
//   w_t = c + sum_i ar[i] w_{t-1-i} + e_t + sum_j ma[j] e_{t-1-j}
// The constant is estimated only when d == 0.
struct ArimaFit {
    ArimaOrder order;
    double constant = 0.0;
    std::vector<double> ar;
    std::vector<double> ma;
    double css = 0.0;
    bool stable = true;
};

inline std::vector<double> difference(std::span<const double> y, int d) {
    std::vector<double> w(y.begin(), y.end());
    for (int k = 0; k < d; ++k) {
        if (w.size() < 2) return {};
        for (std::size_t i = 0; i + 1 < w.size(); ++i) w[i] = w[i + 1] - w[i];
        w.pop_back();
    }
    return w;
}

namespace detail {

// Minimum-norm least squares; tolerates rank deficiency (e.g. constant series).
inline Eigen::VectorXd least_squares(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    if (X.cols() == 0) return Eigen::VectorXd();
    return X.completeOrthogonalDecomposition().solve(y);
}

// Spectral radius of the companion matrix of x_t = sum coeffs[i] x_{t-1-i}.
inline double companion_radius(const std::vector<double>& coeffs) {
    const auto k = static_cast<Eigen::Index>(coeffs.size());
    if (k == 0) return 0.0;
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(k, k);
    for (Eigen::Index i = 0; i < k; ++i) m(0, i) = coeffs[static_cast<std::size_t>(i)];
    for (Eigen::Index i = 1; i < k; ++i) m(i, i - 1) = 1.0;
    const Eigen::VectorXcd ev = m.eigenvalues();
    double r = 0.0;
    for (Eigen::Index i = 0; i < ev.size(); ++i) r = std::max(r, std::abs(ev(i)));
    return r;
}

inline std::vector<double> negated(std::vector<double> v) {
    for (double& x : v) x = -x;
    return v;
}

inline std::vector<double> css_residuals(std::span<const double> w, const ArimaFit& f) {
    const std::size_t p = f.ar.size(), q = f.ma.size();
    std::vector<double> e(w.size(), 0.0);
    for (std::size_t t = p; t < w.size(); ++t) {
        double pred = f.constant;
        for (std::size_t i = 0; i < p; ++i) pred += f.ar[i] * w[t - 1 - i];
        for (std::size_t j = 0; j < q && j + 1 <= t; ++j) pred += f.ma[j] * e[t - 1 - j];
        e[t] = w[t] - pred;
    }
    return e;
}

inline double css_value(std::span<const double> w, const ArimaFit& f) {
    const auto e = css_residuals(w, f);
    double s = 0.0;
    for (std::size_t t = f.ar.size(); t < e.size(); ++t) s += e[t] * e[t];
    return s;
}

// OLS of w_t on [1?, w lags, extra lags]; rows start at `start`.
inline Eigen::VectorXd lagged_ols(std::span<const double> w, bool constant, std::size_t p,
                                  std::span<const double> extra, std::size_t q, std::size_t start) {
    const auto rows = static_cast<Eigen::Index>(w.size() - start);
    const auto cols = static_cast<Eigen::Index>((constant ? 1 : 0) + p + q);
    Eigen::MatrixXd X(rows, cols);
    Eigen::VectorXd y(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const std::size_t t = start + static_cast<std::size_t>(r);
        Eigen::Index c = 0;
        if (constant) X(r, c++) = 1.0;
        for (std::size_t i = 0; i < p; ++i) X(r, c++) = w[t - 1 - i];
        for (std::size_t j = 0; j < q; ++j) X(r, c++) = extra[t - 1 - j];
        y(r) = w[t];
    }
    return least_squares(X, y);
}

// Nelder-Mead simplex minimization with standard coefficients.
template <class F>
std::vector<double> nelder_mead(F f, std::vector<double> x0, int max_iter = 2000, double tol = 1e-12) {
    const std::size_t n = x0.size();
    if (n == 0) return x0;
    std::vector<std::vector<double>> pts(n + 1, x0);
    for (std::size_t i = 0; i < n; ++i) pts[i + 1][i] += (std::abs(x0[i]) > 1e-3 ? 0.1 * x0[i] : 0.05);
    std::vector<double> vals(n + 1);
    for (std::size_t i = 0; i <= n; ++i) vals[i] = f(pts[i]);

    auto combine = [&](const std::vector<double>& a, const std::vector<double>& b, double t) {
        std::vector<double> out(n);
        for (std::size_t k = 0; k < n; ++k) out[k] = a[k] + t * (b[k] - a[k]);
        return out;
    };

    for (int iter = 0; iter < max_iter; ++iter) {
        std::vector<std::size_t> idx(n + 1);
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
        std::vector<std::vector<double>> sp;
        std::vector<double> sv;
        for (std::size_t i : idx) {
            sp.push_back(pts[i]);
            sv.push_back(vals[i]);
        }
        pts = std::move(sp);
        vals = std::move(sv);
        if (std::abs(vals[n] - vals[0]) <= tol * (std::abs(vals[0]) + tol)) break;

        std::vector<double> centroid(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < n; ++k) centroid[k] += pts[i][k] / static_cast<double>(n);

        const auto reflected = combine(centroid, pts[n], -1.0);
        const double fr = f(reflected);
        if (fr < vals[0]) {
            const auto expanded = combine(centroid, pts[n], -2.0);
            const double fe = f(expanded);
            if (fe < fr) {
                pts[n] = expanded;
                vals[n] = fe;
            } else {
                pts[n] = reflected;
                vals[n] = fr;
            }
        } else if (fr < vals[n - 1]) {
            pts[n] = reflected;
            vals[n] = fr;
        } else {
            const bool outside = fr < vals[n];
            const auto contracted = combine(centroid, outside ? reflected : pts[n], 0.5);
            const double fc = f(contracted);
            if (fc < std::min(fr, vals[n])) {
                pts[n] = contracted;
                vals[n] = fc;
            } else {
                for (std::size_t i = 1; i <= n; ++i) {
                    pts[i] = combine(pts[0], pts[i], 0.5);
                    vals[i] = f(pts[i]);
                }
            }
        }
    }
    return pts[static_cast<std::size_t>(std::min_element(vals.begin(), vals.end()) - vals.begin())];
}

}  // namespace detail

// Conditional-sum-of-squares fit. Pure AR orders are solved exactly by OLS; orders
// with MA terms start from a Hannan-Rissanen estimate refined by Nelder-Mead.
inline ArimaFit fit_arima(std::span<const double> y, ArimaOrder order) {
    if (order.p < 0 || order.d < 0 || order.q < 0) throw ValidationError("orders must be non-negative", "arima_order");
    const auto p = static_cast<std::size_t>(order.p), q = static_cast<std::size_t>(order.q);
    if (static_cast<long>(y.size()) <= order.p + order.d + order.q + 10)
        throw ValidationError("series too short for the requested order", "series");

    const std::vector<double> w = difference(y, order.d);
    const bool constant = order.d == 0;
    ArimaFit fit;
    fit.order = order;

    if (q == 0) {
        const Eigen::VectorXd beta = detail::lagged_ols(w, constant, p, {}, 0, p);
        Eigen::Index c = 0;
        if (constant) fit.constant = beta(c++);
        for (std::size_t i = 0; i < p; ++i) fit.ar.push_back(beta(c++));
    } else {
        // Long autoregression for innovation estimates, then OLS on lags of w and those innovations.
        const std::size_t m = std::min<std::size_t>(std::max<std::size_t>(p + q + 2, 8), w.size() / 4);
        const Eigen::VectorXd long_ar = detail::lagged_ols(w, constant, m, {}, 0, m);
        std::vector<double> innov(w.size(), 0.0);
        for (std::size_t t = m; t < w.size(); ++t) {
            double pred = constant ? long_ar(0) : 0.0;
            for (std::size_t i = 0; i < m; ++i) pred += long_ar(static_cast<Eigen::Index>((constant ? 1 : 0) + i)) * w[t - 1 - i];
            innov[t] = w[t] - pred;
        }
        const std::size_t start = m + q;
        const Eigen::VectorXd beta = detail::lagged_ols(w, constant, p, innov, q, start);

        std::vector<double> x0(beta.data(), beta.data() + beta.size());
        auto unpack = [&](const std::vector<double>& x) {
            ArimaFit f;
            f.order = order;
            std::size_t c = 0;
            if (constant) f.constant = x[c++];
            for (std::size_t i = 0; i < p; ++i) f.ar.push_back(x[c++]);
            for (std::size_t j = 0; j < q; ++j) f.ma.push_back(x[c++]);
            return f;
        };
        auto objective = [&](const std::vector<double>& x) {
            const ArimaFit f = unpack(x);
            // Keep the search inside the invertible region.
            if (detail::companion_radius(detail::negated(f.ma)) >= 1.0)
                return std::numeric_limits<double>::infinity();
            const double v = detail::css_value(w, f);
            return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
        };
        if (!std::isfinite(objective(x0))) std::fill(x0.begin(), x0.end(), 0.0);
        fit = unpack(detail::nelder_mead(objective, x0));
    }

    fit.css = detail::css_value(w, fit);
    // MA invertibility: the innovation recursion e_t = ... - sum ma[j] e_{t-1-j} must be stable.
    fit.stable = std::isfinite(fit.css) && detail::companion_radius(fit.ar) < 1.0 &&
                 detail::companion_radius(detail::negated(fit.ma)) < 1.0;
    for (double v : fit.ar) fit.stable = fit.stable && std::isfinite(v);
    for (double v : fit.ma) fit.stable = fit.stable && std::isfinite(v);
    return fit;
}

// Recursive multi-step forecast of the original (undifferenced) series with
// future innovations set to zero. Returns `steps` values following y.
inline std::vector<double> forecast_arima(std::span<const double> y, const ArimaFit& fit, int steps) {
    const int d = fit.order.d;
    std::vector<std::vector<double>> levels{std::vector<double>(y.begin(), y.end())};
    for (int k = 0; k < d; ++k) levels.push_back(difference(levels.back(), 1));

    std::vector<double> w = levels.back();
    std::vector<double> e = detail::css_residuals(w, fit);
    for (int h = 0; h < steps; ++h) {
        const std::size_t t = w.size();
        double next = fit.constant;
        for (std::size_t i = 0; i < fit.ar.size(); ++i) next += fit.ar[i] * (t >= i + 1 ? w[t - 1 - i] : 0.0);
        for (std::size_t j = 0; j < fit.ma.size(); ++j) next += fit.ma[j] * (t >= j + 1 ? e[t - 1 - j] : 0.0);
        w.push_back(next);
        e.push_back(0.0);
    }
    std::vector<double> out(w.end() - steps, w.end());
    // Integrate back up one differencing level at a time.
    for (int k = d - 1; k >= 0; --k) {
        double last = levels[static_cast<std::size_t>(k)].back();
        for (double& v : out) {
            last += v;
            v = last;
        }
    }
    return out;
}

struct ArimaPrediction {
    double value = 0.0;
    bool fallback = false;
    ArimaFit fit;
};

// Falls back to the linear prediction when the fit is explosive or non-invertible.
inline ArimaPrediction fit_predict_arima(const ForecastTask& task, ArimaOrder order) {
    task.validate();
    ArimaPrediction out;
    out.fit = fit_arima(task.train(), order);
    if (out.fit.stable) {
        const double v = forecast_arima(task.train(), out.fit, task.horizon).back();
        if (std::isfinite(v)) {
            out.value = clamp_unit(v);
            return out;
        }
    }
    out.fallback = true;
    out.value = fit_predict_linear(task);
    return out;
}

// ---- LSTM -----------------------------------------------------------------

inline double fit_predict_lstm(const ForecastTask& task, const LstmConfig& cfg) {
    task.validate();
    cfg.validate();
    if (cfg.lookback >= task.train_len) throw ValidationError("must be below train_len", "lookback");
    const auto train = task.train();
    const auto [lo_it, hi_it] = std::minmax_element(train.begin(), train.end());
    const double lo = *lo_it;
    const double scale = *hi_it > lo ? *hi_it - lo : 1.0;
    std::vector<double> norm(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) norm[i] = (train[i] - lo) / scale;

    Lstm net(cfg.hidden, cfg.init_seed);
    train_lstm(net, norm, cfg);

    const auto lookback = static_cast<std::size_t>(cfg.lookback);
    std::vector<double> window(norm.end() - static_cast<std::ptrdiff_t>(lookback), norm.end());
    double next = 0.0;
    for (int h = 0; h < task.horizon; ++h) {
        next = net.predict(window);
        window.erase(window.begin());
        window.push_back(next);
    }
    return clamp_unit(lo + next * scale);
}

// ---- evaluation -------------------------------------------------------------

enum class ModelKind : std::uint8_t { linear, arima, lstm };

constexpr std::string_view to_string(ModelKind k) noexcept {
    switch (k) {
        case ModelKind::linear: return "linear";
        case ModelKind::arima: return "arima";
        case ModelKind::lstm: return "lstm";
    }
    return "";
}

inline ModelKind parse_model_kind(std::string_view s) {
    for (ModelKind k : {ModelKind::linear, ModelKind::arima, ModelKind::lstm})
        if (to_string(k) == s) return k;
    throw ValidationError("unknown model '" + std::string(s) + "'", "model");
}

struct ModelConfig {
    ModelKind kind = ModelKind::linear;
    ArimaOrder arima_order;
    LstmConfig lstm;
};

struct BankForecast {
    int bank_id = 0;
    double predicted = 0.0;
    double actual = 0.0;
    double percent_difference = 0.0;
    bool fallback = false;
};

struct EvalResult {
    std::string model;
    std::optional<ArimaOrder> arima_order;
    std::vector<BankForecast> per_bank;
    std::vector<int> excluded_banks;
    double mean_percent_difference = 0.0;
};

// |predicted - actual| / actual * 100.
inline double percent_difference(double predicted, double actual) {
    if (!(actual > 0.0)) throw ValidationError("actual must be positive", "actual");
    return std::abs(predicted - actual) / actual * 100.0;
}

inline EvalResult evaluate_model(std::span<const ForecastTask> tasks, const ModelConfig& cfg) {
    if (tasks.empty()) throw ValidationError("need at least one task", "tasks");
    EvalResult res;
    res.model = std::string(to_string(cfg.kind));
    if (cfg.kind == ModelKind::arima) res.arima_order = cfg.arima_order;

    std::vector<const ForecastTask*> ordered;
    for (const auto& t : tasks) ordered.push_back(&t);
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const ForecastTask* a, const ForecastTask* b) { return a->bank_id < b->bank_id; });

    double sum = 0.0;
    for (const ForecastTask* task : ordered) {
        task->validate();
        const double actual = task->actual();
        if (!(actual > 0.0)) {
            res.excluded_banks.push_back(task->bank_id);
            continue;
        }
        BankForecast bf;
        bf.bank_id = task->bank_id;
        bf.actual = actual;
        switch (cfg.kind) {
            case ModelKind::linear: bf.predicted = fit_predict_linear(*task); break;
            case ModelKind::arima: {
                const auto pred = fit_predict_arima(*task, cfg.arima_order);
                bf.predicted = pred.value;
                bf.fallback = pred.fallback;
                break;
            }
            case ModelKind::lstm: bf.predicted = fit_predict_lstm(*task, cfg.lstm); break;
        }
        bf.percent_difference = percent_difference(bf.predicted, actual);
        sum += bf.percent_difference;
        res.per_bank.push_back(bf);
    }
    res.mean_percent_difference =
        res.per_bank.empty() ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(res.per_bank.size());
    return res;
}

inline std::vector<EvalResult> evaluate_models(std::span<const ForecastTask> tasks,
                                               std::span<const ModelConfig> configs) {
    std::vector<EvalResult> out;
    for (const auto& cfg : configs) out.push_back(evaluate_model(tasks, cfg));
    return out;
}

// ---- acceptance_series.csv ------------------------------------------------

// bank_id -> ratios ordered by day. Days must run 1..n without gaps per bank.
inline std::map<int, std::vector<double>> read_acceptance_series(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line.rfind("bank_id,day,ratio", 0) != 0)
        throw ValidationError("expected header bank_id,day,ratio", "series");
    std::map<int, std::vector<double>> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        int bank = 0;
        std::size_t day = 0;
        double ratio = 0.0;
        if (std::sscanf(line.c_str(), "%d,%zu,%lf", &bank, &day, &ratio) != 3)
            throw ValidationError("malformed row at line " + std::to_string(line_no), "series");
        auto& values = out[bank];
        if (day != values.size() + 1)
            throw ValidationError("day out of sequence at line " + std::to_string(line_no), "series");
        values.push_back(ratio);
    }
    return out;
}

inline std::vector<ForecastTask> tasks_from_series(const std::map<int, std::vector<double>>& series, int train_len = 170,
                                                   int horizon = 10) {
    std::vector<ForecastTask> tasks;
    for (const auto& [bank, values] : series) {
        ForecastTask t{bank, values, train_len, horizon};
        t.validate();
        tasks.push_back(std::move(t));
    }
    return tasks;
}

inline void to_json(nlohmann::json& j, const EvalResult& r) {
    j = nlohmann::json::object();
    j["model"] = r.model;
    if (r.arima_order) j["arima_order"] = {r.arima_order->p, r.arima_order->d, r.arima_order->q};
    nlohmann::json banks = nlohmann::json::array();
    for (const auto& b : r.per_bank)
        banks.push_back({{"bank_id", b.bank_id},
                         {"predicted", b.predicted},
                         {"actual", b.actual},
                         {"percent_difference", b.percent_difference},
                         {"fallback", b.fallback}});
    j["per_bank"] = std::move(banks);
    j["excluded_banks"] = r.excluded_banks;
    j["mean_percent_difference"] = r.mean_percent_difference;
}

}  // namespace bloodflow
