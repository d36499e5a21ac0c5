#include "polka_te/predictor.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <ostream>

#include "polka_te/text.hpp"

namespace polka_te {

double rmse(std::span<const double> pred, std::span<const double> obs) {
    using Map = Eigen::Map<const Eigen::VectorXd>;
    return rmse(Map(pred.data(), static_cast<Eigen::Index>(pred.size())),
                Map(obs.data(), static_cast<Eigen::Index>(obs.size())));
}

TrainTestSplit split_train_test(std::span<const double> series, double train_fraction) {
    if (series.size() < 8) {
        throw std::invalid_argument("split_train_test: need at least 8 samples, got " + std::to_string(series.size()));
    }
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw std::invalid_argument("split_train_test: train fraction must be in (0, 1)");
    }
    const auto cut = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(series.size())));
    return {{series.begin(), series.begin() + static_cast<std::ptrdiff_t>(cut)},
            {series.begin() + static_cast<std::ptrdiff_t>(cut), series.end()}};
}

void Regressor::check_training_data(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    if (X.rows() < 1 || X.cols() < 1) throw std::invalid_argument(std::string("fit: empty training data"));
    if (X.rows() != y.size()) {
        throw std::invalid_argument("fit: " + std::to_string(X.rows()) + " rows but " + std::to_string(y.size()) +
                                    " targets");
    }
    if (!X.allFinite() || !y.allFinite()) throw std::invalid_argument("fit: non-finite training data");
}

void Regressor::fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    check_training_data(X, y);
    do_fit(X, y);
    n_features_ = X.cols();
}

Eigen::VectorXd Regressor::predict(const Eigen::MatrixXd& X) const {
    if (!fitted()) throw NotFitted(name() + ": predict before fit");
    if (X.cols() != n_features_) {
        throw std::invalid_argument(name() + ": expected " + std::to_string(n_features_) + " features, got " +
                                    std::to_string(X.cols()));
    }
    return do_predict(X);
}

// ---------------------------------------------------------------- linear

void LinearModel::do_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    const Eigen::RowVectorXd x_mean = X.colwise().mean();
    const double y_mean = y.mean();
    const Eigen::MatrixXd Xc = X.rowwise() - x_mean;
    const Eigen::VectorXd yc = y.array() - y_mean;

    Eigen::MatrixXd gram = Xc.transpose() * Xc;
    const Eigen::VectorXd rhs = Xc.transpose() * yc;
    if (lambda_ > 0.0) {
        gram.diagonal().array() += lambda_;
        coef_ = gram.ldlt().solve(rhs);
    } else {
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(Xc);
        if (cod.rank() == Xc.cols()) {
            coef_ = gram.ldlt().solve(rhs);
        } else {
            coef_ = cod.solve(yc);  // minimum-norm solution
        }
    }
    intercept_ = y_mean - x_mean.dot(coef_);
}

Eigen::VectorXd LinearModel::do_predict(const Eigen::MatrixXd& X) const {
    return (X * coef_).array() + intercept_;
}

namespace {

double soft_threshold(double z, double gamma) {
    if (z > gamma) return z - gamma;
    if (z < -gamma) return z + gamma;
    return 0.0;
}

}  // namespace

void LassoRegression::do_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    const auto n = static_cast<double>(X.rows());
    const Eigen::RowVectorXd x_mean = X.colwise().mean();
    const double y_mean = y.mean();
    const Eigen::MatrixXd Xc = X.rowwise() - x_mean;
    const Eigen::VectorXd col_sq = Xc.colwise().squaredNorm();

    coef_ = Eigen::VectorXd::Zero(X.cols());
    Eigen::VectorXd residual = y.array() - y_mean;
    iterations_ = 0;
    for (int it = 0; it < max_iter_; ++it) {
        ++iterations_;
        double max_step = 0.0, max_w = 0.0;
        for (Eigen::Index j = 0; j < Xc.cols(); ++j) {
            if (col_sq(j) == 0.0) continue;
            const double old = coef_(j);
            const double rho = Xc.col(j).dot(residual) + col_sq(j) * old;
            const double w = soft_threshold(rho, alpha_ * n) / col_sq(j);
            if (w != old) {
                residual -= (w - old) * Xc.col(j);
                coef_(j) = w;
            }
            max_step = std::max(max_step, std::abs(w - old));
            max_w = std::max(max_w, std::abs(w));
        }
        if (max_w == 0.0 || max_step < tol_ * std::max(1.0, max_w)) break;
    }
    intercept_ = y_mean - x_mean.dot(coef_);
}

// ---------------------------------------------------------------- trees

void DecisionTree::do_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    std::vector<Eigen::Index> rows(static_cast<std::size_t>(X.rows()));
    std::iota(rows.begin(), rows.end(), Eigen::Index{0});
    std::mt19937_64 rng(seed_);
    nodes_.clear();
    grow(X, y, rows, 0, rows.size(), 0, rng);
}

void DecisionTree::fit_rows(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::vector<Eigen::Index> rows) {
    check_training_data(X, y);
    if (rows.empty()) throw std::invalid_argument("fit_rows: empty row set");
    std::mt19937_64 rng(seed_);
    nodes_.clear();
    grow(X, y, rows, 0, rows.size(), 0, rng);
    mark_fitted(X.cols());
}

int DecisionTree::grow(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::vector<Eigen::Index>& rows,
                       std::size_t lo, std::size_t hi, int depth, std::mt19937_64& rng) {
    const std::size_t n = hi - lo;
    double sum = 0.0;
    for (std::size_t i = lo; i < hi; ++i) sum += y(rows[i]);
    const auto self = static_cast<int>(nodes_.size());
    nodes_.push_back({});
    nodes_[static_cast<std::size_t>(self)].value = sum / static_cast<double>(n);

    bool pure = true;
    for (std::size_t i = lo + 1; i < hi && pure; ++i) pure = y(rows[i]) == y(rows[lo]);
    if (pure || n < static_cast<std::size_t>(std::max(2, params_.min_samples_split)) ||
        (params_.max_depth >= 0 && depth >= params_.max_depth)) {
        return self;
    }

    const auto p = static_cast<int>(X.cols());
    std::vector<int> features(static_cast<std::size_t>(p));
    std::iota(features.begin(), features.end(), 0);
    int wanted = p;
    if (params_.max_features > 0 && params_.max_features < p) {
        std::shuffle(features.begin(), features.end(), rng);
        wanted = params_.max_features;
    }

    // Maximizing sl^2/nl + sr^2/nr is the same as minimizing the children's SSE.
    int best_feature = -1;
    double best_score = -std::numeric_limits<double>::infinity();
    double best_threshold = 0.0;
    std::vector<std::pair<double, double>> xy(n);
    for (int k = 0; k < p; ++k) {
        if (k >= wanted && best_feature >= 0) break;  // keep looking only while nothing splits
        const int f = features[static_cast<std::size_t>(k)];
        for (std::size_t i = 0; i < n; ++i) xy[i] = {X(rows[lo + i], f), y(rows[lo + i])};
        std::sort(xy.begin(), xy.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        double left = 0.0;
        for (std::size_t i = 1; i < n; ++i) {
            left += xy[i - 1].second;
            if (!(xy[i - 1].first < xy[i].first)) continue;
            const auto nl = static_cast<double>(i);
            const auto nr = static_cast<double>(n - i);
            const double right = sum - left;
            const double score = left * left / nl + right * right / nr;
            if (score > best_score) {
                best_score = score;
                best_feature = f;
                best_threshold = xy[i - 1].first + (xy[i].first - xy[i - 1].first) / 2.0;
                if (!(best_threshold < xy[i].first)) best_threshold = xy[i - 1].first;
            }
        }
    }
    if (best_feature < 0) return self;  // all rows identical in every feature

    const auto mid_it = std::partition(rows.begin() + static_cast<std::ptrdiff_t>(lo),
                                       rows.begin() + static_cast<std::ptrdiff_t>(hi),
                                       [&](Eigen::Index r) { return X(r, best_feature) <= best_threshold; });
    const auto mid = static_cast<std::size_t>(mid_it - rows.begin());
    const int left_child = grow(X, y, rows, lo, mid, depth + 1, rng);
    const int right_child = grow(X, y, rows, mid, hi, depth + 1, rng);
    auto& node = nodes_[static_cast<std::size_t>(self)];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = left_child;
    node.right = right_child;
    return self;
}

double DecisionTree::predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    if (nodes_.empty()) throw NotFitted("DTR: predict before fit");
    std::size_t i = 0;
    while (nodes_[i].feature >= 0) {
        i = static_cast<std::size_t>(x(nodes_[i].feature) <= nodes_[i].threshold ? nodes_[i].left : nodes_[i].right);
    }
    return nodes_[i].value;
}

Eigen::VectorXd DecisionTree::do_predict(const Eigen::MatrixXd& X) const {
    Eigen::VectorXd out(X.rows());
    for (Eigen::Index r = 0; r < X.rows(); ++r) out(r) = predict_row(X.row(r));
    return out;
}

int DecisionTree::depth() const {
    if (nodes_.empty()) return 0;
    int deepest = 0;
    std::vector<std::pair<std::size_t, int>> stack{{0, 0}};
    while (!stack.empty()) {
        const auto [i, d] = stack.back();
        stack.pop_back();
        deepest = std::max(deepest, d);
        if (nodes_[i].feature >= 0) {
            stack.emplace_back(static_cast<std::size_t>(nodes_[i].left), d + 1);
            stack.emplace_back(static_cast<std::size_t>(nodes_[i].right), d + 1);
        }
    }
    return deepest;
}

void RandomForest::do_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    if (params_.n_trees < 1) throw std::invalid_argument("RFR: n_trees must be >= 1");
    const auto p = static_cast<int>(X.cols());
    TreeParams tp = params_.tree;
    tp.max_features = params_.max_features > 0 ? std::min(params_.max_features, p) : (p + 2) / 3;

    std::mt19937_64 rng(seed_);
    std::uniform_int_distribution<Eigen::Index> pick(0, X.rows() - 1);
    trees_.clear();
    trees_.reserve(static_cast<std::size_t>(params_.n_trees));
    for (int t = 0; t < params_.n_trees; ++t) {
        std::vector<Eigen::Index> rows(static_cast<std::size_t>(X.rows()));
        if (params_.bootstrap) {
            for (auto& r : rows) r = pick(rng);
        } else {
            std::iota(rows.begin(), rows.end(), Eigen::Index{0});
        }
        trees_.emplace_back(tp, rng());
        trees_.back().fit_rows(X, y, std::move(rows));
    }
}

Eigen::VectorXd RandomForest::do_predict(const Eigen::MatrixXd& X) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(X.rows());
    for (const auto& t : trees_) out += t.predict(X);
    return out / static_cast<double>(trees_.size());
}

void GradientBoosting::do_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    init_ = y.mean();
    Eigen::VectorXd current = Eigen::VectorXd::Constant(y.size(), init_);
    stages_.clear();
    stages_.reserve(static_cast<std::size_t>(params_.n_stages));
    TreeParams tp;
    tp.max_depth = params_.max_depth;
    for (int s = 0; s < params_.n_stages; ++s) {
        const Eigen::VectorXd residual = y - current;
        stages_.emplace_back(tp, seed_ + static_cast<std::uint64_t>(s));
        stages_.back().fit(X, residual);
        current += params_.learning_rate * stages_.back().predict(X);
    }
}

Eigen::VectorXd GradientBoosting::do_predict(const Eigen::MatrixXd& X) const {
    Eigen::VectorXd out = Eigen::VectorXd::Constant(X.rows(), init_);
    for (const auto& t : stages_) out += params_.learning_rate * t.predict(X);
    return out;
}

// ---------------------------------------------------------------- selection

const std::vector<std::string>& model_names() {
    static const std::vector<std::string> names{"LR", "Ridge", "Lasso", "DTR", "RFR", "GBR"};
    return names;
}

std::unique_ptr<Regressor> make_model(const std::string& name, std::uint64_t seed) {
    if (name == "LR") return std::make_unique<LinearModel>();
    if (name == "Ridge") return std::make_unique<RidgeRegression>();
    if (name == "Lasso") return std::make_unique<LassoRegression>();
    if (name == "DTR") return std::make_unique<DecisionTree>(TreeParams{}, seed);
    if (name == "RFR") return std::make_unique<RandomForest>(ForestParams{}, seed);
    if (name == "GBR") return std::make_unique<GradientBoosting>(BoostingParams{}, seed);
    throw std::invalid_argument("unknown model '" + name + "'");
}

std::string select_best(const std::map<std::string, std::vector<double>>& reports) {
    if (reports.empty()) throw std::invalid_argument("select_best: no reports");
    std::string best;
    double best_norm = std::numeric_limits<double>::infinity();
    for (const auto& [name, errs] : reports) {  // map order is lexicographic
        double sq = 0.0;
        for (const double e : errs) sq += e * e;
        const double norm = std::sqrt(sq);
        if (best.empty() || norm < best_norm) {
            best = name;
            best_norm = norm;
        }
    }
    return best;
}

std::vector<double> forecast(const Regressor& model, const Standardizer& scaler, std::span<const double> history,
                             int steps) {
    if (steps < 1) throw std::invalid_argument("forecast: steps must be >= 1");
    if (!model.fitted()) throw NotFitted("forecast: model is not fitted");
    const auto n_lags = model.n_features();
    if (static_cast<Eigen::Index>(history.size()) != n_lags) {
        throw std::invalid_argument("forecast: history has " + std::to_string(history.size()) + " values, model uses " +
                                    std::to_string(n_lags) + " lags");
    }
    if (scaler.means().size() != 1) throw std::invalid_argument("forecast: scaler must be fitted on a single series");
    const double mean = scaler.means()(0), sd = scaler.stds()(0);

    Eigen::MatrixXd window(1, n_lags);
    for (Eigen::Index j = 0; j < n_lags; ++j) window(0, j) = (history[static_cast<std::size_t>(j)] - mean) / sd;
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(steps));
    for (int s = 0; s < steps; ++s) {
        const double z = model.predict(window)(0);
        out.push_back(std::max(0.0, z * sd + mean));
        for (Eigen::Index j = 0; j + 1 < n_lags; ++j) window(0, j) = window(0, j + 1);
        window(0, n_lags - 1) = z;
    }
    return out;
}

namespace {

Eigen::MatrixXd as_column(std::span<const double> v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> as_vector(const Eigen::MatrixXd& col) { return {col.data(), col.data() + col.size()}; }

}  // namespace

Forecaster fit_forecaster(std::span<const double> series, const std::string& model_name, int n_lags,
                          std::uint64_t seed) {
    Forecaster f;
    f.n_lags = n_lags;
    f.model = make_model(model_name, seed);
    f.scaler.fit(as_column(series));
    const auto scaled = as_vector(f.scaler.transform(as_column(series)));
    const auto ds = lagged_dataset(scaled, n_lags);
    f.model->fit(ds.X, ds.y);
    return f;
}

EvalReport evaluate_models(const SeriesTable& table, const EvalConfig& config) {
    if (config.models.empty()) throw std::invalid_argument("evaluate_models: no models");
    EvalReport report;
    report.paths = table.names;
    for (const auto& m : config.models) report.rmse[m] = {};

    for (const auto& path : table.names) {
        const auto parts = split_train_test(table.column(path), config.train_fraction);
        if (parts.test.size() <= static_cast<std::size_t>(config.n_lags)) {
            throw std::invalid_argument("evaluate_models: test split of '" + path + "' is shorter than the lag window");
        }
        Standardizer scaler;
        scaler.fit(as_column(parts.train));  // the test part is not touched before this point
        report.scaler_fit_rows.push_back(scaler.fit_rows());
        report.scaler_means.push_back(scaler.means()(0));
        const auto train = lagged_dataset(as_vector(scaler.transform(as_column(parts.train))), config.n_lags);
        const auto test = lagged_dataset(as_vector(scaler.transform(as_column(parts.test))), config.n_lags);
        const Eigen::VectorXd observed = scaler.inverse_transform(test.y);

        const Eigen::VectorXd last = scaler.inverse_transform(test.X.col(config.n_lags - 1));
        const double baseline = rmse(last, observed);
        report.persistence_rmse.push_back(baseline);

        for (const auto& m : config.models) {
            auto model = make_model(m, config.seed);
            model->fit(train.X, train.y);
            const Eigen::VectorXd pred = scaler.inverse_transform(model->predict(test.X));
            const double err = rmse(pred, observed);
            report.rmse[m].push_back(err);
            report.rows.push_back({m, path, err, err < baseline});
        }
    }
    report.chosen_model = select_best(report.rmse);
    return report;
}

void write_report_csv(std::ostream& os, const EvalReport& report) {
    os << "# schema_version=1\n";
    os << "model,path,rmse,beats_persistence\n";
    for (const auto& r : report.rows) {
        os << r.model << ',' << r.path << ',' << format_number(r.rmse) << ',' << (r.beats_persistence ? 1 : 0)
           << '\n';
    }
    for (std::size_t i = 0; i < report.paths.size(); ++i) {
        os << "persistence," << report.paths[i] << ',' << format_number(report.persistence_rmse[i]) << ",0\n";
    }
}

void write_scatter_csv(std::ostream& os, const EvalReport& report) {
    os << "model,x,y\n";
    auto row = [&](const std::string& name, const std::vector<double>& errs) {
        os << name << ',' << format_number(errs.size() > 0 ? errs[0] : 0.0) << ','
           << format_number(errs.size() > 1 ? errs[1] : 0.0) << '\n';
    };
    for (const auto& [name, errs] : report.rmse) row(name, errs);
    row("persistence", report.persistence_rmse);
}

}  // namespace polka_te
