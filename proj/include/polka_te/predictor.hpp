#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "polka_te/telemetry.hpp"

namespace polka_te {

struct NotFitted : std::logic_error {
    using std::logic_error::logic_error;
};

/// Per-column standard scaling with population std (divisor N).
template <typename Scalar>
class BasicStandardizer {
public:
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Row = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

    void fit(const Matrix& train) {
        if (fitted()) throw std::logic_error("standardizer is already fitted");
        if (train.rows() < 1 || train.cols() < 1) throw std::invalid_argument("standardizer: empty training data");
        if (!train.allFinite()) throw std::invalid_argument("standardizer: non-finite training data");
        means_ = train.colwise().mean();
        const Matrix centered = train.rowwise() - means_;
        stds_ = (centered.array().square().colwise().sum() / static_cast<Scalar>(train.rows())).sqrt().matrix();
        constant_.assign(static_cast<std::size_t>(train.cols()), false);
        for (Eigen::Index j = 0; j < stds_.size(); ++j) {
            if (!(stds_(j) > Scalar(0))) {
                stds_(j) = Scalar(1);
                constant_[static_cast<std::size_t>(j)] = true;
            }
        }
        fit_rows_ = train.rows();
    }

    Matrix transform(const Matrix& X) const {
        check(X);
        return (X.rowwise() - means_).array().rowwise() / stds_.array();
    }

    Matrix inverse_transform(const Matrix& Z) const {
        check(Z);
        return (Z.array().rowwise() * stds_.array()).matrix().rowwise() + means_;
    }

    bool fitted() const { return fit_rows_ > 0; }
    /// Number of rows seen by fit(); lets callers assert the training split size.
    Eigen::Index fit_rows() const { return fit_rows_; }
    const Row& means() const { return means_; }
    const Row& stds() const { return stds_; }
    const std::vector<bool>& constant_columns() const { return constant_; }

private:
    void check(const Matrix& X) const {
        if (!fitted()) throw NotFitted("standardizer used before fit");
        if (X.cols() != means_.size()) {
            throw std::invalid_argument("standardizer: expected " + std::to_string(means_.size()) + " columns, got " +
                                        std::to_string(X.cols()));
        }
    }

    Row means_, stds_;
    std::vector<bool> constant_;
    Eigen::Index fit_rows_ = 0;
};

using Standardizer = BasicStandardizer<double>;

template <typename Derived, typename Other>
typename Derived::Scalar rmse(const Eigen::MatrixBase<Derived>& pred, const Eigen::MatrixBase<Other>& obs) {
    if (pred.size() != obs.size()) {
        throw std::invalid_argument("rmse: length mismatch (" + std::to_string(pred.size()) + " vs " +
                                    std::to_string(obs.size()) + ")");
    }
    if (pred.size() == 0) throw std::invalid_argument("rmse: empty input");
    return std::sqrt((pred.derived().array() - obs.derived().array()).square().mean());
}

double rmse(std::span<const double> pred, std::span<const double> obs);

/// Chronological split at floor(fraction * N); needs N >= 8.
struct TrainTestSplit {
    std::vector<double> train;
    std::vector<double> test;
};

TrainTestSplit split_train_test(std::span<const double> series, double train_fraction = 0.75);

class Regressor {
public:
    virtual ~Regressor() = default;

    void fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);
    Eigen::VectorXd predict(const Eigen::MatrixXd& X) const;

    virtual std::string name() const = 0;
    bool fitted() const { return n_features_ > 0; }
    Eigen::Index n_features() const { return n_features_; }

protected:
    virtual void do_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) = 0;
    virtual Eigen::VectorXd do_predict(const Eigen::MatrixXd& X) const = 0;
    static void check_training_data(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);
    void mark_fitted(Eigen::Index n_features) { n_features_ = n_features; }

private:
    Eigen::Index n_features_ = 0;
};

/// Least squares with intercept. lambda > 0 adds an L2 penalty on the slopes.
class LinearModel : public Regressor {
public:
    explicit LinearModel(double lambda = 0.0, std::string name = "LR") : lambda_(lambda), name_(std::move(name)) {}

    std::string name() const override { return name_; }
    double intercept() const { return intercept_; }
    const Eigen::VectorXd& coefficients() const { return coef_; }

protected:
    void do_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) override;
    Eigen::VectorXd do_predict(const Eigen::MatrixXd& X) const override;

    double lambda_;
    std::string name_;
    double intercept_ = 0.0;
    Eigen::VectorXd coef_;
};

class RidgeRegression : public LinearModel {
public:
    explicit RidgeRegression(double lambda = 1.0) : LinearModel(lambda, "Ridge") {}
};

/// Coordinate descent on (1/2n)|y - Xw - b|^2 + alpha |w|_1.
class LassoRegression : public LinearModel {
public:
    explicit LassoRegression(double alpha = 0.1, int max_iter = 1000, double tol = 1e-6)
        : LinearModel(0.0, "Lasso"), alpha_(alpha), max_iter_(max_iter), tol_(tol) {}

    int iterations() const { return iterations_; }

protected:
    void do_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) override;

private:
    double alpha_;
    int max_iter_;
    double tol_;
    int iterations_ = 0;
};

struct TreeParams {
    int max_depth = -1;  // -1: unlimited
    int min_samples_split = 2;
    int max_features = 0;  // 0: all features
};

/// CART regression tree, squared-error splits.
class DecisionTree : public Regressor {
public:
    explicit DecisionTree(TreeParams params = {}, std::uint64_t seed = 0) : params_(params), seed_(seed) {}

    std::string name() const override { return "DTR"; }
    std::size_t node_count() const { return nodes_.size(); }
    int depth() const;

    /// Fits on a subset of rows (duplicates allowed, as in a bootstrap sample).
    void fit_rows(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::vector<Eigen::Index> rows);
    double predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;

protected:
    void do_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) override;
    Eigen::VectorXd do_predict(const Eigen::MatrixXd& X) const override;

private:
    struct Node {
        int feature = -1;  // -1: leaf
        double threshold = 0.0;
        int left = -1, right = -1;
        double value = 0.0;
    };

    int grow(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::vector<Eigen::Index>& rows, std::size_t lo,
             std::size_t hi, int depth, std::mt19937_64& rng);

    TreeParams params_;
    std::uint64_t seed_;
    std::vector<Node> nodes_;
};

struct ForestParams {
    int n_trees = 100;
    bool bootstrap = true;
    int max_features = 0;  // 0: ceil(p / 3)
    TreeParams tree{};
};

class RandomForest : public Regressor {
public:
    explicit RandomForest(ForestParams params = {}, std::uint64_t seed = 0) : params_(params), seed_(seed) {}

    std::string name() const override { return "RFR"; }
    const std::vector<DecisionTree>& trees() const { return trees_; }

protected:
    void do_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) override;
    Eigen::VectorXd do_predict(const Eigen::MatrixXd& X) const override;

private:
    ForestParams params_;
    std::uint64_t seed_;
    std::vector<DecisionTree> trees_;
};

struct BoostingParams {
    int n_stages = 100;
    double learning_rate = 0.1;
    int max_depth = 3;
};

/// Squared-loss gradient boosting starting from the training mean.
class GradientBoosting : public Regressor {
public:
    explicit GradientBoosting(BoostingParams params = {}, std::uint64_t seed = 0) : params_(params), seed_(seed) {}

    std::string name() const override { return "GBR"; }

protected:
    void do_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) override;
    Eigen::VectorXd do_predict(const Eigen::MatrixXd& X) const override;

private:
    BoostingParams params_;
    std::uint64_t seed_;
    double init_ = 0.0;
    std::vector<DecisionTree> stages_;
};

/// "LR", "Ridge", "Lasso", "DTR", "RFR", "GBR".
const std::vector<std::string>& model_names();
std::unique_ptr<Regressor> make_model(const std::string& name, std::uint64_t seed = 0);

/// Smallest Euclidean norm of the per-path RMSE vector; ties go to the
/// lexicographically first name.
std::string select_best(const std::map<std::string, std::vector<double>>& reports);

/// Recursive multi-step forecast from the last n_lags raw values, in original
/// units, clamped at 0.
std::vector<double> forecast(const Regressor& model, const Standardizer& scaler, std::span<const double> history,
                             int steps);

/// A model and its scaler fitted on one series.
struct Forecaster {
    std::unique_ptr<Regressor> model;
    Standardizer scaler;
    int n_lags = 10;

    std::vector<double> forecast(std::span<const double> history, int steps) const {
        return polka_te::forecast(*model, scaler, history, steps);
    }
};

Forecaster fit_forecaster(std::span<const double> series, const std::string& model_name, int n_lags,
                          std::uint64_t seed);

struct EvalConfig {
    int n_lags = 10;
    double train_fraction = 0.75;
    std::uint64_t seed = 42;
    std::vector<std::string> models = model_names();
};

struct EvalRow {
    std::string model;
    std::string path;
    double rmse = 0.0;
    bool beats_persistence = false;
};

struct EvalReport {
    std::vector<std::string> paths;
    std::map<std::string, std::vector<double>> rmse;  // model -> per-path RMSE
    std::vector<double> persistence_rmse;             // per path
    std::vector<Eigen::Index> scaler_fit_rows;        // per path, rows the scaler saw
    std::vector<double> scaler_means;                 // per path
    std::vector<EvalRow> rows;
    std::string chosen_model;
};

/// Per series: chronological split, scaler fitted on the training part, lagged
/// datasets built separately on each part, RMSE in original units.
EvalReport evaluate_models(const SeriesTable& table, const EvalConfig& config = {});

/// "# schema_version=1", then model,path,rmse,beats_persistence (persistence
/// baseline rows included).
void write_report_csv(std::ostream& os, const EvalReport& report);
/// model,x,y with x/y the RMSE on the first/second path.
void write_scatter_csv(std::ostream& os, const EvalReport& report);

}  // namespace polka_te
