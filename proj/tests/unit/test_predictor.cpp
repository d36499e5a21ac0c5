#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <sstream>

#include "polka_te/predictor.hpp"

using namespace polka_te;

namespace {

Eigen::MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = g(rng);
    return m;
}

// Exhaustive depth-1 split: every feature, every cut between sorted distinct values.
double best_stump_sse(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index f = 0; f < X.cols(); ++f) {
        for (Eigen::Index c = 0; c < X.rows(); ++c) {
            const double thr = X(c, f);
            double sl = 0, sr = 0, nl = 0, nr = 0;
            for (Eigen::Index i = 0; i < X.rows(); ++i) {
                if (X(i, f) <= thr) {
                    sl += y(i);
                    ++nl;
                } else {
                    sr += y(i);
                    ++nr;
                }
            }
            if (nl == 0 || nr == 0) continue;
            double sse = 0;
            for (Eigen::Index i = 0; i < X.rows(); ++i) {
                const double m = X(i, f) <= thr ? sl / nl : sr / nr;
                sse += (y(i) - m) * (y(i) - m);
            }
            best = std::min(best, sse);
        }
    }
    return best;
}

}  // namespace

TEST_CASE("standardizer") {
    Standardizer s;
    Eigen::MatrixXd col(2, 1);
    col << 0, 10;
    CHECK_THROWS_AS(s.transform(col), NotFitted);
    s.fit(col);
    CHECK(s.means()(0) == 5.0);
    CHECK(s.stds()(0) == 5.0);
    Eigen::MatrixXd ten(1, 1);
    ten << 10;
    CHECK(s.transform(ten)(0, 0) == 1.0);
    CHECK_THROWS_AS(s.fit(col), std::logic_error);
    CHECK(s.fit_rows() == 2);

    Standardizer c;
    Eigen::MatrixXd seven = Eigen::MatrixXd::Constant(3, 1, 7.0);
    c.fit(seven);
    CHECK(c.constant_columns()[0]);
    CHECK(c.transform(seven).isZero());

    std::mt19937_64 rng(1);
    const Eigen::MatrixXd X = random_matrix(rng, 50, 4) * 3.0;
    Standardizer r;
    r.fit(X);
    CHECK((r.inverse_transform(r.transform(X)) - X).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(r.transform(X).colwise().mean().cwiseAbs().maxCoeff() < 1e-12);
    Eigen::MatrixXd wrong(2, 3);
    CHECK_THROWS_AS(r.transform(wrong), std::invalid_argument);

    BasicStandardizer<float> sf;
    Eigen::MatrixXf fcol(2, 1);
    fcol << 0, 10;
    sf.fit(fcol);
    CHECK(sf.stds()(0) == 5.0f);
}

TEST_CASE("split_train_test") {
    std::vector<double> v(500);
    std::iota(v.begin(), v.end(), 0.0);
    const auto s = split_train_test(v);
    CHECK(s.train.size() == 375);
    CHECK(s.test.size() == 125);
    auto joined = s.train;
    joined.insert(joined.end(), s.test.begin(), s.test.end());
    CHECK(joined == v);
    const auto small = split_train_test(std::vector<double>(8, 1.0));
    CHECK(small.train.size() == 6);
    CHECK(small.test.size() == 2);
    CHECK_THROWS_AS(split_train_test(std::vector<double>(7, 1.0)), std::invalid_argument);
}

TEST_CASE("rmse") {
    CHECK(rmse(std::vector<double>{0, 0}, std::vector<double>{3, 4}) == doctest::Approx(3.5355339).epsilon(1e-7));
    CHECK(rmse(std::vector<double>{3, 4}, std::vector<double>{0, 0}) == rmse(std::vector<double>{0, 0}, std::vector<double>{3, 4}));
    CHECK(rmse(std::vector<double>{1, 2}, std::vector<double>{1, 2}) == 0.0);
    CHECK_THROWS_AS(rmse(std::vector<double>{1}, std::vector<double>{1, 2}), std::invalid_argument);
    const Eigen::VectorXf a = Eigen::VectorXf::Zero(2);
    Eigen::VectorXf b(2);
    b << 3, 4;
    CHECK(rmse(a, b) == doctest::Approx(3.5355339f));
}

TEST_CASE("OLS: exact recovery and orthogonal residuals") {
    Eigen::MatrixXd X(5, 1);
    X << 0, 1, 2, 3, 4;
    const Eigen::VectorXd y = (3.0 + 2.0 * X.col(0).array()).matrix();
    LinearModel lr;
    lr.fit(X, y);
    CHECK(lr.intercept() == doctest::Approx(3.0).epsilon(1e-8));
    CHECK(lr.coefficients()(0) == doctest::Approx(2.0).epsilon(1e-8));

    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::MatrixXd A = random_matrix(rng, 60, 5);
        const Eigen::VectorXd b = random_matrix(rng, 60, 1);
        LinearModel m;
        m.fit(A, b);
        const Eigen::VectorXd r = b - m.predict(A);
        REQUIRE((A.transpose() * r).cwiseAbs().maxCoeff() < 1e-6);
        REQUIRE(std::abs(r.sum()) < 1e-6);
    }

    // duplicated column: minimum-norm fallback still interpolates
    Eigen::MatrixXd D(6, 2);
    D.col(0) << 1, 2, 3, 4, 5, 6;
    D.col(1) = D.col(0);
    const Eigen::VectorXd yd = (1.0 + 4.0 * D.col(0).array()).matrix();
    LinearModel dm;
    dm.fit(D, yd);
    CHECK((dm.predict(D) - yd).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(dm.coefficients()(0) == doctest::Approx(2.0).epsilon(1e-8));
}

TEST_CASE("ridge") {
    std::mt19937_64 rng(11);
    const Eigen::MatrixXd X = random_matrix(rng, 40, 4);
    const Eigen::VectorXd y = X * Eigen::Vector4d(1, -2, 0.5, 3) + random_matrix(rng, 40, 1);
    LinearModel ols;
    ols.fit(X, y);
    RidgeRegression r0(0.0);
    r0.fit(X, y);
    CHECK((r0.predict(X) - ols.predict(X)).cwiseAbs().maxCoeff() < 1e-8);

    // distance from the mean predictor shrinks monotonically in lambda
    double prev = std::numeric_limits<double>::infinity();
    for (const double lambda : {0.0, 0.1, 1.0, 10.0}) {
        RidgeRegression m(lambda);
        m.fit(X, y);
        const double spread = (m.predict(X).array() - y.mean()).matrix().norm();
        CHECK(spread < prev);
        prev = spread;
    }
}

TEST_CASE("lasso satisfies the optimality conditions") {
    std::mt19937_64 rng(13);
    const Eigen::MatrixXd X = random_matrix(rng, 80, 6);
    Eigen::VectorXd w(6);
    w << 2, 0, 0, -1, 0, 0.3;
    const Eigen::VectorXd y = X * w + 0.1 * random_matrix(rng, 80, 1);
    const double alpha = 0.1;
    LassoRegression m(alpha, 10000, 1e-10);
    m.fit(X, y);
    const Eigen::MatrixXd Xc = X.rowwise() - X.colwise().mean();
    const Eigen::VectorXd r = y - m.predict(X);
    const Eigen::VectorXd g = Xc.transpose() * r / static_cast<double>(X.rows());
    for (Eigen::Index j = 0; j < 6; ++j) {
        if (m.coefficients()(j) != 0.0) {
            CHECK(g(j) == doctest::Approx(alpha * (m.coefficients()(j) > 0 ? 1 : -1)).epsilon(1e-6));
        } else {
            CHECK(std::abs(g(j)) <= alpha + 1e-8);
        }
    }
    CHECK(m.coefficients()(1) == 0.0);

    LassoRegression huge(100.0);
    huge.fit(X, y);
    CHECK(huge.coefficients().isZero());
    CHECK((huge.predict(X).array() == y.mean()).all());
}

TEST_CASE("decision tree") {
    std::mt19937_64 rng(17);
    const Eigen::MatrixXd X = random_matrix(rng, 100, 3);
    const Eigen::VectorXd y = random_matrix(rng, 100, 1);
    DecisionTree t;
    t.fit(X, y);
    CHECK(rmse(t.predict(X), y) == 0.0);

    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::MatrixXd A = random_matrix(rng, 15, 3);
        const Eigen::VectorXd b = random_matrix(rng, 15, 1);
        DecisionTree stump(TreeParams{1, 2, 0});
        stump.fit(A, b);
        const double sse = (stump.predict(A) - b).squaredNorm();
        REQUIRE(sse == doctest::Approx(best_stump_sse(A, b)).epsilon(1e-12));
        REQUIRE(stump.depth() == 1);
    }

    DecisionTree shallow(TreeParams{3, 2, 0});
    shallow.fit(X, y);
    CHECK(shallow.depth() <= 3);

    DecisionTree c;
    c.fit(X, Eigen::VectorXd::Constant(100, 4.5));
    CHECK((c.predict(X).array() == 4.5).all());
    CHECK(c.node_count() == 1);

    CHECK_THROWS_AS(DecisionTree().predict(X), NotFitted);
    CHECK_THROWS_AS(t.predict(Eigen::MatrixXd(2, 2)), std::invalid_argument);
    Eigen::MatrixXd bad = X;
    bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(DecisionTree().fit(bad, y), std::invalid_argument);
    CHECK_THROWS_AS(DecisionTree().fit(Eigen::MatrixXd(0, 3), Eigen::VectorXd(0)), std::invalid_argument);
}

TEST_CASE("ensembles") {
    std::mt19937_64 rng(19);
    const Eigen::MatrixXd X = random_matrix(rng, 60, 4);
    const Eigen::VectorXd y = X.col(0).array().sin().matrix() + 0.2 * random_matrix(rng, 60, 1);
    const Eigen::MatrixXd Xq = random_matrix(rng, 30, 4);

    DecisionTree tree;
    tree.fit(X, y);
    RandomForest one(ForestParams{1, false, 4, {}}, 5);
    one.fit(X, y);
    CHECK(one.predict(Xq) == tree.predict(Xq));

    RandomForest a(ForestParams{}, 3), b(ForestParams{}, 3), c(ForestParams{}, 4);
    a.fit(X, y);
    b.fit(X, y);
    c.fit(X, y);
    CHECK(a.predict(Xq) == b.predict(Xq));
    CHECK(a.predict(Xq) != c.predict(Xq));
    CHECK(a.trees().size() == 100);

    GradientBoosting g1(BoostingParams{1, 1.0, -1});
    g1.fit(X, y);
    CHECK((g1.predict(X) - y).cwiseAbs().maxCoeff() < 1e-12);

    GradientBoosting gbr;
    gbr.fit(X, y);
    CHECK(rmse(gbr.predict(X), y) < rmse(Eigen::VectorXd::Constant(60, y.mean()), y));

    for (const auto& name : model_names()) {
        auto m = make_model(name, 1);
        CHECK(m->name() == name);
        m->fit(X, Eigen::VectorXd::Constant(60, 2.5));
        CHECK((m->predict(Xq).array() - 2.5).abs().maxCoeff() < 1e-9);
        CHECK(m->predict(Xq).allFinite());
    }
    CHECK_THROWS_AS(make_model("GPR"), std::invalid_argument);
}

TEST_CASE("select_best") {
    CHECK(select_best({{"RFR", {14.23, 6.73}}, {"GPR", {34.75, 52.43}}}) == "RFR");
    CHECK(select_best({{"DTR", {1.0, 2.0}}}) == "DTR");
    CHECK(select_best({{"Ridge", {3.0, 4.0}}, {"LR", {4.0, 3.0}}}) == "LR");
    CHECK_THROWS_AS(select_best({}), std::invalid_argument);
}

TEST_CASE("forecast") {
    const auto data = generate_synthetic_wireless(42);
    const auto& p2 = data.column("path2_mbps");
    const auto f = fit_forecaster(p2, "RFR", 10, 42);
    const std::vector<double> history(p2.end() - 10, p2.end());

    const auto one = f.forecast(history, 1);
    Eigen::MatrixXd row(1, 10);
    for (int j = 0; j < 10; ++j) row(0, j) = f.scaler.transform(Eigen::MatrixXd::Constant(1, 1, history[j]))(0, 0);
    const double direct = f.scaler.inverse_transform(f.model->predict(row))(0, 0);
    CHECK(one.at(0) == doctest::Approx(std::max(0.0, direct)).epsilon(1e-12));

    const auto ten = f.forecast(history, 10);
    CHECK(ten.size() == 10);
    CHECK(ten.front() == one.front());
    for (const double v : ten) {
        CHECK(std::isfinite(v));
        CHECK(v >= 0.0);
    }
    CHECK_THROWS_AS(f.forecast(std::vector<double>(9, 1.0), 3), std::invalid_argument);
    CHECK_THROWS_AS(f.forecast(history, 0), std::invalid_argument);

    const auto flat = fit_forecaster(std::vector<double>(40, 12.0), "LR", 10, 0);
    for (const double v : flat.forecast(std::vector<double>(10, 12.0), 10)) CHECK(v == doctest::Approx(12.0));

    // clamping: a falling trend extrapolated by a linear model cannot go negative
    std::vector<double> down(40);
    for (int i = 0; i < 40; ++i) down[i] = 40.0 - i;
    const auto lin = fit_forecaster(down, "LR", 3, 0);
    for (const double v : lin.forecast(std::vector<double>{3, 2, 1}, 5)) CHECK(v >= 0.0);
}

TEST_CASE("random forest beats a single tree on most seeds") {
    int wins = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        EvalConfig cfg;
        cfg.seed = seed;
        cfg.models = {"DTR", "RFR"};
        const auto report = evaluate_models(generate_synthetic_wireless(seed), cfg);
        const auto& rf = report.rmse.at("RFR");
        const auto& dt = report.rmse.at("DTR");
        if (std::hypot(rf[0], rf[1]) <= std::hypot(dt[0], dt[1])) ++wins;
    }
    CHECK(wins >= 8);
}

TEST_CASE("evaluate_models: hygiene and report") {
    auto data = generate_synthetic_wireless(42);
    const auto report = evaluate_models(data);
    REQUIRE(report.paths.size() == 2);
    CHECK(report.rows.size() == 12);
    CHECK(report.scaler_fit_rows == std::vector<Eigen::Index>{375, 375});
    const auto& p1 = data.column("path1_mbps");
    CHECK(report.scaler_means[0] == doctest::Approx(std::accumulate(p1.begin(), p1.begin() + 375, 0.0) / 375.0));
    for (const auto& r : report.rows) {
        CHECK(r.rmse >= 0.0);
        CHECK(std::isfinite(r.rmse));
    }
    CHECK(report.chosen_model == select_best(report.rmse));

    // rewriting the test part must not change anything learned from the train part
    auto poisoned = data;
    for (std::size_t i = 375; i < 500; ++i) poisoned.columns[0][i] += 1000.0;
    const auto again = evaluate_models(poisoned, EvalConfig{10, 0.75, 42, {"LR"}});
    CHECK(again.scaler_means[0] == report.scaler_means[0]);

    std::ostringstream csv, scatter;
    write_report_csv(csv, report);
    write_scatter_csv(scatter, report);
    CHECK(csv.str().starts_with("# schema_version=1\nmodel,path,rmse,beats_persistence\n"));
    CHECK(csv.str().find("persistence,path2_mbps,") != std::string::npos);
    CHECK(scatter.str().starts_with("model,x,y\n"));

    const auto twice = evaluate_models(data);
    CHECK(twice.rmse == report.rmse);
}
