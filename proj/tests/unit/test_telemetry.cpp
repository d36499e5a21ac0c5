#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "polka_te/telemetry.hpp"

using namespace polka_te;

namespace {

double mean(const std::vector<double>& v, std::size_t lo, std::size_t hi) {
    return std::accumulate(v.begin() + static_cast<long>(lo), v.begin() + static_cast<long>(hi), 0.0) /
           static_cast<double>(hi - lo);
}

}  // namespace

TEST_CASE("append and window") {
    TelemetryStore store;
    store.append({"a", 1, 10});
    store.append({"a", 2, 11});
    CHECK_THROWS_AS(store.append({"a", 2, 12}), NonMonotoneTimestamp);
    CHECK_THROWS_AS(store.append({"a", 1.5, 12}), NonMonotoneTimestamp);
    CHECK(store.size("a") == 2);

    TelemetryStore s2;
    for (int i = 1; i <= 20; ++i) s2.append({"x", double(i), double(i)});
    CHECK(s2.window("x", 10) == std::vector<double>{11, 12, 13, 14, 15, 16, 17, 18, 19, 20});
    CHECK(s2.window("x", 20).size() == 20);
    try {
        s2.window("x", 21);
        FAIL("expected InsufficientHistory");
    } catch (const InsufficientHistory& e) {
        CHECK(e.available == 20);
    }
    CHECK_THROWS_AS(s2.window("missing", 1), InsufficientHistory);

    TelemetryStore s3;
    for (int i = 0; i < 500; ++i) s3.append({"y", double(i), 0.5 * i});
    CHECK(s3.window("y", 500).size() == 500);
    CHECK(s3.tail("y", 3).front().t == 497);
}

TEST_CASE("property: streaming window equals tail of the raw stream") {
    std::mt19937_64 rng(3);
    TelemetryStore store;
    std::vector<double> raw;
    double t = 0;
    for (int i = 0; i < 300; ++i) {
        t += 0.1 + static_cast<double>(rng() % 100) / 50.0;
        const double v = static_cast<double>(rng() % 1000) / 7.0;
        store.append({"s", t, v});
        raw.push_back(v);
        const std::size_t n = 1 + rng() % raw.size();
        REQUIRE(store.window("s", n) == std::vector<double>(raw.end() - static_cast<long>(n), raw.end()));
    }
}

TEST_CASE("concurrent readers see a consistent prefix") {
    TelemetryStore store;
    std::atomic<bool> done{false};
    std::atomic<int> bad{0};
    std::thread reader([&] {
        while (!done) {
            const auto n = store.size("k");
            if (n == 0) continue;
            const auto w = store.window("k", n);
            for (std::size_t i = 0; i < w.size(); ++i) {
                if (w[i] != static_cast<double>(i)) ++bad;
            }
        }
    });
    for (int i = 0; i < 2000; ++i) store.append({"k", double(i + 1), double(i)});
    done = true;
    reader.join();
    CHECK(bad == 0);
}

TEST_CASE("lagged_dataset") {
    std::vector<double> v(13);
    std::iota(v.begin(), v.end(), 1.0);
    const auto ds = lagged_dataset(v, 10);
    REQUIRE(ds.X.rows() == 3);
    CHECK(ds.X(0, 0) == 1);
    CHECK(ds.X(0, 9) == 10);
    CHECK(ds.y(0) == 11);
    CHECK(ds.X(2, 0) == 3);
    CHECK(ds.y(2) == 13);

    CHECK(lagged_dataset(std::vector<double>(11, 0.0), 10).X.rows() == 1);
    CHECK_THROWS_AS(lagged_dataset(std::vector<double>(10, 0.0), 10), std::invalid_argument);

    const auto flat = lagged_dataset(std::vector<double>(30, 4.0), 5);
    CHECK((flat.X.array() == 4.0).all());
    CHECK((flat.y.array() == 4.0).all());

    // rows overlap back into the original series
    std::mt19937_64 rng(5);
    std::vector<double> r(57);
    for (auto& x : r) x = static_cast<double>(rng() % 100);
    const auto rd = lagged_dataset(r, 7);
    for (Eigen::Index i = 0; i < rd.X.rows(); ++i) {
        for (Eigen::Index j = 0; j < 7; ++j) REQUIRE(rd.X(i, j) == r[static_cast<std::size_t>(i + j)]);
        REQUIRE(rd.y(i) == r[static_cast<std::size_t>(i + 7)]);
    }

    const std::vector<float> fv{1, 2, 3, 4};
    const auto fds = lagged_dataset<float>(std::span<const float>(fv), 2);
    CHECK(fds.X.rows() == 2);
}

TEST_CASE("synthetic wireless generator") {
    for (std::uint64_t seed = 0; seed <= 100; ++seed) {
        const auto d = generate_synthetic_wireless(seed);
        const auto& p1 = d.column("path1_mbps");
        const auto& p2 = d.column("path2_mbps");
        REQUIRE(p1.size() == 500);
        REQUIRE(p2.size() == 500);
        for (std::size_t i = 0; i < 500; ++i) {
            REQUIRE(p1[i] >= 0.0);
            REQUIRE(p2[i] >= 0.0);
        }
        REQUIRE(mean(p1, 0, 100) > mean(p2, 0, 100));
        REQUIRE(mean(p2, 200, 500) > mean(p1, 200, 500));
    }
    const auto a = generate_synthetic_wireless(7);
    const auto b = generate_synthetic_wireless(7);
    CHECK(a.columns == b.columns);
    CHECK(generate_synthetic_wireless(8).columns != a.columns);
    CHECK(a.t[1] - a.t[0] == 1.0);
}

TEST_CASE("series csv") {
    const auto d = generate_synthetic_wireless(1);
    std::stringstream ss;
    write_series_csv(ss, d);
    CHECK(ss.str().starts_with("t,path1_mbps,path2_mbps\n"));
    const auto back = read_series_csv(ss);
    CHECK(back.t == d.t);
    CHECK(back.columns == d.columns);

    std::stringstream commented("# schema_version=1\nt,a\n0,1\n1,2\n");
    CHECK(read_series_csv(commented).column("a") == std::vector<double>{1, 2});

    std::stringstream bad_t("t,a\n0,1\n0,2\n");
    CHECK_THROWS_AS(read_series_csv(bad_t), NonMonotoneTimestamp);
    std::stringstream bad_cell("t,a\n0,x\n");
    CHECK_THROWS_AS(read_series_csv(bad_cell), std::invalid_argument);
    std::stringstream bad_header("time,a\n0,1\n");
    CHECK_THROWS_AS(read_series_csv(bad_header), std::invalid_argument);
}

TEST_CASE("export and journal") {
    TelemetryStore store;
    const auto path = std::filesystem::temp_directory_path() / "polka_te_journal_test.csv";
    std::filesystem::remove(path);
    store.enable_journal(path.string());
    store.append({"a", 1, 5});
    store.append({"b", 1, 6});
    store.append({"a", 2, 7});
    std::stringstream ss;
    store.export_csv(ss, {"a", "b"});
    CHECK(ss.str() == "t,a,b\n1,5,6\n2,7,\n");
    std::ifstream j(path);
    std::string all((std::istreambuf_iterator<char>(j)), std::istreambuf_iterator<char>());
    CHECK(all == "a,1,5\nb,1,6\na,2,7\n");
    std::filesystem::remove(path);
}
