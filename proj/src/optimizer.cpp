#include "polka_te/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "polka_te/text.hpp"

namespace polka_te {

std::string to_string(Objective o) {
    switch (o) {
        case Objective::MinCost: return "min_cost";
        case Objective::MinMaxUtilization: return "min_max_utilization";
        case Objective::MinDelay: return "min_delay";
        case Objective::MaxPredictedBandwidth: return "max_predicted_bandwidth";
        case Objective::MinLatency: return "min_latency";
    }
    return "?";
}

Objective objective_from_string(const std::string& s) {
    for (const auto o : {Objective::MinCost, Objective::MinMaxUtilization, Objective::MinDelay,
                         Objective::MaxPredictedBandwidth, Objective::MinLatency}) {
        if (to_string(o) == s) return o;
    }
    throw std::invalid_argument("unknown objective '" + s + "'");
}

InfeasibleDemand::InfeasibleDemand(double d, double max)
    : std::invalid_argument("demand " + format_number(d) + " Mbps exceeds the feasible maximum " +
                            format_number(max) + " Mbps"),
      demand(d),
      max_feasible(max) {}

namespace {

void check_spec(const DemandSpec& spec, std::size_t exact_paths = 0) {
    if (spec.paths.empty()) throw std::invalid_argument("demand spec has no paths");
    if (exact_paths != 0 && spec.paths.size() != exact_paths) {
        throw std::invalid_argument("expected " + std::to_string(exact_paths) + " paths, got " +
                                    std::to_string(spec.paths.size()));
    }
    if (!(spec.demand >= 0.0) || !std::isfinite(spec.demand)) throw std::invalid_argument("demand must be >= 0");
    for (const auto& p : spec.paths) {
        if (!(p.capacity > 0.0) || !std::isfinite(p.capacity)) {
            throw std::invalid_argument("path " + std::to_string(p.path) + ": capacity must be > 0");
        }
        if (!(p.unit_cost >= 0.0)) throw std::invalid_argument("path " + std::to_string(p.path) + ": cost must be >= 0");
    }
}

double total_capacity(const DemandSpec& spec) {
    double c = 0.0;
    for (const auto& p : spec.paths) c += p.capacity;
    return c;
}

}  // namespace

SplitDecision split_min_cost(const DemandSpec& spec) {
    check_spec(spec);
    const double cap = total_capacity(spec);
    if (spec.demand > cap) throw InfeasibleDemand(spec.demand, cap);

    std::vector<std::size_t> order(spec.paths.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return spec.paths[a].unit_cost < spec.paths[b].unit_cost; });

    SplitDecision out;
    out.allocations.assign(spec.paths.size(), 0.0);
    double left = spec.demand;
    for (std::size_t i = 0; i < order.size() && left > 0.0;) {
        std::size_t j = i;
        double group_cap = 0.0;
        while (j < order.size() && spec.paths[order[j]].unit_cost == spec.paths[order[i]].unit_cost) {
            group_cap += spec.paths[order[j]].capacity;
            ++j;
        }
        const double take = std::min(left, group_cap);
        for (std::size_t k = i; k < j; ++k) {
            const auto& p = spec.paths[order[k]];
            out.allocations[order[k]] = take == group_cap ? p.capacity : take * p.capacity / group_cap;
        }
        left -= take;
        i = j;
    }
    for (std::size_t k = 0; k < spec.paths.size(); ++k) out.objective += spec.paths[k].unit_cost * out.allocations[k];
    return out;
}

SplitDecision split_min_max_util(const DemandSpec& spec) {
    check_spec(spec);
    const double cap = total_capacity(spec);
    if (spec.demand > cap) throw InfeasibleDemand(spec.demand, cap);
    const double u = spec.demand / cap;
    SplitDecision out;
    for (const auto& p : spec.paths) out.allocations.push_back(u * p.capacity);
    out.objective = u;
    return out;
}

double min_delay_objective(double x1, double x2, double c1, double c2) {
    return x1 / (c1 - x1) + 2.0 * x2 / (c2 - x2);
}

SplitDecision split_min_delay(const DemandSpec& spec) {
    check_spec(spec, 2);
    const double c1 = spec.paths[0].capacity, c2 = spec.paths[1].capacity;
    const double h = spec.demand;
    const double x1_max = c1 * (1.0 - 1e-6), x2_max = c2 * (1.0 - 1e-6);
    if (h > x1_max + x2_max) throw InfeasibleDemand(h, x1_max + x2_max);

    double lo = std::max(0.0, h - x2_max), hi = std::min(h, x1_max);
    const auto f = [&](double x1) { return min_delay_objective(x1, h - x1, c1, c2); };
    // F is convex on the interval, so golden-section converges to the minimizer.
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = hi - inv_phi * (hi - lo), b = lo + inv_phi * (hi - lo);
    double fa = f(a), fb = f(b);
    while (hi - lo > 1e-9 * std::max(1.0, c1 + c2)) {
        if (fa <= fb) {
            hi = b;
            b = a;
            fb = fa;
            a = hi - inv_phi * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + inv_phi * (hi - lo);
            fb = f(b);
        }
    }
    const double x1 = (lo + hi) / 2.0;
    SplitDecision out;
    out.allocations = {x1, h - x1};
    out.objective = f(x1);
    return out;
}

double aggregate_forecast(const std::vector<double>& forecast, HorizonAggregation aggregation) {
    if (forecast.empty()) throw std::invalid_argument("empty forecast");
    if (aggregation == HorizonAggregation::Min) return *std::min_element(forecast.begin(), forecast.end());
    return std::accumulate(forecast.begin(), forecast.end(), 0.0) / static_cast<double>(forecast.size());
}

int select_path(const std::vector<Candidate>& candidates, Objective objective, HorizonAggregation aggregation) {
    if (candidates.empty()) throw std::invalid_argument("select_path: no candidates");
    if (objective != Objective::MaxPredictedBandwidth && objective != Objective::MinLatency) {
        throw std::invalid_argument("select_path: objective " + to_string(objective) + " is a splitting objective");
    }
    std::vector<Candidate> sorted = candidates;
    std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.path < b.path; });

    int best = sorted.front().path;
    double best_score = -std::numeric_limits<double>::infinity();
    for (const auto& c : sorted) {
        if (objective == Objective::MaxPredictedBandwidth && c.forecast.size() != sorted.front().forecast.size()) {
            throw std::invalid_argument("select_path: forecasts differ in length");
        }
        const double score = objective == Objective::MaxPredictedBandwidth ? aggregate_forecast(c.forecast, aggregation)
                                                                            : -c.latency_ms;
        if (score > best_score) {
            best_score = score;
            best = c.path;
        }
    }
    return best;
}

}  // namespace polka_te
