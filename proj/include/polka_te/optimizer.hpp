#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace polka_te {

struct PathSpec {
    int path = 0;  // tunnel id or any caller-chosen reference
    double capacity = 0.0;   // Mbps, > 0
    double unit_cost = 0.0;  // >= 0
    double latency_ms = 0.0;
};

struct DemandSpec {
    double demand = 0.0;  // Mbps, >= 0
    std::vector<PathSpec> paths;
};

struct SplitDecision {
    std::vector<double> allocations;  // same order as DemandSpec::paths
    double objective = 0.0;
};

enum class Objective { MinCost, MinMaxUtilization, MinDelay, MaxPredictedBandwidth, MinLatency };

std::string to_string(Objective o);
Objective objective_from_string(const std::string& s);

/// Demand exceeds what the paths can carry; max_feasible is the largest
/// demand that would have been accepted.
struct InfeasibleDemand : std::invalid_argument {
    InfeasibleDemand(double demand, double max_feasible);
    double demand;
    double max_feasible;
};

/// Linear cost sum(cost_i * x_i): cheapest paths filled first. Paths of equal
/// cost share their portion in proportion to capacity.
SplitDecision split_min_cost(const DemandSpec& spec);

/// Minimizes max(x_i / c_i); optimal split equalizes utilization.
SplitDecision split_min_max_util(const DemandSpec& spec);

/// Two paths, F = x1/(c1-x1) + 2 x2/(c2-x2), golden-section search on x1.
/// Each x_i stays at or below c_i(1 - 1e-6).
SplitDecision split_min_delay(const DemandSpec& spec);

double min_delay_objective(double x1, double x2, double c1, double c2);

struct Candidate {
    int path = 0;
    std::vector<double> forecast;  // Mbps per step
    double latency_ms = 0.0;
};

enum class HorizonAggregation { Min, Mean };

/// MaxPredictedBandwidth: argmax of the aggregated forecast. MinLatency:
/// argmin latency. Ties go to the smallest path id.
int select_path(const std::vector<Candidate>& candidates, Objective objective,
                HorizonAggregation aggregation = HorizonAggregation::Min);

double aggregate_forecast(const std::vector<double>& forecast, HorizonAggregation aggregation);

}  // namespace polka_te
