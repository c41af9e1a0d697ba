#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "topopt/grad.hpp"

namespace topopt {

struct OptimizerConfig {
    double tol = 1e-6;  ///< stop when |J(k+1) - J(k)| < tol
    double lambda0 = 1.0;
    double rho = 0.5;
    int trials = 31;  ///< λ = λ0 ρ^i, i = 0..trials-1
    double projection_value = -0.1;
    int max_iters = 100;
    DirectionKind direction = DirectionKind::adjoint41;
    Linearization linearization = Linearization::recovered;
    TraceOptions trace;
    int threads = 0;  ///< 0: hardware concurrency capped by TOPOPT_THREADS

    /// Throws std::invalid_argument naming the offending field.
    void validate() const;
};

/// Number of line-search workers: min(requested or hardware, TOPOPT_THREADS).
int worker_threads(int requested = 0);

/// Entries of G at observation nodes that are > 0 are replaced by `value`.
Vector project_E(const Mesh& mesh, const Vector& G, double value = -0.1);

struct TrialResult {
    int index = -1;
    double lambda = 0.0;
    double J = 0.0;       ///< NaN when the trial failed
    std::string failure;  ///< why the trial failed (orbit tracing, solver)
};

struct LineSearchResult {
    int best = -1;  ///< trial index, -1 if every trial failed
    double gamma = 1.0;
    std::vector<TrialResult> trials;
    std::optional<Evaluation> best_eval;

    bool improved(double current) const { return best >= 0 && trials[best].J < current; }
    int failures() const;
    const TrialResult& chosen() const { return trials.at(best); }
};

/// Evaluates J(P(G + λγR), U + λV) over the trial set and keeps the minimum
/// (ties go to the larger step). γ = 1/|R|∞, or 1 if R = 0.
LineSearchResult line_search(const FemSystem& sys, const Evaluation& current, const DescentDirection& dir,
                             const OptimizerConfig& cfg);

/// Best-of-trials selection on precomputed values; NaN marks a failed trial.
int select_trial(const std::vector<double>& values);

enum class StopReason { tolerance, max_iters, no_improvement };
std::string to_string(StopReason r);

struct IterationRecord {
    int iter = 0;
    CostBreakdown cost;
    double lambda = 0.0;  ///< step that produced this iterate (0 for the start)
    double gamma = 1.0;
    double slope = 0.0;   ///< predicted slope of the direction taken from the previous iterate
    double r_norm = 0.0;  ///< |R|∞
    double v_norm = 0.0;  ///< |V|∞
    int components = 0;
    int failed_trials = 0;
    std::string first_failure;  ///< reason of the largest failed step, if any
    double seconds = 0.0;  ///< wall time since the start of the run
};

struct RunResult {
    std::vector<IterationRecord> history;
    Evaluation final_eval;
    StopReason reason = StopReason::max_iters;
};

/// Called after each accepted iterate (including the start).
using IterationCallback = std::function<void(const IterationRecord&, const Evaluation&)>;

class AdmissibilityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Projected descent loop: evaluate, direction, line search, stop test.
RunResult run(const FemSystem& sys, const Vector& G0, const Vector& U0, const OptimizerConfig& cfg,
              const IterationCallback& on_iteration = {});

}  // namespace topopt
