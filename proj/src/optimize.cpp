#include "topopt/optimize.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace topopt {

void OptimizerConfig::validate() const {
    if (!(tol >= 0)) throw std::invalid_argument("tol must be >= 0");
    if (!(lambda0 > 0)) throw std::invalid_argument("lambda0 must be > 0");
    if (!(rho > 0 && rho < 1)) throw std::invalid_argument("rho must lie in (0, 1)");
    if (trials < 1) throw std::invalid_argument("trials must be >= 1");
    if (!(projection_value < 0)) throw std::invalid_argument("projection_value must be < 0");
    if (max_iters < 0) throw std::invalid_argument("max_iters must be >= 0");
    if (!(trace.dt > 0)) throw std::invalid_argument("dt must be > 0");
    if (trace.fixed_m < 0) throw std::invalid_argument("fixed_m must be >= 0");
}

int worker_threads(int requested) {
    int n = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
    n = std::max(n, 1);
    if (const char* env = std::getenv("TOPOPT_THREADS")) {
        char* end = nullptr;
        const long cap = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && cap >= 1) n = std::min<long>(n, cap);
    }
    return n;
}

Vector project_E(const Mesh& mesh, const Vector& G, double value) {
    Vector out = G;
    for (int i : mesh.observation_nodes())
        if (out[i] > 0) out[i] = value;
    return out;
}

int LineSearchResult::failures() const {
    return static_cast<int>(std::count_if(trials.begin(), trials.end(),
                                          [](const TrialResult& t) { return !t.failure.empty(); }));
}

int select_trial(const std::vector<double>& values) {
    int best = -1;
    for (int i = 0; i < static_cast<int>(values.size()); ++i) {
        if (std::isnan(values[i])) continue;
        if (best < 0 || values[i] < values[best]) best = i;
    }
    return best;
}

namespace {

/// Orders trials by (J, index) so the winner does not depend on scheduling.
bool better(double J, int i, double J_best, int i_best) {
    if (i_best < 0) return true;
    return J < J_best || (J == J_best && i < i_best);
}

}  // namespace

LineSearchResult line_search(const FemSystem& sys, const Evaluation& current, const DescentDirection& dir,
                             const OptimizerConfig& cfg) {
    LineSearchResult out;
    const double rmax = dir.R.lpNorm<Eigen::Infinity>();
    out.gamma = rmax > 0 ? 1.0 / rmax : 1.0;
    out.trials.resize(cfg.trials);
    for (int i = 0; i < cfg.trials; ++i) {
        out.trials[i].index = i;
        out.trials[i].lambda = cfg.lambda0 * std::pow(cfg.rho, i);
    }

    std::mutex merge;
    std::atomic<int> next{0};
    auto worker = [&] {
        std::optional<Evaluation> local;
        int local_i = -1;
        for (int i = next++; i < cfg.trials; i = next++) {
            TrialResult& t = out.trials[i];
            const Vector G = project_E(sys.mesh(), current.G + (t.lambda * out.gamma) * dir.R, cfg.projection_value);
            const Vector U = current.U + t.lambda * dir.V;
            try {
                Evaluation ev = evaluate(sys, G, U, cfg.trace);
                t.J = ev.cost.total;
                if (!std::isfinite(t.J)) {
                    t.failure = "non-finite cost";
                    t.J = std::numeric_limits<double>::quiet_NaN();
                    continue;
                }
                if (better(t.J, i, local_i >= 0 ? local->cost.total : 0.0, local_i)) {
                    local = std::move(ev);
                    local_i = i;
                }
            } catch (const std::runtime_error& e) {
                t.J = std::numeric_limits<double>::quiet_NaN();
                t.failure = e.what();
            }
        }
        if (local_i < 0) return;
        std::lock_guard<std::mutex> lock(merge);
        if (better(local->cost.total, local_i, out.best >= 0 ? out.best_eval->cost.total : 0.0, out.best)) {
            out.best = local_i;
            out.best_eval = std::move(local);
        }
    };

    const int nthreads = std::min(worker_threads(cfg.threads), cfg.trials);
    if (nthreads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < nthreads; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    return out;
}

std::string to_string(StopReason r) {
    switch (r) {
        case StopReason::tolerance: return "tolerance";
        case StopReason::max_iters: return "max_iters";
        case StopReason::no_improvement: return "no_improvement";
    }
    return "?";
}

RunResult run(const FemSystem& sys, const Vector& G0, const Vector& U0, const OptimizerConfig& cfg,
              const IterationCallback& on_iteration) {
    cfg.validate();
    const Mesh& mesh = sys.mesh();
    const AdmissibilityReport adm = validate_admissible(mesh, G0);
    if (!adm.ok()) {
        std::string why;
        if (!adm.boundary_positive) why += " g0 must be > 0 on the outer boundary;";
        if (!adm.observation_negative) why += " g0 must be < 0 on the observation region;";
        if (!adm.gradient_nonzero) why += " grad g0 vanishes on the zero level set;";
        why.pop_back();
        throw AdmissibilityError("initial level set is not admissible:" + why);
    }

    const auto start = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

    RunResult result;
    result.final_eval = evaluate(sys, G0, U0, cfg.trace);
    IterationRecord rec;
    rec.cost = result.final_eval.cost;
    rec.components = static_cast<int>(result.final_eval.orbits.size());
    rec.seconds = elapsed();
    result.history.push_back(rec);
    if (on_iteration) on_iteration(rec, result.final_eval);

    for (int k = 1; k <= cfg.max_iters; ++k) {
        const Evaluation& cur = result.final_eval;
        const Vector P = compute_adjoint(sys, cur);
        const DescentDirection dir = make_direction(cfg.direction, sys, cur, P, cfg.linearization);
        LineSearchResult ls = line_search(sys, cur, dir, cfg);
        if (!ls.improved(cur.cost.total)) {
            result.reason = StopReason::no_improvement;
            return result;
        }

        const double previous = cur.cost.total;
        IterationRecord next;
        next.iter = k;
        next.cost = ls.best_eval->cost;
        next.lambda = ls.chosen().lambda;
        next.gamma = ls.gamma;
        next.slope = dir.predicted_slope;
        next.r_norm = dir.R.lpNorm<Eigen::Infinity>();
        next.v_norm = dir.V.lpNorm<Eigen::Infinity>();
        next.components = static_cast<int>(ls.best_eval->orbits.size());
        next.failed_trials = ls.failures();
        for (const auto& t : ls.trials)
            if (!t.failure.empty()) {
                next.first_failure = t.failure;
                break;
            }
        result.final_eval = std::move(*ls.best_eval);
        next.seconds = elapsed();
        result.history.push_back(next);
        if (on_iteration) on_iteration(next, result.final_eval);

        if (std::abs(next.cost.total - previous) < cfg.tol) {
            result.reason = StopReason::tolerance;
            return result;
        }
    }
    result.reason = StopReason::max_iters;
    return result;
}

}  // namespace topopt
