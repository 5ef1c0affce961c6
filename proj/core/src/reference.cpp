#include "polyint/reference.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "polyint/integrators.hpp"
#include "polyint/polynet.hpp"

namespace polyint {

namespace {

WeightEncoding resolve(const ButcherTableau& tab, WeightEncoding enc) {
    if (enc == WeightEncoding::Auto)
        return ratio_encodable(tab) ? WeightEncoding::Ratio : WeightEncoding::Direct;
    if (enc == WeightEncoding::Ratio && !ratio_encodable(tab))
        throw std::invalid_argument("ratio encoding undefined: tableau has a zero weight");
    return enc;
}

// One matched step. Every floating-point operation below mirrors the
// circuit's fold order: sums seed from literal 0.0, the stage argument adds
// the gated route value (including its zero gates), the accumulator chain
// is A <- (0.0 + A*r) + bw*k with the block's first r annihilated to +0.0,
// and the commit adds A times the weight array's final live entry. `slots`
// persists across steps exactly like the circuit's register, stale lanes
// included.
void matched_rk_step_core(const PolynomialSystem& sys, const ButcherTableau& tab,
                          WeightEncoding enc, const std::vector<double>& i2vals,
                          std::vector<double>& x, std::vector<double>& slots) {
    const int n = sys.n_vars();
    const int s = tab.s;
    const int lanes = std::max(1, s - 1);
    std::vector<double> route(n), arg(n), f(n), k(n), accum(n, 0.0);
    for (int t = 0; t < s; ++t) {
        for (int j = 0; j < n; ++j) route[j] = 0.0;
        for (int lane = 0; lane < lanes; ++lane) {
            const double g = tab.a[t][lane];
            for (int j = 0; j < n; ++j) route[j] += g * slots[lane * n + j];
        }
        for (int j = 0; j < n; ++j) arg[j] = (0.0 + x[j]) + route[j];
        eval_derivative_raw(sys, arg, f);
        for (int j = 0; j < n; ++j) k[j] = f[j] * tab.h;
        for (int j = 0; j < n; ++j) {
            const double scaled = t == 0 ? 0.0 : accum[j] * i2vals[t - 1];
            const double weighted =
                enc == WeightEncoding::Ratio ? 1.0 * k[j] : tab.b[t] * k[j];
            accum[j] = (0.0 + scaled) + weighted;
        }
        if (t < s - 1)
            for (int j = 0; j < n; ++j) slots[t * n + j] = k[j];
    }
    for (int j = 0; j < n; ++j) x[j] = (0.0 + x[j]) + accum[j] * i2vals[s - 1];
}

// Textbook order: stage arguments accumulate a_ij*k_j left to right over
// all j < i, the update folds sum(b_i*k_i) left to right and adds it once.
void naive_rk_step_core(const PolynomialSystem& sys, const ButcherTableau& tab,
                        std::vector<double>& x) {
    const int n = sys.n_vars();
    const int s = tab.s;
    std::vector<std::vector<double>> k(s, std::vector<double>(n));
    std::vector<double> arg(n), f(n);
    for (int t = 0; t < s; ++t) {
        for (int j = 0; j < n; ++j) arg[j] = x[j];
        for (int jj = 0; jj < t; ++jj)
            for (int j = 0; j < n; ++j) arg[j] += tab.a[t][jj] * k[jj][j];
        eval_derivative_raw(sys, arg, f);
        for (int j = 0; j < n; ++j) k[t][j] = tab.h * f[j];
    }
    for (int j = 0; j < n; ++j) {
        double sum = 0.0;
        for (int t = 0; t < s; ++t) sum += tab.b[t] * k[t][j];
        x[j] = x[j] + sum;
    }
}

std::vector<double> weight_values(const ButcherTableau& tab, WeightEncoding enc) {
    if (enc == WeightEncoding::Ratio) return ratio_array(tab);
    std::vector<double> v(tab.s + 1, 1.0);
    v.back() = 0.0;
    return v;
}

void check_finite_state(const std::vector<double>& x, std::int64_t step, Trajectory& traj) {
    for (double v : x)
        if (!std::isfinite(v))
            throw BlowupError("integration blew up at step " + std::to_string(step),
                              static_cast<std::size_t>(step), traj);
}

void abm2_step_core(const PolynomialSystem& sys, double h, bool matched,
                    std::vector<double>& x, std::vector<double>& prev_deriv) {
    const int n = sys.n_vars();
    const double pred_fwd = 1.5 * h;
    const double pred_back = -0.5 * h;
    const double corr = 0.5 * h;
    std::vector<double> f1(n), pred(n), f2(n);
    eval_derivative_raw(sys, x, f1);
    if (matched) {
        for (int j = 0; j < n; ++j)
            pred[j] = ((0.0 + x[j]) + pred_fwd * f1[j]) + pred_back * prev_deriv[j];
        eval_derivative_raw(sys, pred, f2);
        for (int j = 0; j < n; ++j) x[j] = (0.0 + x[j]) + corr * ((0.0 + f2[j]) + f1[j]);
    } else {
        for (int j = 0; j < n; ++j)
            pred[j] = x[j] + h * (1.5 * f1[j] - 0.5 * prev_deriv[j]);
        eval_derivative_raw(sys, pred, f2);
        for (int j = 0; j < n; ++j) x[j] = x[j] + h * (0.5 * (f2[j] + f1[j]));
    }
    prev_deriv = f1;
}

}  // namespace

StateVector classical_rk_step(const PolynomialSystem& sys, const ButcherTableau& tab,
                              const StateVector& x, bool matched, WeightEncoding encoding) {
    validate(tab);
    if (static_cast<int>(x.size()) != sys.n_vars())
        throw std::invalid_argument("state length must equal n_vars");
    std::vector<double> state = x.values();
    if (matched) {
        const WeightEncoding enc = resolve(tab, encoding);
        const auto i2vals = weight_values(tab, enc);
        std::vector<double> slots(static_cast<std::size_t>(std::max(1, tab.s - 1)) *
                                      sys.n_vars(),
                                  0.0);
        matched_rk_step_core(sys, tab, enc, i2vals, state, slots);
    } else {
        naive_rk_step_core(sys, tab, state);
    }
    return StateVector::unchecked(std::move(state));
}

Trajectory classical_rk_integrate(const PolynomialSystem& sys, const ButcherTableau& tab,
                                  const StateVector& x0, std::int64_t n_steps, bool matched,
                                  WeightEncoding encoding) {
    validate(tab);
    if (n_steps < 0) throw std::invalid_argument("n_steps must be >= 0");
    if (static_cast<int>(x0.size()) != sys.n_vars())
        throw std::invalid_argument("state length must equal n_vars");
    Trajectory traj;
    traj.method = "rk" + std::to_string(tab.s);
    traj.h = tab.h;
    traj.matched = matched;
    traj.times.push_back(0.0);
    traj.states.push_back(x0);

    std::vector<double> state = x0.values();
    const WeightEncoding enc = matched ? resolve(tab, encoding) : WeightEncoding::Direct;
    const auto i2vals = matched ? weight_values(tab, enc) : std::vector<double>{};
    std::vector<double> slots(static_cast<std::size_t>(std::max(1, tab.s - 1)) * sys.n_vars(),
                              0.0);
    for (std::int64_t step = 1; step <= n_steps; ++step) {
        if (matched)
            matched_rk_step_core(sys, tab, enc, i2vals, state, slots);
        else
            naive_rk_step_core(sys, tab, state);
        check_finite_state(state, step, traj);
        traj.times.push_back(static_cast<double>(step) * tab.h);
        traj.states.push_back(StateVector::unchecked(state));
    }
    return traj;
}

std::pair<StateVector, Abm2Cache> classical_abm2_step(const PolynomialSystem& sys,
                                                      const StateVector& x_n,
                                                      const Abm2Cache& cache, double h,
                                                      bool matched) {
    if (!cache.seeded) throw std::invalid_argument("ABM2 derivative cache is unseeded");
    if (static_cast<int>(x_n.size()) != sys.n_vars() ||
        static_cast<int>(cache.prev_deriv.size()) != sys.n_vars())
        throw std::invalid_argument("state length must equal n_vars");
    std::vector<double> state = x_n.values();
    std::vector<double> prev = cache.prev_deriv;
    abm2_step_core(sys, h, matched, state, prev);
    return {StateVector::unchecked(std::move(state)), Abm2Cache{std::move(prev), true}};
}

Trajectory classical_abm2_integrate(const PolynomialSystem& sys, const StateVector& x0,
                                    std::int64_t n_steps, double h, bool matched,
                                    bool rk4_bootstrap, const StateVector* x1) {
    if (n_steps < 0) throw std::invalid_argument("n_steps must be >= 0");
    if (!(h > 0.0) || !std::isfinite(h))
        throw std::invalid_argument("step size must be positive and finite");
    Trajectory traj;
    traj.method = "abm2";
    traj.h = h;
    traj.matched = matched;
    traj.times.push_back(0.0);
    traj.states.push_back(x0);
    if (n_steps == 0) return traj;

    StateVector x1v;
    if (rk4_bootstrap) {
        x1v = classical_rk_step(sys, ButcherTableau::rk4(h), x0, matched);
    } else {
        if (!x1) throw std::invalid_argument("explicit seed policy needs the second state");
        x1v = *x1;
    }
    traj.times.push_back(h);
    traj.states.push_back(x1v);

    std::vector<double> state = x1v.values();
    std::vector<double> prev_deriv(sys.n_vars());
    eval_derivative_raw(sys, x0.values(), prev_deriv);
    for (std::int64_t step = 2; step <= n_steps; ++step) {
        abm2_step_core(sys, h, matched, state, prev_deriv);
        check_finite_state(state, step, traj);
        traj.times.push_back(static_cast<double>(step) * h);
        traj.states.push_back(StateVector::unchecked(state));
    }
    return traj;
}

DivergenceSeries divergence(const Trajectory& a, const Trajectory& b) {
    if (a.size() != b.size() || a.times != b.times)
        throw std::invalid_argument("divergence needs trajectories on the same grid");
    DivergenceSeries series;
    series.times = a.times;
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (a.states[k].size() != b.states[k].size())
            throw std::invalid_argument("divergence needs states of equal dimension");
        double sum = 0.0;
        for (std::size_t j = 0; j < a.states[k].size(); ++j) {
            const double d = a.states[k][j] - b.states[k][j];
            sum += d * d;
        }
        series.distances.push_back(std::sqrt(sum));
    }
    return series;
}

void write_csv(const DivergenceSeries& series, std::ostream& out) {
    out << "t,distance\n";
    for (std::size_t k = 0; k < series.times.size(); ++k)
        out << format_double(series.times[k]) << ',' << format_double(series.distances[k])
            << '\n';
}

PerturbationResult perturbation_experiment(const PolynomialSystem& sys, MethodKind method,
                                           double h, std::int64_t n_steps, const StateVector& x0,
                                           const std::vector<double>& deltas, int direction) {
    if (deltas.empty()) throw std::invalid_argument("perturbation needs at least one delta");
    if (direction < 0 || direction >= sys.n_vars())
        throw std::invalid_argument("perturbation direction out of range");
    for (double d : deltas)
        if (!std::isfinite(d)) throw std::invalid_argument("deltas must be finite");

    auto run_matched = [&](const StateVector& start) {
        return method == MethodKind::Rk4
                   ? classical_rk_integrate(sys, ButcherTableau::rk4(h), start, n_steps, true)
                   : classical_abm2_integrate(sys, start, n_steps, h, true, true);
    };

    PerturbationResult result;
    result.deltas = deltas;
    const Trajectory reference = run_matched(x0);

    std::vector<std::future<DivergenceSeries>> tasks;
    for (double delta : deltas) {
        std::vector<double> perturbed = x0.values();
        perturbed[direction] += delta;
        result.realized_deltas.push_back(std::fabs(perturbed[direction] - x0[direction]));
        tasks.push_back(std::async(std::launch::async, [&, start = StateVector(perturbed)] {
            return divergence(run_matched(start), reference);
        }));
    }
    for (auto& task : tasks) result.perturbed.push_back(task.get());

    const PolyNet net = compile(sys);
    Trajectory neural;
    if (method == MethodKind::Rk4) {
        RkCircuit rk = build_rk4(net, h);
        neural = integrate(rk, x0, n_steps);
    } else {
        AbmCircuit abm = build_abm2(net, h);
        neural = integrate(abm, x0, n_steps, SeedPolicy::Rk4Bootstrap);
    }
    const Trajectory naive =
        method == MethodKind::Rk4
            ? classical_rk_integrate(sys, ButcherTableau::rk4(h), x0, n_steps, false)
            : classical_abm2_integrate(sys, x0, n_steps, h, false, true);
    result.neural_vs_naive = divergence(neural, naive);
    return result;
}

double fit_order(std::span<const double> hs, std::span<const double> errors) {
    if (hs.size() != errors.size() || hs.size() < 2)
        throw std::invalid_argument("fit_order needs at least two (h, error) pairs");
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < hs.size(); ++i) {
        if (!(hs[i] > 0.0) || !(errors[i] > 0.0))
            throw std::invalid_argument("fit_order needs positive h and error values");
        lx.push_back(std::log(hs[i]));
        ly.push_back(std::log(errors[i]));
    }
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / lx.size();
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / ly.size();
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        num += (lx[i] - mx) * (ly[i] - my);
        den += (lx[i] - mx) * (lx[i] - mx);
    }
    return num / den;
}

StateVector spin_up(const PolynomialSystem& sys, const StateVector& x0, std::int64_t n_steps,
                    double h) {
    return classical_rk_integrate(sys, ButcherTableau::rk4(h), x0, n_steps, true)
        .states.back();
}

}  // namespace polyint
