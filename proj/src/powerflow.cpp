#include "vsa/powerflow.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "vsa/dispatch.hpp"
#include "vsa/error.hpp"
#include "vsa/text.hpp"

namespace vsa::powerflow {

using grid::BusKind;
using Complex = std::complex<double>;

namespace {

constexpr Complex kJ{0.0, 1.0};

struct BranchAdmittance {
    Complex ff, ft, tf, tt;
};

BranchAdmittance branch_admittance(const grid::Branch& br) {
    const Complex y = 1.0 / Complex(br.r, br.x);
    const Complex half_charging(0.0, br.b_shunt / 2.0);
    const double t = br.tap;
    return {(y + half_charging) / (t * t), -y / t, -y / t, y + half_charging};
}

/// Reactive limits per bus, summed over in-service generators.
struct ReactiveRange {
    bool has_generator = false;
    double q_min = 0.0;
    double q_max = 0.0;
};

std::vector<ReactiveRange> reactive_ranges(const grid::NetworkCase& c) {
    std::vector<ReactiveRange> out(c.bus_count());
    for (const auto& g : c.generators()) {
        if (!g.in_service) continue;
        auto& r = out[c.bus_index(g.bus)];
        r.has_generator = true;
        r.q_min += g.q_min / c.base_mva();
        r.q_max += g.q_max / c.base_mva();
    }
    return out;
}

}  // namespace

ComplexVector PowerFlowSolution::voltages() const {
    ComplexVector v(v_mag.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = std::polar(v_mag[i], v_ang[i]);
    return v;
}

ComplexMatrix build_ybus(const grid::NetworkCase& c) {
    const auto n = static_cast<Eigen::Index>(c.bus_count());
    ComplexMatrix y = ComplexMatrix::Zero(n, n);
    for (const auto& br : c.branches()) {
        if (!br.in_service) continue;
        const auto f = static_cast<Eigen::Index>(c.bus_index(br.from_bus));
        const auto t = static_cast<Eigen::Index>(c.bus_index(br.to_bus));
        const auto a = branch_admittance(br);
        y(f, f) += a.ff;
        y(f, t) += a.ft;
        y(t, f) += a.tf;
        y(t, t) += a.tt;
    }
    return y;
}

ComplexVector scheduled_injections(const grid::NetworkCase& c) {
    ComplexVector s = ComplexVector::Zero(static_cast<Eigen::Index>(c.bus_count()));
    for (const auto& g : c.generators()) {
        if (!g.in_service) continue;
        s[static_cast<Eigen::Index>(c.bus_index(g.bus))] += Complex(g.p_mw / c.base_mva(), 0.0);
    }
    for (std::size_t k = 0; k < c.loads().size(); ++k) {
        s[static_cast<Eigen::Index>(c.bus_index(c.loads()[k].bus))] -= c.load_pu(k);
    }
    return s;
}

ComplexVector calculated_injections(const ComplexMatrix& ybus, const ComplexVector& v) {
    const ComplexVector current = ybus * v;
    return v.cwiseProduct(current.conjugate());
}

StateLayout StateLayout::from_kinds(const std::vector<BusKind>& kinds) {
    StateLayout layout;
    for (std::size_t i = 0; i < kinds.size(); ++i) {
        if (kinds[i] != BusKind::Slack) layout.angle_buses.push_back(i);
        if (kinds[i] == BusKind::PQ) layout.magnitude_buses.push_back(i);
    }
    return layout;
}

Eigen::VectorXd mismatch_vector(const ComplexMatrix& ybus, const ComplexVector& v, const ComplexVector& s_spec,
                                const StateLayout& layout) {
    const ComplexVector mis = calculated_injections(ybus, v) - s_spec;
    const auto na = layout.angle_buses.size();
    Eigen::VectorXd f(static_cast<Eigen::Index>(layout.size()));
    for (std::size_t k = 0; k < na; ++k) f[static_cast<Eigen::Index>(k)] = mis[static_cast<Eigen::Index>(layout.angle_buses[k])].real();
    for (std::size_t k = 0; k < layout.magnitude_buses.size(); ++k)
        f[static_cast<Eigen::Index>(na + k)] = mis[static_cast<Eigen::Index>(layout.magnitude_buses[k])].imag();
    return f;
}

Eigen::MatrixXd jacobian(const ComplexMatrix& ybus, const ComplexVector& v, const StateLayout& layout) {
    const Eigen::Index n = v.size();
    const ComplexVector current = ybus * v;
    ComplexVector v_unit(n);
    for (Eigen::Index i = 0; i < n; ++i) v_unit[i] = v[i] / std::abs(v[i]);

    // Complex sensitivities of S = diag(V) conj(Y V).
    ComplexMatrix ds_dang(n, n), ds_dmag(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const Complex yv = ybus(i, j) * v[j];
            const Complex yvu = ybus(i, j) * v_unit[j];
            ds_dang(i, j) = kJ * v[i] * std::conj((i == j ? current[i] : Complex{}) - yv);
            ds_dmag(i, j) = v[i] * std::conj(yvu) + (i == j ? std::conj(current[i]) * v_unit[i] : Complex{});
        }
    }

    const auto na = layout.angle_buses.size();
    const auto nm = layout.magnitude_buses.size();
    Eigen::MatrixXd jac(static_cast<Eigen::Index>(na + nm), static_cast<Eigen::Index>(na + nm));
    auto at = [](std::size_t k) { return static_cast<Eigen::Index>(k); };
    for (std::size_t r = 0; r < na; ++r) {
        const auto i = at(layout.angle_buses[r]);
        for (std::size_t col = 0; col < na; ++col) jac(at(r), at(col)) = ds_dang(i, at(layout.angle_buses[col])).real();
        for (std::size_t col = 0; col < nm; ++col)
            jac(at(r), at(na + col)) = ds_dmag(i, at(layout.magnitude_buses[col])).real();
    }
    for (std::size_t r = 0; r < nm; ++r) {
        const auto i = at(layout.magnitude_buses[r]);
        for (std::size_t col = 0; col < na; ++col)
            jac(at(na + r), at(col)) = ds_dang(i, at(layout.angle_buses[col])).imag();
        for (std::size_t col = 0; col < nm; ++col)
            jac(at(na + r), at(na + col)) = ds_dmag(i, at(layout.magnitude_buses[col])).imag();
    }
    return jac;
}

PowerFlowSolution solve_powerflow(const grid::NetworkCase& c, const SolverOptions& options) {
    if (!(options.tolerance > 0.0)) throw ValidationError("power flow tolerance must be positive");

    const auto n = static_cast<Eigen::Index>(c.bus_count());
    const ComplexMatrix ybus = build_ybus(c);
    ComplexVector s_spec = scheduled_injections(c);
    const auto q_range = reactive_ranges(c);

    PowerFlowSolution sol;
    sol.bus_kinds.resize(c.bus_count());
    Eigen::VectorXd vm(n), va = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& bus = c.buses()[static_cast<std::size_t>(i)];
        sol.bus_kinds[static_cast<std::size_t>(i)] = bus.kind;
        vm[i] = bus.kind == BusKind::PQ ? 1.0 : bus.v_setpoint;
    }

    auto voltages = [&] {
        ComplexVector v(n);
        for (Eigen::Index i = 0; i < n; ++i) v[i] = std::polar(vm[i], va[i]);
        return v;
    };

    // PV buses whose generator reactive output sits outside the available range become PQ buses
    // pinned at the violated limit.
    auto switch_q_limits = [&](const ComplexVector& s_calc) {
        bool switched = false;
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto idx = static_cast<std::size_t>(i);
            if (sol.bus_kinds[idx] != BusKind::PV || !q_range[idx].has_generator) continue;
            const double q_load = s_spec[i].imag();  // -Q_load, generators contribute no scheduled Q
            const double q_gen = s_calc[i].imag() - q_load;
            double pinned = 0.0;
            if (q_gen > q_range[idx].q_max) pinned = q_range[idx].q_max;
            else if (q_gen < q_range[idx].q_min) pinned = q_range[idx].q_min;
            else continue;
            sol.bus_kinds[idx] = BusKind::PQ;
            s_spec[i] = Complex(s_spec[i].real(), q_load + pinned);
            switched = true;
        }
        return switched;
    };

    auto layout = StateLayout::from_kinds(sol.bus_kinds);
    int iteration = 0;
    while (true) {
        const ComplexVector v = voltages();
        const ComplexVector s_calc = calculated_injections(ybus, v);
        Eigen::VectorXd f = mismatch_vector(ybus, v, s_spec, layout);
        const double mismatch = f.size() ? f.cwiseAbs().maxCoeff() : 0.0;
        sol.max_mismatch = mismatch;
        sol.history.push_back({iteration, mismatch});

        if (!std::isfinite(mismatch)) {
            sol.diagnostic = "mismatch became non-finite";
            break;
        }
        if (options.enforce_q_limits && mismatch < options.q_check_threshold && switch_q_limits(s_calc)) {
            layout = StateLayout::from_kinds(sol.bus_kinds);
            continue;
        }
        if (mismatch <= options.tolerance) {
            sol.converged = true;
            break;
        }
        if (iteration >= options.max_iter) {
            sol.diagnostic = "no convergence after " + std::to_string(options.max_iter) + " iterations";
            break;
        }

        const Eigen::MatrixXd jac = jacobian(ybus, v, layout);
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
        const double rcond = lu.rcond();
        if (!(rcond > 1e-14)) {
            sol.diagnostic = "singular Jacobian (rcond " + text::format_double(rcond) + ")";
            break;
        }
        const Eigen::VectorXd dx = lu.solve(f);
        if (!dx.allFinite()) {
            sol.diagnostic = "singular Jacobian (non-finite update)";
            break;
        }
        const auto na = layout.angle_buses.size();
        for (std::size_t k = 0; k < na; ++k)
            va[static_cast<Eigen::Index>(layout.angle_buses[k])] -= dx[static_cast<Eigen::Index>(k)];
        for (std::size_t k = 0; k < layout.magnitude_buses.size(); ++k)
            vm[static_cast<Eigen::Index>(layout.magnitude_buses[k])] -= dx[static_cast<Eigen::Index>(na + k)];
        ++iteration;
        if ((vm.array() <= 0.0).any()) {
            sol.max_mismatch = HUGE_VAL;
            sol.diagnostic = "voltage magnitude collapsed to a non-positive value";
            break;
        }
    }
    sol.iterations = iteration;
    sol.v_mag = vm;
    sol.v_ang = va;

    const ComplexVector v = voltages();
    const ComplexVector s_calc = calculated_injections(ybus, v);
    const double base = c.base_mva();

    sol.q_gen = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        if (q_range[idx].has_generator || c.buses()[idx].kind == BusKind::Slack) {
            // Generation = calculated injection + local load.
            double q_load = 0.0;
            for (std::size_t k = 0; k < c.loads().size(); ++k)
                if (c.bus_index(c.loads()[k].bus) == idx) q_load += c.loads()[k].q_mvar;
            sol.q_gen[i] = s_calc[i].imag() * base + q_load;
        }
    }
    {
        const auto s = static_cast<Eigen::Index>(c.slack_index());
        double p_load = 0.0;
        for (const auto& l : c.loads())
            if (c.bus_index(l.bus) == c.slack_index()) p_load += l.p_mw;
        sol.slack_p_mw = s_calc[s].real() * base + p_load;
    }

    const auto m = static_cast<Eigen::Index>(c.branch_count());
    sol.p_from = sol.q_from = sol.p_to = sol.q_to = sol.i_from = sol.i_to = Eigen::VectorXd::Zero(m);
    for (Eigen::Index k = 0; k < m; ++k) {
        const auto& br = c.branches()[static_cast<std::size_t>(k)];
        if (!br.in_service) continue;
        const auto f = static_cast<Eigen::Index>(c.bus_index(br.from_bus));
        const auto t = static_cast<Eigen::Index>(c.bus_index(br.to_bus));
        const auto a = branch_admittance(br);
        const Complex i_f = a.ff * v[f] + a.ft * v[t];
        const Complex i_t = a.tf * v[f] + a.tt * v[t];
        const Complex s_f = v[f] * std::conj(i_f) * base;
        const Complex s_t = v[t] * std::conj(i_t) * base;
        sol.p_from[k] = s_f.real();
        sol.q_from[k] = s_f.imag();
        sol.p_to[k] = s_t.real();
        sol.q_to[k] = s_t.imag();
        sol.i_from[k] = std::abs(i_f);
        sol.i_to[k] = std::abs(i_t);
    }
    return sol;
}

void write_trace(const PowerFlowSolution& solution, const std::filesystem::path& path) {
    std::ostringstream out;
    out << "iteration,max_mismatch\n";
    for (const auto& r : solution.history) out << r.iteration << ',' << text::format_double(r.max_mismatch) << '\n';
    text::write_file(path, out.str());
}

grid::NetworkCase scale_loads(const grid::NetworkCase& c, double factor, GenerationPolicy policy) {
    auto loads = c.loads();
    for (auto& l : loads) {
        l.p_mw *= factor;
        l.q_mvar *= factor;
    }
    auto scaled = c.with_loads(std::move(loads));
    if (policy == GenerationPolicy::Reschedule) {
        const double delta = scaled.total_load_mw() - c.total_load_mw();
        return data::reschedule_generation(scaled, delta);
    }
    return scaled;
}

namespace {

std::string scale_label(double scale) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", scale);
    return buf;
}

}  // namespace

PvCurve trace_pv_curve(const grid::NetworkCase& c, int monitored_bus, double step, const PvOptions& options) {
    if (!(step > 0.0)) throw ValidationError("PV curve step must be positive");
    const auto bus = static_cast<Eigen::Index>(c.bus_index(monitored_bus));

    PvCurve curve;
    for (int k = 0; k < options.max_points; ++k) {
        const double scale = 1.0 + k * step;
        grid::NetworkCase scaled = c;
        try {
            scaled = scale_loads(c, scale, options.generation);
        } catch (const InfeasibleError&) {
            curve.stop_reason = "generation capacity exhausted at scale " + scale_label(scale);
            break;
        }
        const auto sol = solve_powerflow(scaled, options.solver);
        if (!sol.converged) {
            if (k == 0) throw InfeasibleError("base case infeasible: " + sol.diagnostic);
            curve.stop_reason = "power flow diverged at scale " + scale_label(scale);
            break;
        }
        curve.points.push_back({scale, sol.v_mag[bus]});
        curve.nose_scale = scale;
    }
    if (curve.stop_reason.empty()) curve.stop_reason = "point limit reached";
    return curve;
}

}  // namespace vsa::powerflow
