#pragma once

#include <Eigen/Dense>
#include <complex>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vsa/grid_model.hpp"

namespace vsa::powerflow {

using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

struct SolverOptions {
    double tolerance = 1e-8;  // p.u. power mismatch
    int max_iter = 20;
    bool enforce_q_limits = true;
    /// Q-limit checks start once the mismatch falls below this level.
    double q_check_threshold = 1e-2;
};

struct IterationRecord {
    int iteration = 0;
    double max_mismatch = 0.0;
};

/// Per-bus vectors follow case.buses() order; per-branch vectors follow case.branches() order
/// with zeros for out-of-service branches.
struct PowerFlowSolution {
    Eigen::VectorXd v_mag;
    Eigen::VectorXd v_ang;  // radians
    Eigen::VectorXd p_from, q_from, p_to, q_to;  // MW / MVar
    Eigen::VectorXd i_from, i_to;  // p.u. current magnitude at each branch end
    std::vector<grid::BusKind> bus_kinds;  // after PV -> PQ switching
    Eigen::VectorXd q_gen;  // MVar delivered at each bus (0 where no generator)
    double slack_p_mw = 0.0;
    bool converged = false;
    int iterations = 0;
    double max_mismatch = 0.0;
    std::string diagnostic;
    std::vector<IterationRecord> history;

    std::size_t bus_count() const { return static_cast<std::size_t>(v_mag.size()); }
    ComplexVector voltages() const;
};

/// Bus admittance matrix in p.u. Pi model with the off-nominal tap on the from side.
ComplexMatrix build_ybus(const grid::NetworkCase& c);

/// Scheduled complex injections (generation minus load) in p.u. for every bus.
ComplexVector scheduled_injections(const grid::NetworkCase& c);

/// S_i = V_i * conj(sum_j Y_ij V_j).
ComplexVector calculated_injections(const ComplexMatrix& ybus, const ComplexVector& v);

/// Newton-Raphson solution in polar form. Divergence is reported through `converged`, never thrown.
PowerFlowSolution solve_powerflow(const grid::NetworkCase& c, const SolverOptions& options = {});

/// Writes the iteration history as "iteration,max_mismatch" rows.
void write_trace(const PowerFlowSolution& solution, const std::filesystem::path& path);

// -- Jacobian access for verification ---------------------------------------------------------

/// Unknown ordering used by the solver: angles of all non-slack buses, then magnitudes of PQ buses.
struct StateLayout {
    std::vector<std::size_t> angle_buses;
    std::vector<std::size_t> magnitude_buses;

    static StateLayout from_kinds(const std::vector<grid::BusKind>& kinds);
    std::size_t size() const { return angle_buses.size() + magnitude_buses.size(); }
};

/// Mismatch F = S_calc - S_spec restricted to the layout's equations (P rows, then Q rows).
Eigen::VectorXd mismatch_vector(const ComplexMatrix& ybus, const ComplexVector& v, const ComplexVector& s_spec,
                                const StateLayout& layout);

/// dF/dx for the ordering of StateLayout.
Eigen::MatrixXd jacobian(const ComplexMatrix& ybus, const ComplexVector& v, const StateLayout& layout);

// -- PV curves --------------------------------------------------------------------------------

enum class GenerationPolicy {
    Reschedule,  // capacity-proportional over non-slack units
    SlackOnly,   // all extra demand taken by the slack bus
};

struct PvPoint {
    double load_scale = 0.0;
    double v_mag = 0.0;
};

struct PvCurve {
    std::vector<PvPoint> points;
    double nose_scale = 0.0;
    std::string stop_reason;
};

struct PvOptions {
    SolverOptions solver;
    GenerationPolicy generation = GenerationPolicy::Reschedule;
    int max_points = 2000;
};

/// Scales all loads by 1, 1+step, ... until the solver fails. Throws InfeasibleError
/// ("base case infeasible") if the unscaled case does not converge.
PvCurve trace_pv_curve(const grid::NetworkCase& c, int monitored_bus, double step, const PvOptions& options = {});

/// Uniformly scaled loads with generation adjusted per `policy`.
grid::NetworkCase scale_loads(const grid::NetworkCase& c, double factor, GenerationPolicy policy);

}  // namespace vsa::powerflow
