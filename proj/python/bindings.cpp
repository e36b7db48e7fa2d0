#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "vsa/dataset.hpp"
#include "vsa/error.hpp"
#include "vsa/mlp.hpp"
#include "vsa/optimizers.hpp"
#include "vsa/powerflow.hpp"
#include "vsa/security.hpp"
#include "vsa/trainer.hpp"

namespace py = pybind11;
using namespace vsa;

namespace {

std::vector<grid::BranchRef> to_refs(const std::vector<std::string>& items) {
    std::vector<grid::BranchRef> out;
    out.reserve(items.size());
    for (const auto& s : items) out.push_back(grid::BranchRef::parse(s));
    return out;
}

nn::Architecture make_arch(const std::vector<std::size_t>& layers, const std::string& activation) {
    nn::Architecture arch{layers, nn::parse_activation(activation)};
    arch.validate();
    return arch;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Power-flow labeling and optimizer comparison core";

    // Later registrations are tried first, so the subclasses come after the base.
    auto& base_error = py::register_exception<Error>(m, "VsaError", PyExc_ValueError);
    py::register_exception<IslandingError>(m, "IslandingError", base_error.ptr());
    py::register_exception<NonFiniteGradientError>(m, "NonFiniteGradientError", base_error.ptr());

    // -- network -------------------------------------------------------------------------------
    py::class_<grid::NetworkCase>(m, "NetworkCase")
        .def_property_readonly("name", &grid::NetworkCase::name)
        .def_property_readonly("base_mva", &grid::NetworkCase::base_mva)
        .def_property_readonly("bus_count", &grid::NetworkCase::bus_count)
        .def_property_readonly("branch_count", &grid::NetworkCase::branch_count)
        .def_property_readonly("in_service_branch_count", &grid::NetworkCase::in_service_branch_count)
        .def_property_readonly("total_load_mw", &grid::NetworkCase::total_load_mw)
        .def_property_readonly("total_load_mvar", &grid::NetworkCase::total_load_mvar)
        .def_property_readonly("bus_ids",
                               [](const grid::NetworkCase& c) {
                                   std::vector<int> ids;
                                   for (const auto& b : c.buses()) ids.push_back(b.id);
                                   return ids;
                               })
        .def("branch_index", [](const grid::NetworkCase& c, const std::string& ref) {
            return c.branch_index(grid::BranchRef::parse(ref));
        })
        .def("__eq__", [](const grid::NetworkCase& a, const grid::NetworkCase& b) { return a == b; });

    m.def("parse_case", &grid::parse_case, py::arg("text"));
    m.def("load_case", &grid::load_case, py::arg("path"));
    m.def("render_case", &grid::render_case, py::arg("case"));
    m.def("apply_outage", &grid::apply_outage, py::arg("case"), py::arg("branch_index"));

    // -- power flow ----------------------------------------------------------------------------
    py::class_<powerflow::PowerFlowSolution>(m, "PowerFlowSolution")
        .def_readonly("v_mag", &powerflow::PowerFlowSolution::v_mag)
        .def_readonly("v_ang", &powerflow::PowerFlowSolution::v_ang)
        .def_readonly("p_from", &powerflow::PowerFlowSolution::p_from)
        .def_readonly("q_from", &powerflow::PowerFlowSolution::q_from)
        .def_readonly("p_to", &powerflow::PowerFlowSolution::p_to)
        .def_readonly("q_to", &powerflow::PowerFlowSolution::q_to)
        .def_readonly("i_from", &powerflow::PowerFlowSolution::i_from)
        .def_readonly("converged", &powerflow::PowerFlowSolution::converged)
        .def_readonly("iterations", &powerflow::PowerFlowSolution::iterations)
        .def_readonly("max_mismatch", &powerflow::PowerFlowSolution::max_mismatch)
        .def_readonly("diagnostic", &powerflow::PowerFlowSolution::diagnostic);

    m.def("build_ybus", &powerflow::build_ybus, py::arg("case"));
    m.def(
        "solve_powerflow",
        [](const grid::NetworkCase& c, double tolerance, int max_iter, bool enforce_q_limits) {
            powerflow::SolverOptions o;
            o.tolerance = tolerance;
            o.max_iter = max_iter;
            o.enforce_q_limits = enforce_q_limits;
            return powerflow::solve_powerflow(c, o);
        },
        py::arg("case"), py::arg("tolerance") = 1e-8, py::arg("max_iter") = 20, py::arg("enforce_q_limits") = true);

    py::class_<powerflow::PvCurve>(m, "PvCurve")
        .def_readonly("nose_scale", &powerflow::PvCurve::nose_scale)
        .def_readonly("stop_reason", &powerflow::PvCurve::stop_reason)
        .def_property_readonly("points", [](const powerflow::PvCurve& c) {
            std::vector<std::pair<double, double>> pts;
            for (const auto& p : c.points) pts.emplace_back(p.load_scale, p.v_mag);
            return pts;
        });
    m.def(
        "trace_pv_curve",
        [](const grid::NetworkCase& c, int bus, double step, bool slack_only) {
            powerflow::PvOptions o;
            if (slack_only) o.generation = powerflow::GenerationPolicy::SlackOnly;
            return powerflow::trace_pv_curve(c, bus, step, o);
        },
        py::arg("case"), py::arg("bus"), py::arg("step"), py::arg("slack_only") = false);

    // -- security ------------------------------------------------------------------------------
    m.def(
        "compute_piv",
        [](const Eigen::VectorXd& pre, const Eigen::VectorXd& post, double dv_limit, int exponent) {
            security::PivConfig cfg;
            cfg.default_dv_limit = dv_limit;
            cfg.exponent = exponent;
            return security::compute_piv(pre, post, cfg);
        },
        py::arg("v_pre"), py::arg("v_post"), py::arg("dv_limit") = 0.05, py::arg("exponent") = 1);
    m.def(
        "classify",
        [](double pi_v, double flow_delta) { return std::string(security::to_string(security::classify(pi_v, flow_delta))); },
        py::arg("pi_v"), py::arg("max_flow_delta_mw"));
    m.def(
        "screen",
        [](const grid::NetworkCase& c, const std::vector<std::string>& csc) {
            const auto r = security::run_contingency_screen(c, to_refs(csc));
            return std::string(security::to_string(r.label));
        },
        py::arg("case"), py::arg("csc_list"));
    m.def(
        "assess_configurations",
        [](const grid::NetworkCase& c, const std::vector<std::string>& configs) {
            py::list rows;
            for (const auto& a : security::assess_configurations(c, configs)) {
                py::dict d;
                d["configuration"] = a.configuration;
                d["pi_v"] = a.pi_v;
                d["max_flow_delta_mw"] = a.max_flow_delta_mw;
                d["category"] = std::string(security::to_string(a.category));
                rows.append(d);
            }
            return rows;
        },
        py::arg("case"), py::arg("configurations"));

    // -- datasets ------------------------------------------------------------------------------
    py::class_<data::Dataset>(m, "Dataset")
        .def_property_readonly("size", &data::Dataset::size)
        .def_readonly("feature_names", &data::Dataset::feature_names)
        .def_readonly("config_digest", &data::Dataset::config_digest)
        .def_readonly("rejections", &data::Dataset::rejections)
        .def_property_readonly("features",
                               [](const data::Dataset& ds) { return train::to_design_matrix(ds).x.transpose().eval(); })
        .def_property_readonly("labels",
                               [](const data::Dataset& ds) {
                                   // file convention: 1 = Secure, 0 = Insecure
                                   std::vector<int> y;
                                   for (const auto& s : ds.samples) y.push_back(s.label == security::Label::Secure);
                                   return y;
                               })
        .def_property_readonly("tc_count", &data::Dataset::count_with_tc);

    m.def(
        "build_dataset",
        [](const grid::NetworkCase& c, std::size_t n, std::uint64_t seed, const std::vector<std::string>& csc,
           const std::vector<std::string>& tc, double tc_fraction, double scale_lo, double scale_hi) {
            data::DatasetConfig cfg;
            cfg.n_samples = n;
            cfg.seed = seed;
            cfg.csc_list = to_refs(csc);
            cfg.tc_list = to_refs(tc);
            cfg.tc_fraction = tc_fraction;
            cfg.scale_range = {scale_lo, scale_hi};
            py::gil_scoped_release release;
            return data::build_dataset(c, cfg);
        },
        py::arg("case"), py::arg("n"), py::arg("seed"), py::arg("csc_list"), py::arg("tc_list") = std::vector<std::string>{},
        py::arg("tc_fraction") = 0.0, py::arg("scale_lo") = 0.8, py::arg("scale_hi") = 1.05);
    m.def("split_dataset", &data::split_dataset, py::arg("dataset"), py::arg("train_fraction"), py::arg("seed"));
    m.def("write_dataset", &data::write_dataset, py::arg("dataset"), py::arg("path"));
    m.def("read_dataset", &data::read_dataset, py::arg("path"));

    // -- network model and optimizers ----------------------------------------------------------
    m.def(
        "init_params",
        [](const std::vector<std::size_t>& layers, std::uint64_t seed, const std::string& activation) {
            return nn::init_params(make_arch(layers, activation), seed);
        },
        py::arg("layer_sizes"), py::arg("seed"), py::arg("activation") = "relu");
    m.def(
        "loss_and_gradient",
        [](const Eigen::VectorXd& theta, const std::vector<std::size_t>& layers, const Eigen::MatrixXd& x,
           const std::vector<int>& labels, const std::string& activation) {
            // x holds one sample per row, as numpy users expect
            const Eigen::MatrixXd cols = x.transpose();
            auto r = nn::loss_and_gradient(theta, make_arch(layers, activation), cols, labels);
            return py::make_tuple(r.loss, r.gradient);
        },
        py::arg("theta"), py::arg("layer_sizes"), py::arg("x"), py::arg("labels"), py::arg("activation") = "relu");
    m.def(
        "predict_proba",
        [](const Eigen::VectorXd& theta, const std::vector<std::size_t>& layers, const Eigen::VectorXd& x,
           const std::string& activation) { return nn::forward(theta, make_arch(layers, activation), x); },
        py::arg("theta"), py::arg("layer_sizes"), py::arg("x"), py::arg("activation") = "relu");

    m.attr("ALGORITHMS") = [] {
        std::vector<std::string> names;
        for (auto a : optim::kAllAlgorithms) names.emplace_back(optim::to_string(a));
        return names;
    }();

    py::class_<optim::Optimizer>(m, "Optimizer")
        .def(py::init([](const std::string& algorithm, std::optional<double> learning_rate, double momentum,
                         double beta1, double beta2, double epsilon) {
                 auto cfg = optim::OptimizerConfig::defaults(optim::parse_algorithm(algorithm));
                 if (learning_rate) cfg.learning_rate = *learning_rate;
                 cfg.momentum = momentum;
                 cfg.beta1 = beta1;
                 cfg.beta2 = beta2;
                 cfg.epsilon = epsilon;
                 return optim::Optimizer(cfg);
             }),
             py::arg("algorithm"), py::arg("learning_rate") = py::none(), py::arg("momentum") = 0.9,
             py::arg("beta1") = 0.9, py::arg("beta2") = 0.999, py::arg("epsilon") = 1e-8)
        .def(
            "step",
            [](optim::Optimizer& o, const Eigen::VectorXd& theta, const std::function<Eigen::VectorXd(Eigen::VectorXd)>& grad) {
                Eigen::VectorXd next = theta;
                Eigen::VectorXd delta = o.step(next, [&](const Eigen::VectorXd& t) { return grad(t); });
                return py::make_tuple(next, delta);
            },
            py::arg("theta"), py::arg("grad_fn"), "Returns (theta_next, delta).")
        .def_property_readonly("k", [](const optim::Optimizer& o) { return o.state().k; })
        .def_property_readonly("learning_rate", [](const optim::Optimizer& o) { return o.config().learning_rate; })
        .def_property_readonly("checksum", [](const optim::Optimizer& o) { return o.state().checksum(); });

    // -- experiments ---------------------------------------------------------------------------
    m.def(
        "run_experiment",
        [](const std::filesystem::path& config, const std::filesystem::path& out_dir) {
            const auto cfg = train::load_experiment_config(config);
            py::gil_scoped_release release;
            return train::render_summary(train::run_experiment(cfg, out_dir).summary);
        },
        py::arg("config"), py::arg("out_dir"), "Runs an experiment file and returns the summary table text.");
}
