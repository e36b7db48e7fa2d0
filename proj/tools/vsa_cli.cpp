// Command-line entry point: case checks, PV curves, configuration screening, dataset generation,
// two-phase training and summary reports.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

#include "vsa/dataset.hpp"
#include "vsa/error.hpp"
#include "vsa/powerflow.hpp"
#include "vsa/security.hpp"
#include "vsa/text.hpp"
#include "vsa/trainer.hpp"

namespace fs = std::filesystem;
using namespace vsa;

namespace {

constexpr int kExitDomain = 1;
constexpr int kExitUsage = 2;

/// Bad invocation detected after CLI parsing (e.g. an empty configuration list).
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string g_data_dir;

/// Relative inputs that do not exist are looked up under the data directory.
fs::path resolve_input(const std::string& p) {
    fs::path path(p);
    if (path.is_absolute() || fs::exists(path) || g_data_dir.empty()) return path;
    auto candidate = fs::path(g_data_dir) / path;
    return fs::exists(candidate) ? candidate : path;
}

std::vector<grid::BranchRef> load_refs(const std::string& p) {
    return security::load_contingency_list(resolve_input(p));
}

/// Shortest form after rounding away summation noise.
std::string total(double v) { return text::format_double(std::round(v * 1e6) / 1e6); }

std::string fixed(double v, int digits = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

// -- case-validate ----------------------------------------------------------------------------

struct CaseValidateArgs {
    std::string case_path;
};

int run_case_validate(const CaseValidateArgs& a) {
    const auto c = grid::load_case(resolve_input(a.case_path).string());
    std::size_t pq = 0;
    for (const auto& b : c.buses())
        if (b.kind == grid::BusKind::PQ) ++pq;
    std::cout << "name: " << c.name() << "\n"
              << "buses: " << c.bus_count() << "\n"
              << "pq_buses: " << pq << "\n"
              << "branches: " << c.branch_count() << "\n"
              << "in_service_branches: " << c.in_service_branch_count() << "\n"
              << "generators: " << c.generators().size() << "\n"
              << "loads: " << c.loads().size() << "\n"
              << "total_load_mw: " << total(c.total_load_mw()) << "\n"
              << "total_load_mvar: " << total(c.total_load_mvar()) << "\n"
              << "generation_capacity_mw: " << total(c.total_generation_capacity_mw()) << "\n"
              << "features: " << data::FeatureLayout(c).size() << "\n";
    return 0;
}

// -- pv-curve ---------------------------------------------------------------------------------

struct PvArgs {
    std::string case_path;
    int bus = 0;
    double step = 0.01;
    std::vector<std::string> outages;
    std::string generation = "reschedule";
    std::string out;
};

int run_pv_curve(const PvArgs& a) {
    const auto c = grid::load_case(resolve_input(a.case_path).string());
    powerflow::PvOptions opts;
    opts.generation =
        a.generation == "slack" ? powerflow::GenerationPolicy::SlackOnly : powerflow::GenerationPolicy::Reschedule;

    std::vector<std::pair<std::string, powerflow::PvCurve>> curves;
    curves.emplace_back("base", powerflow::trace_pv_curve(c, a.bus, a.step, opts));
    for (const auto& o : a.outages) {
        const auto ref = grid::BranchRef::parse(o);
        const auto outaged = grid::apply_outage(c, c.branch_index(ref));
        curves.emplace_back(ref.to_string(), powerflow::trace_pv_curve(outaged, a.bus, a.step, opts));
    }

    std::ostringstream out;
    out << "# monitored_bus: " << a.bus << "\n# step: " << text::format_double(a.step) << "\n";
    for (const auto& [name, curve] : curves)
        out << "# nose_scale " << name << ": " << fixed(curve.nose_scale) << " (" << curve.stop_reason << ")\n";
    out << "configuration,load_scale,v_mag\n";
    for (const auto& [name, curve] : curves)
        for (const auto& p : curve.points) out << name << ',' << fixed(p.load_scale) << ',' << fixed(p.v_mag, 8) << '\n';
    text::write_file(a.out, out.str());

    for (const auto& [name, curve] : curves)
        std::cout << "nose_scale " << name << ": " << fixed(curve.nose_scale) << "\n";
    return 0;
}

// -- screen -----------------------------------------------------------------------------------

struct ScreenArgs {
    std::string case_path;
    std::string configs;
    std::string csc;
    double scale = 1.0;
    double dv_limit = 0.05;
    int exponent = 1;
    std::string out;
};

std::vector<std::string> read_configurations(const fs::path& path) {
    const auto content = text::read_file(path);
    std::vector<std::string> out;
    for (auto line : text::split(content, '\n')) {
        const auto hash = line.find('#');
        if (hash != std::string_view::npos) line = line.substr(0, hash);
        line = text::trim(line);
        if (!line.empty()) out.emplace_back(line);
    }
    return out;
}

int run_screen(const ScreenArgs& a) {
    if (a.configs.empty() == a.csc.empty()) throw UsageError("screen needs exactly one of --configs or --csc");
    auto c = grid::load_case(resolve_input(a.case_path).string());
    security::ScreenOptions opts;
    opts.piv.default_dv_limit = a.dv_limit;
    opts.piv.exponent = a.exponent;
    if (a.scale != 1.0) c = powerflow::scale_loads(c, a.scale, powerflow::GenerationPolicy::Reschedule);

    if (!a.configs.empty()) {
        const auto configs = read_configurations(resolve_input(a.configs));
        if (configs.empty()) throw UsageError("configuration list '" + a.configs + "' is empty");
        const auto rows = security::assess_configurations(c, configs, opts);
        text::write_file(a.out, security::render_assessments(rows));
        std::map<security::Category, int> counts;
        for (const auto& r : rows) ++counts[r.category];
        std::cout << "configurations: " << rows.size() << " (CSC " << counts[security::Category::CSC] << ", TC "
                  << counts[security::Category::TC] << ", Negligible " << counts[security::Category::Negligible]
                  << ")\n";
        return 0;
    }
    const auto cscs = load_refs(a.csc);
    if (cscs.empty()) throw UsageError("contingency list '" + a.csc + "' is empty");
    const auto result = security::run_contingency_screen(c, cscs, {}, opts);
    text::write_file(a.out, security::render_screen_report(result));
    std::cout << "label: " << security::to_string(result.label) << "\n";
    return 0;
}

// -- gen-dataset ------------------------------------------------------------------------------

struct GenArgs {
    std::string case_path;
    std::string csc;
    std::string tc;
    double tc_fraction = 0.0;
    std::size_t n = 4000;
    std::uint64_t seed = 1;
    double scale_lo = 0.8;
    double scale_hi = 1.05;
    unsigned threads = 0;
    std::string out;
};

int run_gen_dataset(const GenArgs& a) {
    const auto c = grid::load_case(resolve_input(a.case_path).string());
    data::DatasetConfig cfg;
    cfg.n_samples = a.n;
    cfg.scale_range = {a.scale_lo, a.scale_hi};
    cfg.tc_fraction = a.tc_fraction;
    if (!a.tc.empty()) cfg.tc_list = load_refs(a.tc);
    cfg.csc_list = load_refs(a.csc);
    cfg.seed = a.seed;
    cfg.threads = a.threads;
    const auto ds = data::build_dataset(c, cfg);
    data::write_dataset(ds, a.out);
    std::cout << "samples: " << ds.size() << " (Secure " << ds.count(security::Label::Secure) << ", Insecure "
              << ds.count(security::Label::Insecure) << ", with TC " << ds.count_with_tc() << ")\n"
              << "features: " << ds.feature_count() << "\nrejections: " << ds.rejections << "\n";
    for (const auto& note : ds.notes) std::cout << "note: " << note << "\n";
    return 0;
}

// -- train / report ---------------------------------------------------------------------------

struct TrainArgs {
    std::string config;
    std::string out;
    int threads = -1;
};

int run_train(const TrainArgs& a) {
    auto cfg = train::load_experiment_config(resolve_input(a.config));
    if (a.threads >= 0) cfg.threads = static_cast<unsigned>(a.threads);
    const auto result = train::run_experiment(cfg, fs::path(a.out));
    std::cout << train::render_summary(result.summary);
    return 0;
}

struct ReportArgs {
    std::string logs;
    std::vector<std::size_t> init_checkpoints = {1000, 2000};
    std::vector<std::size_t> update_checkpoints = {1000, 2000, 3000, 4000};
    std::string out;
};

int run_report(const ReportArgs& a) {
    std::vector<fs::path> files;
    if (!fs::is_directory(a.logs)) throw Error("log directory '" + a.logs + "' not found");
    for (const auto& e : fs::directory_iterator(a.logs)) {
        const auto name = e.path().filename().string();
        if (e.is_regular_file() && name.starts_with("log_") && name.ends_with(".csv")) files.push_back(e.path());
    }
    if (files.empty()) throw Error("no log_*.csv files in '" + a.logs + "'");

    std::vector<train::TrainingLog> logs;
    for (const auto& f : files) logs.push_back(train::parse_log(text::read_file(f)));
    auto rank = [](const std::string& name) {
        for (std::size_t i = 0; i < optim::kAllAlgorithms.size(); ++i)
            if (optim::to_string(optim::kAllAlgorithms[i]) == name) return i;
        return optim::kAllAlgorithms.size();
    };
    std::sort(logs.begin(), logs.end(), [&](const auto& x, const auto& y) {
        return std::pair(rank(x.algorithm), x.algorithm) < std::pair(rank(y.algorithm), y.algorithm);
    });
    const auto table = train::render_summary(train::summarize(logs, a.init_checkpoints, a.update_checkpoints));
    if (a.out.empty()) std::cout << table;
    else text::write_file(a.out, table);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Voltage security assessment workbench"};
    app.require_subcommand(1);
    if (const char* env = std::getenv("VSA_DATA_DIR")) g_data_dir = env;
    app.add_option("--data-dir", g_data_dir, "Directory searched for relative input files (default: $VSA_DATA_DIR)");

    CaseValidateArgs cv;
    auto* cmd_cv = app.add_subcommand("case-validate", "Parse and validate a case file, print its totals");
    cmd_cv->add_option("--case", cv.case_path, "Case file")->required();

    PvArgs pv;
    auto* cmd_pv = app.add_subcommand("pv-curve", "Trace PV curves for the base case and optional outages");
    cmd_pv->add_option("--case", pv.case_path, "Case file")->required();
    cmd_pv->add_option("--bus", pv.bus, "Monitored bus id")->required();
    cmd_pv->add_option("--step", pv.step, "Load multiplier increment")->check(CLI::PositiveNumber);
    cmd_pv->add_option("--outage", pv.outages, "Branch outage from-to[:circuit]; repeatable");
    cmd_pv->add_option("--generation", pv.generation, "Who covers extra load: reschedule or slack")
        ->check(CLI::IsMember({"reschedule", "slack"}));
    cmd_pv->add_option("--out", pv.out, "Output curve file")->required();

    ScreenArgs sc;
    auto* cmd_sc = app.add_subcommand("screen", "Rank configurations by PI_V, or N-1 screen against a CSC list");
    cmd_sc->add_option("--case", sc.case_path, "Case file")->required();
    cmd_sc->add_option("--configs", sc.configs, "Configuration list to rank (one outage or 'base' per line)");
    cmd_sc->add_option("--csc", sc.csc, "Contingency list for a Secure/Insecure screen");
    cmd_sc->add_option("--scale", sc.scale, "Uniform load multiplier applied before screening")
        ->check(CLI::PositiveNumber);
    cmd_sc->add_option("--dv-limit", sc.dv_limit, "Allowed voltage deviation per bus for PI_V (p.u.)")
        ->check(CLI::PositiveNumber);
    cmd_sc->add_option("--exponent", sc.exponent, "PI_V exponent n")->check(CLI::PositiveNumber);
    cmd_sc->add_option("--out", sc.out, "Output report file")->required();

    GenArgs gen;
    auto* cmd_gen = app.add_subcommand("gen-dataset", "Generate a labeled operating-condition dataset");
    cmd_gen->add_option("--case", gen.case_path, "Case file")->required();
    cmd_gen->add_option("--csc", gen.csc, "Contingency list used for labeling")->required();
    cmd_gen->add_option("--tc", gen.tc, "Topology-change list drawn into operating conditions");
    cmd_gen->add_option("--tc-fraction", gen.tc_fraction, "Fraction of samples carrying a topology change")
        ->check(CLI::Range(0.0, 1.0));
    cmd_gen->add_option("-n,--n", gen.n, "Number of accepted samples")->check(CLI::PositiveNumber);
    cmd_gen->add_option("--seed", gen.seed, "Base seed; sample i uses seed + i");
    cmd_gen->add_option("--scale-lo", gen.scale_lo, "Lower load scale factor");
    cmd_gen->add_option("--scale-hi", gen.scale_hi, "Upper load scale factor");
    cmd_gen->add_option("--threads", gen.threads, "Worker threads (0 = all cores)");
    cmd_gen->add_option("--out", gen.out, "Output dataset file")->required();

    TrainArgs tr;
    auto* cmd_tr = app.add_subcommand("train", "Run the two-phase online training experiment");
    cmd_tr->add_option("--config", tr.config, "Experiment file")->required();
    cmd_tr->add_option("--out", tr.out, "Output directory for logs and summary.csv")->required();
    cmd_tr->add_option("--threads", tr.threads, "Algorithms trained concurrently (0 = all cores)");

    ReportArgs rep;
    auto* cmd_rep = app.add_subcommand("report", "Rebuild the checkpoint summary table from training logs");
    cmd_rep->add_option("--logs", rep.logs, "Directory holding log_<algorithm>.csv files")->required();
    cmd_rep->add_option("--init-checkpoints", rep.init_checkpoints, "Initialization-phase epochs to report")
        ->delimiter(',');
    cmd_rep->add_option("--update-checkpoints", rep.update_checkpoints, "Update-phase epochs to report")
        ->delimiter(',');
    cmd_rep->add_option("--out", rep.out, "Output file (default: standard output)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kExitUsage;
    }

    try {
        if (*cmd_cv) return run_case_validate(cv);
        if (*cmd_pv) return run_pv_curve(pv);
        if (*cmd_sc) return run_screen(sc);
        if (*cmd_gen) return run_gen_dataset(gen);
        if (*cmd_tr) return run_train(tr);
        if (*cmd_rep) return run_report(rep);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitDomain;
    }
    return kExitUsage;
}
