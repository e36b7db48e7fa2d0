#include "vsa/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "vsa/error.hpp"
#include "vsa/text.hpp"

namespace vsa::data {

using security::Label;

namespace {

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t sub = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      static_cast<std::uint32_t>(sub)};
    return std::mt19937_64(seq);
}

constexpr std::uint64_t kDrawStream = 0x4f43;  // "OC"
constexpr std::uint64_t kTcStream = 0x5443;    // "TC"
constexpr std::uint64_t kSplitStream = 0x5350;  // "SP"

std::string refs_to_string(const std::vector<grid::BranchRef>& refs) {
    std::string s;
    for (std::size_t i = 0; i < refs.size(); ++i) {
        if (i) s += ' ';
        s += refs[i].to_string();
    }
    return s;
}

}  // namespace

// ---------------------------------------------------------------------------------------------
// Generation rescheduling

grid::NetworkCase reschedule_generation(const grid::NetworkCase& c, double delta_p_mw) {
    if (delta_p_mw == 0.0) return c;
    auto gens = c.generators();
    const int slack_bus = c.buses()[c.slack_index()].id;

    double room = 0.0;
    for (const auto& g : gens) {
        if (!g.in_service) continue;
        room += delta_p_mw > 0.0 ? g.p_max - g.p_mw : g.p_mw;
    }
    if (std::abs(delta_p_mw) > room + 1e-9)
        throw InfeasibleError("generation change of " + text::format_double(delta_p_mw) +
                              " MW exceeds aggregate capacity (available " + text::format_double(room) + " MW)");

    std::vector<std::size_t> active;
    for (std::size_t k = 0; k < gens.size(); ++k)
        if (gens[k].in_service && gens[k].bus != slack_bus && gens[k].p_max > 0.0) active.push_back(k);

    double remaining = delta_p_mw;
    while (!active.empty() && std::abs(remaining) > 1e-9) {
        double capacity = 0.0;
        for (auto k : active) capacity += gens[k].p_max;
        std::vector<std::size_t> still_free;
        double moved = 0.0;
        for (auto k : active) {
            auto& g = gens[k];
            const double target = g.p_mw + remaining * g.p_max / capacity;
            const double clamped = std::clamp(target, 0.0, g.p_max);
            moved += clamped - g.p_mw;
            g.p_mw = clamped;
            if (clamped == target) still_free.push_back(k);
        }
        remaining -= moved;
        if (still_free.size() == active.size()) break;
        active = std::move(still_free);
    }
    // Whatever is left is picked up by the slack bus during the solve.
    return c.with_generators(std::move(gens));
}

// ---------------------------------------------------------------------------------------------
// Operating conditions

std::vector<double> draw_load_scales(std::size_t load_count, std::uint64_t sample_seed, int attempt,
                                     const ScaleRange& range) {
    auto rng = make_rng(sample_seed, kDrawStream, static_cast<std::uint64_t>(attempt));
    std::uniform_real_distribution<double> dist(range.lo, range.hi);
    std::vector<double> out(load_count);
    for (auto& s : out) s = range.lo == range.hi ? range.lo : dist(rng);
    return out;
}

grid::NetworkCase make_draw(const grid::NetworkCase& base, const std::vector<double>& load_scales,
                            const std::optional<grid::BranchRef>& tc) {
    if (load_scales.size() != base.loads().size()) throw DimensionError("one scale factor per load expected");
    auto loads = base.loads();
    for (std::size_t k = 0; k < loads.size(); ++k) {
        loads[k].p_mw *= load_scales[k];
        loads[k].q_mvar *= load_scales[k];
    }
    auto scaled = base.with_loads(std::move(loads));
    scaled = reschedule_generation(scaled, scaled.total_load_mw() - base.total_load_mw());
    if (tc) scaled = grid::apply_outage(scaled, scaled.branch_index(*tc));
    return scaled;
}

OperatingCondition generate_oc(const grid::NetworkCase& base, std::uint64_t sample_seed, const ScaleRange& range,
                               const std::optional<grid::BranchRef>& tc, const GenerationOptions& options) {
    if (!(range.lo <= range.hi)) throw ValidationError("scale range needs lo <= hi");
    if (!(range.lo >= 0.0)) throw ValidationError("scale range must be non-negative");
    for (int attempt = 0; attempt < options.max_consecutive_rejections; ++attempt) {
        auto scales = draw_load_scales(base.loads().size(), sample_seed, attempt, range);
        grid::NetworkCase drawn = base;
        try {
            drawn = make_draw(base, scales, tc);
        } catch (const InfeasibleError&) {
            continue;  // not enough generation headroom for this draw
        }
        auto sol = powerflow::solve_powerflow(drawn, options.solver);
        if (!sol.converged) continue;
        return {std::move(drawn), std::move(sol), std::move(scales), sample_seed, attempt};
    }
    throw InfeasibleError("infeasible generation config: " + std::to_string(options.max_consecutive_rejections) +
                          " consecutive rejected draws for seed " + std::to_string(sample_seed));
}

// ---------------------------------------------------------------------------------------------
// Features

FeatureLayout::FeatureLayout(const grid::NetworkCase& base) {
    std::vector<std::pair<int, std::size_t>> pq;
    for (std::size_t i = 0; i < base.bus_count(); ++i)
        if (base.buses()[i].kind == grid::BusKind::PQ) pq.emplace_back(base.buses()[i].id, i);
    std::sort(pq.begin(), pq.end());
    for (const auto& [id, idx] : pq) load_buses_.push_back(idx);
    for (std::size_t k = 0; k < base.branch_count(); ++k)
        if (base.branches()[k].in_service) branches_.push_back(k);

    for (const auto& [id, idx] : pq) names_.push_back("vm_" + std::to_string(id));
    for (const auto& [id, idx] : pq) names_.push_back("va_" + std::to_string(id));
    for (const char* prefix : {"i_", "p_", "q_"})
        for (auto k : branches_) names_.push_back(prefix + base.branch_ref(k).to_string());
}

std::vector<double> FeatureLayout::extract(const powerflow::PowerFlowSolution& solution) const {
    if (!solution.converged) throw InfeasibleError("features need a converged solution");
    std::vector<double> x;
    x.reserve(size());
    for (auto i : load_buses_) x.push_back(solution.v_mag[static_cast<Eigen::Index>(i)]);
    for (auto i : load_buses_) x.push_back(solution.v_ang[static_cast<Eigen::Index>(i)]);
    for (auto k : branches_) x.push_back(solution.i_from[static_cast<Eigen::Index>(k)]);
    for (auto k : branches_) x.push_back(solution.p_from[static_cast<Eigen::Index>(k)]);
    for (auto k : branches_) x.push_back(solution.q_from[static_cast<Eigen::Index>(k)]);
    return x;
}

std::vector<double> extract_features(const powerflow::PowerFlowSolution& solution, const grid::NetworkCase& base) {
    return FeatureLayout(base).extract(solution);
}

// ---------------------------------------------------------------------------------------------
// Datasets

std::size_t Dataset::count(Label label) const {
    return static_cast<std::size_t>(
        std::count_if(samples.begin(), samples.end(), [&](const LabeledSample& s) { return s.label == label; }));
}

std::size_t Dataset::count_with_tc() const {
    return static_cast<std::size_t>(
        std::count_if(samples.begin(), samples.end(), [](const LabeledSample& s) { return s.meta.tc.has_value(); }));
}

void DatasetConfig::validate() const {
    if (n_samples == 0) throw ValidationError("n_samples must be positive");
    if (!(scale_range.lo <= scale_range.hi) || scale_range.lo < 0.0) throw ValidationError("invalid scale range");
    if (!(tc_fraction >= 0.0 && tc_fraction <= 1.0)) throw ValidationError("tc_fraction must lie in [0, 1]");
    if (tc_fraction > 0.0 && tc_list.empty()) throw ValidationError("tc_fraction > 0 needs a TC list");
    if (csc_list.empty()) throw ValidationError("no contingencies configured");
    limits.validate();
}

std::string DatasetConfig::canonical() const {
    std::ostringstream out;
    out << "n_samples=" << n_samples << "\nscale_lo=" << text::format_double(scale_range.lo)
        << "\nscale_hi=" << text::format_double(scale_range.hi) << "\ntc_fraction=" << text::format_double(tc_fraction)
        << "\ntc_list=" << refs_to_string(tc_list) << "\ncsc_list=" << refs_to_string(csc_list) << "\nseed=" << seed
        << "\nv_min=" << text::format_double(limits.v_min) << "\nv_max=" << text::format_double(limits.v_max)
        << "\nloading_limit=" << text::format_double(limits.loading_limit)
        << "\nuse_bus_limits=" << (limits.use_bus_limits ? 1 : 0)
        << "\ntolerance=" << text::format_double(generation.solver.tolerance)
        << "\nmax_iter=" << generation.solver.max_iter << "\nq_limits=" << generation.solver.enforce_q_limits << '\n';
    return out.str();
}

std::vector<std::optional<grid::BranchRef>> plan_topology_changes(std::size_t n, double fraction,
                                                                  const std::vector<grid::BranchRef>& tc_list,
                                                                  std::uint64_t seed) {
    std::vector<std::optional<grid::BranchRef>> plan(n);
    const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    if (count == 0) return plan;
    if (tc_list.empty()) throw ValidationError("TC fraction > 0 needs a TC list");
    auto rng = make_rng(seed, kTcStream);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count));
    std::uniform_int_distribution<std::size_t> pick(0, tc_list.size() - 1);
    for (std::size_t k = 0; k < count; ++k) plan[order[k]] = tc_list[pick(rng)];
    return plan;
}

namespace {

struct SampleOutcome {
    LabeledSample sample;
    std::size_t rejections = 0;
};

SampleOutcome label_sample(const grid::NetworkCase& base, const FeatureLayout& layout, const DatasetConfig& config,
                           const ScaleRange& range, std::uint64_t sample_seed,
                           const std::optional<grid::BranchRef>& tc) {
    auto oc = generate_oc(base, sample_seed, range, tc, config.generation);
    security::ScreenOptions screen_options;
    screen_options.solver = config.generation.solver;
    screen_options.stop_at_first_failure = true;
    const auto screen =
        security::run_contingency_screen(oc.scaled_case, oc.solution, config.csc_list, config.limits, screen_options);
    SampleOutcome out;
    out.sample.features = layout.extract(oc.solution);
    out.sample.label = screen.label;
    out.sample.meta = {sample_seed, oc.attempt, tc};
    out.rejections = static_cast<std::size_t>(oc.attempt);
    return out;
}

Dataset generate_all(const grid::NetworkCase& base, const DatasetConfig& config, const ScaleRange& range) {
    const FeatureLayout layout(base);
    const auto plan = plan_topology_changes(config.n_samples, config.tc_fraction, config.tc_list, config.seed);
    std::vector<SampleOutcome> outcomes(config.n_samples);

    unsigned threads = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, config.n_samples));
    std::vector<std::exception_ptr> errors(threads);
    auto work = [&](unsigned worker) {
        try {
            for (std::size_t i = worker; i < config.n_samples; i += threads)
                outcomes[i] = label_sample(base, layout, config, range, config.seed + i, plan[i]);
        } catch (...) {
            errors[worker] = std::current_exception();
        }
    };
    if (threads <= 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < threads; ++w) pool.emplace_back(work, w);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    Dataset ds;
    ds.feature_names = layout.names();
    ds.seed = config.seed;
    ds.samples.reserve(config.n_samples);
    for (auto& o : outcomes) {
        ds.rejections += o.rejections;
        ds.samples.push_back(std::move(o.sample));
    }
    return ds;
}

}  // namespace

Dataset build_dataset(const grid::NetworkCase& base, const DatasetConfig& config) {
    config.validate();
    ScaleRange range = config.scale_range;
    Dataset ds = generate_all(base, config, range);
    std::vector<std::string> notes;
    for (int w = 0; config.ensure_both_labels && w < config.max_widenings && ds.count(Label::Insecure) == 0; ++w) {
        range.hi += config.widen_step;
        notes.push_back("all samples Secure; scale range widened to [" + text::format_double(range.lo) + ", " +
                        text::format_double(range.hi) + "]");
        ds = generate_all(base, config, range);
    }
    if (ds.count(Label::Insecure) == 0 || ds.count(Label::Secure) == 0)
        notes.push_back("dataset contains a single label");
    ds.notes = std::move(notes);
    ds.scale_range = range;
    // The digest covers the network as well as the generation settings.
    const auto canonical = config.canonical();
    const auto network = grid::render_case(base);
    ds.config_digest = text::hex64(
        text::fnv1a(network.data(), network.size(), text::fnv1a(canonical.data(), canonical.size())));
    return ds;
}

LabeledSample regenerate_sample(const grid::NetworkCase& base, const DatasetConfig& config, const SampleMeta& meta) {
    auto scales = draw_load_scales(base.loads().size(), meta.sample_seed, meta.attempt, config.scale_range);
    auto drawn = make_draw(base, scales, meta.tc);
    auto sol = powerflow::solve_powerflow(drawn, config.generation.solver);
    if (!sol.converged) throw InfeasibleError("stored draw no longer converges");
    security::ScreenOptions screen_options;
    screen_options.solver = config.generation.solver;
    screen_options.stop_at_first_failure = true;
    const auto screen = security::run_contingency_screen(drawn, sol, config.csc_list, config.limits, screen_options);
    return {FeatureLayout(base).extract(sol), screen.label, meta};
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double train_fraction, std::uint64_t seed) {
    if (ds.samples.empty()) throw ValidationError("cannot split an empty dataset");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ValidationError("train fraction must lie in (0, 1)");
    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto rng = make_rng(seed, kSplitStream);
    std::shuffle(order.begin(), order.end(), rng);
    // The small offset keeps products such as 0.29 * 100 from flooring one short.
    const auto n_train =
        static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(ds.size()) + 1e-9));

    Dataset train, test;
    for (Dataset* part : {&train, &test}) {
        part->feature_names = ds.feature_names;
        part->config_digest = ds.config_digest;
        part->seed = ds.seed;
        part->scale_range = ds.scale_range;
    }
    for (std::size_t k = 0; k < order.size(); ++k) (k < n_train ? train : test).samples.push_back(ds.samples[order[k]]);
    return {std::move(train), std::move(test)};
}

// ---------------------------------------------------------------------------------------------
// Persistence

void write_dataset(const Dataset& ds, const std::filesystem::path& path) {
    std::string body;
    for (const auto& name : ds.feature_names) {
        body += name;
        body += ',';
    }
    body += "label\n";
    for (const auto& s : ds.samples) {
        if (s.features.size() != ds.feature_names.size()) throw DimensionError("sample width differs from header");
        for (double v : s.features) {
            body += text::format_double(v);
            body += ',';
        }
        body += s.label == Label::Secure ? "1\n" : "0\n";
    }
    text::write_file(path, body);

    std::ostringstream meta;
    meta << "format_version: 1\n";
    meta << "n_samples: " << ds.size() << "\n";
    meta << "n_features: " << ds.feature_count() << "\n";
    meta << "seed: " << ds.seed << "\n";
    meta << "config_digest: " << ds.config_digest << "\n";
    meta << "rejections: " << ds.rejections << "\n";
    meta << "scale_lo: " << text::format_double(ds.scale_range.lo) << "\n";
    meta << "scale_hi: " << text::format_double(ds.scale_range.hi) << "\n";
    meta << "secure: " << ds.count(Label::Secure) << "\n";
    meta << "insecure: " << ds.count(Label::Insecure) << "\n";
    meta << "with_tc: " << ds.count_with_tc() << "\n";
    for (const auto& n : ds.notes) meta << "note: " << n << "\n";
    text::write_file(path.string() + ".meta", meta.str());

    std::ostringstream samples;
    samples << "index,sample_seed,attempt,tc\n";
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto& m = ds.samples[i].meta;
        samples << i << ',' << m.sample_seed << ',' << m.attempt << ',' << (m.tc ? m.tc->to_string() : "none") << '\n';
    }
    text::write_file(path.string() + ".samples", samples.str());
}

Dataset read_dataset(const std::filesystem::path& path) {
    const auto content = text::read_file(path);
    Dataset ds;
    std::size_t line_no = 0;
    for (auto line : text::split(content, '\n')) {
        ++line_no;
        line = text::trim(line);
        if (line.empty()) continue;
        const auto cols = text::split(line, ',');
        if (ds.feature_names.empty()) {
            if (cols.size() < 2 || cols.back() != "label") throw ParseError(line_no, "dataset header must end in 'label'");
            for (std::size_t i = 0; i + 1 < cols.size(); ++i) ds.feature_names.emplace_back(cols[i]);
            continue;
        }
        if (cols.size() != ds.feature_names.size() + 1)
            throw ParseError(line_no, "expected " + std::to_string(ds.feature_names.size() + 1) + " columns, found " +
                                          std::to_string(cols.size()));
        LabeledSample s;
        s.features.reserve(ds.feature_names.size());
        for (std::size_t i = 0; i + 1 < cols.size(); ++i) {
            const double v = text::parse_double(cols[i], line_no);
            if (!std::isfinite(v)) throw ParseError(line_no, "non-finite feature value");
            s.features.push_back(v);
        }
        if (cols.back() == "1") s.label = Label::Secure;
        else if (cols.back() == "0") s.label = Label::Insecure;
        else throw ParseError(line_no, "label must be 1 (Secure) or 0 (Insecure)");
        ds.samples.push_back(std::move(s));
    }
    if (ds.feature_names.empty()) throw ParseError(0, "dataset file '" + path.string() + "' is empty");

    const std::filesystem::path meta_path = path.string() + ".meta";
    if (std::filesystem::exists(meta_path)) {
        const auto meta = text::read_file(meta_path);
        for (auto line : text::split(meta, '\n')) {
            const auto colon = line.find(':');
            if (colon == std::string_view::npos) continue;
            const auto key = text::trim(line.substr(0, colon));
            const auto value = text::trim(line.substr(colon + 1));
            if (key == "seed") ds.seed = static_cast<std::uint64_t>(text::parse_int(value));
            else if (key == "config_digest") ds.config_digest = std::string(value);
            else if (key == "rejections") ds.rejections = static_cast<std::size_t>(text::parse_int(value));
            else if (key == "scale_lo") ds.scale_range.lo = text::parse_double(value);
            else if (key == "scale_hi") ds.scale_range.hi = text::parse_double(value);
            else if (key == "note") ds.notes.emplace_back(value);
        }
    }
    const std::filesystem::path samples_path = path.string() + ".samples";
    if (std::filesystem::exists(samples_path)) {
        const auto rows = text::read_file(samples_path);
        std::size_t row = 0;
        for (auto line : text::split(rows, '\n')) {
            line = text::trim(line);
            if (line.empty() || line.starts_with("index")) continue;
            const auto cols = text::split(line, ',');
            if (cols.size() != 4 || row >= ds.size()) throw ParseError(0, "malformed sample metadata file");
            auto& m = ds.samples[row++].meta;
            m.sample_seed = std::stoull(std::string(cols[1]));
            m.attempt = static_cast<int>(text::parse_int(cols[2]));
            if (cols[3] != "none") m.tc = grid::BranchRef::parse(cols[3]);
        }
    }
    return ds;
}

}  // namespace vsa::data
