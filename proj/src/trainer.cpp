#include "vsa/trainer.hpp"

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "vsa/error.hpp"
#include "vsa/text.hpp"

namespace vsa::train {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::size_t> parse_size_list(std::string_view s) {
    std::vector<std::size_t> out;
    for (auto tok : text::split(s, ',')) {
        tok = text::trim(tok);
        if (tok.empty()) continue;
        const auto v = text::parse_int(tok);
        if (v < 0) throw ValidationError("list entries must be non-negative");
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

DesignMatrix select_columns(const DesignMatrix& m, std::span<const std::size_t> cols) {
    DesignMatrix out;
    out.x.resize(m.x.rows(), static_cast<Eigen::Index>(cols.size()));
    out.labels.resize(cols.size());
    for (std::size_t j = 0; j < cols.size(); ++j) {
        out.x.col(static_cast<Eigen::Index>(j)) = m.x.col(static_cast<Eigen::Index>(cols[j]));
        out.labels[j] = m.labels[cols[j]];
    }
    return out;
}

template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += threads) fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

std::string join_vector(const Eigen::VectorXd& v) {
    std::string s = std::to_string(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        s += ' ';
        s += text::format_double(v[i]);
    }
    return s;
}

Eigen::VectorXd parse_vector(const std::vector<std::string_view>& cols, std::size_t line) {
    if (cols.size() < 2) throw ParseError(line, "vector entry needs a length");
    const auto n = text::parse_int(cols[1], line);
    if (n < 0 || static_cast<std::size_t>(n) + 2 != cols.size()) throw ParseError(line, "vector length mismatch");
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = text::parse_double(cols[static_cast<std::size_t>(i) + 2], line);
    return v;
}

}  // namespace

DesignMatrix to_design_matrix(const data::Dataset& ds) {
    DesignMatrix m;
    m.x.resize(static_cast<Eigen::Index>(ds.feature_count()), static_cast<Eigen::Index>(ds.size()));
    m.labels.resize(ds.size());
    for (std::size_t j = 0; j < ds.size(); ++j) {
        const auto& s = ds.samples[j];
        if (s.features.size() != ds.feature_count()) throw DimensionError("sample width differs from feature names");
        m.x.col(static_cast<Eigen::Index>(j)) =
            Eigen::Map<const Eigen::VectorXd>(s.features.data(), static_cast<Eigen::Index>(s.features.size()));
        m.labels[j] = static_cast<int>(s.label);
    }
    return m;
}

DesignMatrix standardized(const DesignMatrix& m, const nn::StandardizationStats& stats) {
    return {stats.apply(m.x), m.labels};
}

std::string_view to_string(Phase p) { return p == Phase::Initialization ? "initialization" : "update"; }

void PhasePlan::validate() const {
    if (!data) throw ValidationError("phase plan has no dataset");
    if (epochs < 1) throw ValidationError("phase needs at least one epoch");
    if (eval_every < 1) throw ValidationError("eval_every must be >= 1");
    if (data->train.size() == 0) throw ValidationError("phase training split is empty");
}

const LogRow* TrainingLog::find(Phase phase, std::size_t epoch) const {
    for (const auto& r : rows)
        if (r.phase == phase && r.epoch == epoch) return &r;
    return nullptr;
}

const LogRow* TrainingLog::last(Phase phase) const {
    const LogRow* out = nullptr;
    for (const auto& r : rows)
        if (r.phase == phase) out = &r;
    return out;
}

const LogRow* TrainingLog::first(Phase phase) const {
    for (const auto& r : rows)
        if (r.phase == phase) return &r;
    return nullptr;
}

ModelState ModelState::create(const nn::Architecture& arch, const optim::OptimizerConfig& config,
                              nn::StandardizationStats stats, std::uint64_t init_seed) {
    ModelState m;
    m.arch = arch;
    m.theta = nn::init_params(arch, init_seed);
    m.optimizer = optim::Optimizer(config, m.theta.size());
    m.stats = std::move(stats);
    return m;
}

std::vector<LogRow> run_phase(ModelState& model, const PhasePlan& plan, const RunOptions& options) {
    plan.validate();
    const PhaseData& d = *plan.data;
    const auto started = std::chrono::steady_clock::now();

    auto gradient_on = [&](const DesignMatrix& batch) {
        return [&](const Eigen::VectorXd& theta) {
            return nn::loss_and_gradient(theta, model.arch, batch.x, batch.labels).gradient;
        };
    };

    std::vector<LogRow> rows;
    std::vector<std::size_t> order(d.train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t epoch = 1; epoch <= plan.epochs; ++epoch) {
        if (!model.diverged) {
            try {
                if (options.batch_size == 0 || options.batch_size >= d.train.size()) {
                    model.optimizer.step(model.theta, gradient_on(d.train));
                } else {
                    std::seed_seq seq{static_cast<std::uint32_t>(options.shuffle_seed),
                                      static_cast<std::uint32_t>(options.shuffle_seed >> 32),
                                      static_cast<std::uint32_t>(plan.phase), static_cast<std::uint32_t>(epoch)};
                    std::mt19937_64 rng(seq);
                    std::shuffle(order.begin(), order.end(), rng);
                    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
                        const auto len = std::min(options.batch_size, order.size() - start);
                        const auto batch = select_columns(d.train, std::span(order).subspan(start, len));
                        model.optimizer.step(model.theta, gradient_on(batch));
                    }
                }
            } catch (const NonFiniteGradientError&) {
                model.diverged = true;
            }
        }
        ++model.epochs_done;

        const bool log_now = epoch == 1 || epoch % plan.eval_every == 0 || epoch == plan.epochs;
        if (!log_now) continue;
        LogRow row;
        row.phase = plan.phase;
        row.epoch = epoch;
        if (options.record_wall_time)
            row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
        if (!model.diverged) {
            const auto train = nn::evaluate(model.theta, model.arch, d.train.x, d.train.labels);
            if (!std::isfinite(train.loss) || !model.theta.allFinite()) {
                model.diverged = true;
            } else {
                row.loss = train.loss;
                row.train_accuracy = train.accuracy;
                row.test_accuracy =
                    d.test.size() ? nn::evaluate(model.theta, model.arch, d.test.x, d.test.labels).accuracy : kNaN;
                row.reference_test_accuracy =
                    d.reference_test && d.reference_test->size()
                        ? nn::evaluate(model.theta, model.arch, d.reference_test->x, d.reference_test->labels).accuracy
                        : kNaN;
            }
        }
        if (model.diverged) {
            row.diverged = true;
            row.loss = row.train_accuracy = row.test_accuracy = row.reference_test_accuracy = kNaN;
        }
        rows.push_back(row);
    }
    return rows;
}

// ---------------------------------------------------------------------------------------------
// Checkpoints

void write_checkpoint(const ModelState& model, const std::filesystem::path& path) {
    std::ostringstream out;
    out << "vsa-checkpoint 1\n";
    out << "layers";
    for (auto s : model.arch.layer_sizes) out << ' ' << s;
    out << "\nactivation " << nn::to_string(model.arch.activation) << "\n";
    out << "epochs_done " << model.epochs_done << "\n";
    out << "diverged " << (model.diverged ? 1 : 0) << "\n";
    const auto& c = model.optimizer.config();
    out << "algorithm " << optim::to_string(c.algorithm) << "\n";
    out << "learning_rate " << text::format_double(c.learning_rate) << "\n";
    out << "momentum " << text::format_double(c.momentum) << "\n";
    out << "beta1 " << text::format_double(c.beta1) << "\n";
    out << "beta2 " << text::format_double(c.beta2) << "\n";
    out << "epsilon " << text::format_double(c.epsilon) << "\n";
    const auto& s = model.optimizer.state();
    out << "k " << s.k << "\n";
    out << "theta " << join_vector(model.theta) << "\n";
    out << "mean " << join_vector(model.stats.mean) << "\n";
    out << "stddev " << join_vector(model.stats.stddev) << "\n";
    out << "prev_delta " << join_vector(s.prev_delta) << "\n";
    out << "accum " << join_vector(s.accum) << "\n";
    out << "m " << join_vector(s.m) << "\n";
    out << "v " << join_vector(s.v) << "\n";
    text::write_file(path, out.str());
}

ModelState read_checkpoint(const std::filesystem::path& path) {
    const auto content = text::read_file(path);
    std::map<std::string, std::vector<std::string_view>> entries;
    std::size_t line_no = 0;
    std::map<std::string, std::size_t> lines;
    for (auto line : text::split(content, '\n')) {
        ++line_no;
        auto cols = text::split_whitespace(line);
        if (cols.empty()) continue;
        lines[std::string(cols[0])] = line_no;
        entries[std::string(cols[0])] = std::move(cols);
    }
    auto get = [&](const std::string& key) -> const std::vector<std::string_view>& {
        auto it = entries.find(key);
        if (it == entries.end() || it->second.size() < 2) throw ParseError(0, "checkpoint is missing '" + key + "'");
        return it->second;
    };
    auto scalar = [&](const std::string& key) { return text::parse_double(get(key)[1], lines[key]); };

    if (get("vsa-checkpoint")[1] != "1") throw ParseError(1, "unsupported checkpoint version");
    ModelState m;
    for (std::size_t i = 1; i < get("layers").size(); ++i)
        m.arch.layer_sizes.push_back(static_cast<std::size_t>(text::parse_int(get("layers")[i], lines["layers"])));
    m.arch.activation = nn::parse_activation(get("activation")[1]);
    m.arch.validate();
    m.epochs_done = static_cast<std::size_t>(text::parse_int(get("epochs_done")[1]));
    m.diverged = get("diverged")[1] == "1";

    optim::OptimizerConfig c;
    c.algorithm = optim::parse_algorithm(get("algorithm")[1]);
    c.learning_rate = scalar("learning_rate");
    c.momentum = scalar("momentum");
    c.beta1 = scalar("beta1");
    c.beta2 = scalar("beta2");
    c.epsilon = scalar("epsilon");
    m.theta = parse_vector(get("theta"), lines["theta"]);
    if (static_cast<std::size_t>(m.theta.size()) != m.arch.parameter_count())
        throw DimensionError("checkpoint parameters do not match its architecture");
    m.stats.mean = parse_vector(get("mean"), lines["mean"]);
    m.stats.stddev = parse_vector(get("stddev"), lines["stddev"]);
    m.optimizer = optim::Optimizer(c, m.theta.size());
    auto& s = m.optimizer.state();
    s.k = static_cast<std::uint64_t>(text::parse_int(get("k")[1]));
    s.prev_delta = parse_vector(get("prev_delta"), lines["prev_delta"]);
    s.accum = parse_vector(get("accum"), lines["accum"]);
    s.m = parse_vector(get("m"), lines["m"]);
    s.v = parse_vector(get("v"), lines["v"]);
    for (const auto* vec : {&s.prev_delta, &s.accum, &s.m, &s.v})
        if (vec->size() != m.theta.size()) throw DimensionError("checkpoint optimizer state does not match parameters");
    return m;
}

// ---------------------------------------------------------------------------------------------
// Experiments

void ExperimentConfig::validate() const {
    if (algorithms.empty()) throw ValidationError("experiment lists no algorithms");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ValidationError("train_fraction must lie in (0, 1)");
    if (init_epochs < 1 || update_epochs < 1) throw ValidationError("each phase needs at least one epoch");
    if (eval_every < 1) throw ValidationError("eval_every must be >= 1");
    if (hidden.empty()) throw ValidationError("network needs at least one hidden layer");
    for (const auto& a : algorithms) a.validate();
}

ExperimentConfig parse_experiment_config(std::string_view text_in, const std::filesystem::path& base_dir) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    std::istringstream in{std::string(text_in)};
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ParseError(e.line(), e.message());
    }
    const auto section = tree.get_child_optional("experiment");
    if (!section) throw ParseError(0, "experiment file needs an [experiment] section");
    const auto& s = *section;
    static const std::set<std::string> known = {
        "name",        "init_dataset", "update_dataset", "train_fraction",   "split_seed",       "seed",
        "init_epochs", "update_epochs", "eval_every",    "batch_size",       "threads",          "hidden",
        "activation",  "algorithms",   "init_checkpoints", "update_checkpoints", "record_wall_time"};
    for (const auto& [key, node] : s)
        if (!known.contains(key)) throw ParseError(0, "unknown experiment key '" + key + "'");

    auto str =[&](const char* key) -> std::optional<std::string> {
        if (auto v = s.get_optional<std::string>(key)) return std::string(text::trim(*v));
        return std::nullopt;
    };
    auto resolve = [&](const std::string& p) {
        std::filesystem::path path(p);
        return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
    };
    auto uint = [&](const char* key, auto fallback) {
        auto v = str(key);
        return v ? static_cast<decltype(fallback)>(text::parse_int(*v)) : fallback;
    };

    ExperimentConfig c;
    if (auto v = str("name")) c.name = *v;
    auto init = str("init_dataset");
    auto update = str("update_dataset");
    if (!init || !update) throw ParseError(0, "experiment needs init_dataset and update_dataset");
    c.init_dataset = resolve(*init);
    c.update_dataset = resolve(*update);
    if (auto v = str("train_fraction")) c.train_fraction = text::parse_double(*v);
    c.split_seed = uint("split_seed", c.split_seed);
    c.seed = uint("seed", c.seed);
    c.init_epochs = uint("init_epochs", c.init_epochs);
    c.update_epochs = uint("update_epochs", c.update_epochs);
    c.eval_every = uint("eval_every", c.eval_every);
    c.batch_size = uint("batch_size", c.batch_size);
    c.threads = uint("threads", c.threads);
    if (auto v = str("hidden")) c.hidden = parse_size_list(*v);
    if (auto v = str("activation")) c.activation = nn::parse_activation(*v);
    if (auto v = str("init_checkpoints")) c.init_checkpoints = parse_size_list(*v);
    if (auto v = str("update_checkpoints")) c.update_checkpoints = parse_size_list(*v);
    if (auto v = str("record_wall_time")) c.record_wall_time = (*v == "true" || *v == "1");

    std::string names = str("algorithms").value_or("SGD,NAG,SGD-m,NAG-m,AdaGrad,Adam,Nadam");
    for (auto tok : text::split(names, ',')) {
        tok = text::trim(tok);
        if (tok.empty()) continue;
        auto cfg = optim::OptimizerConfig::defaults(optim::parse_algorithm(tok));
        if (auto over = tree.get_child_optional(pt::ptree::path_type(std::string(tok), '\0'))) {
            for (const auto& [key, node] : *over) {
                const double v = text::parse_double(node.get_value<std::string>());
                if (key == "learning_rate") cfg.learning_rate = v;
                else if (key == "momentum") cfg.momentum = v;
                else if (key == "beta1") cfg.beta1 = v;
                else if (key == "beta2") cfg.beta2 = v;
                else if (key == "epsilon") cfg.epsilon = v;
                else throw ParseError(0, "unknown hyperparameter '" + key + "' for " + std::string(tok));
            }
        }
        c.algorithms.push_back(cfg);
    }
    c.validate();
    return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    return parse_experiment_config(text::read_file(path), path.parent_path());
}

PhaseDatasets prepare_phase_data(const data::Dataset& init, const data::Dataset& update, double train_fraction,
                                 std::uint64_t split_seed) {
    if (init.feature_names != update.feature_names)
        throw DimensionError("initialization and update datasets use different feature layouts");
    const auto [init_train, init_test] = data::split_dataset(init, train_fraction, split_seed);
    const auto [update_train, update_test] = data::split_dataset(update, train_fraction, split_seed + 1);

    PhaseDatasets out;
    const auto raw_init_train = to_design_matrix(init_train);
    out.stats = nn::StandardizationStats::compute(raw_init_train.x);
    out.init.train = standardized(raw_init_train, out.stats);
    out.init.test = standardized(to_design_matrix(init_test), out.stats);
    out.update.train = standardized(to_design_matrix(update_train), out.stats);
    out.update.test = standardized(to_design_matrix(update_test), out.stats);
    out.update.reference_test = out.init.test;
    return out;
}

TrainingLog run_online_training(const optim::OptimizerConfig& algorithm, const PhaseDatasets& data,
                                const ExperimentConfig& config) {
    nn::Architecture arch;
    arch.layer_sizes.push_back(static_cast<std::size_t>(data.init.train.x.rows()));
    for (auto h : config.hidden) arch.layer_sizes.push_back(h);
    arch.layer_sizes.push_back(2);
    arch.activation = config.activation;

    auto model = ModelState::create(arch, algorithm, data.stats, config.seed);
    const RunOptions options{config.batch_size, config.seed, config.record_wall_time};

    TrainingLog log;
    log.algorithm = std::string(optim::to_string(algorithm.algorithm));
    log.rows = run_phase(model, {Phase::Initialization, &data.init, config.init_epochs, config.eval_every}, options);
    log.init_end_checksum = model.optimizer.state().checksum();

    log.update_start_checksum = model.optimizer.state().checksum();
    auto update_rows = run_phase(model, {Phase::Update, &data.update, config.update_epochs, config.eval_every}, options);
    log.rows.insert(log.rows.end(), update_rows.begin(), update_rows.end());
    return log;
}

Summary summarize(const std::vector<TrainingLog>& logs, const std::vector<std::size_t>& init_checkpoints,
                  const std::vector<std::size_t>& update_checkpoints) {
    Summary s;
    for (auto e : init_checkpoints) s.columns.push_back("init_" + std::to_string(e));
    for (auto e : update_checkpoints) s.columns.push_back("update_" + std::to_string(e));
    for (const char* metric : {"train", "test"}) {
        for (const auto& log : logs) {
            SummaryRow row{log.algorithm, metric, {}};
            auto value = [&](Phase p, std::size_t e) {
                const auto* r = log.find(p, e);
                if (!r) return kNaN;
                return std::string_view(metric) == "train" ? r->train_accuracy : r->test_accuracy;
            };
            for (auto e : init_checkpoints) row.values.push_back(value(Phase::Initialization, e));
            for (auto e : update_checkpoints) row.values.push_back(value(Phase::Update, e));
            s.rows.push_back(std::move(row));
        }
    }
    return s;
}

std::string render_log(const TrainingLog& log) {
    std::ostringstream out;
    out << "# algorithm: " << log.algorithm << "\n";
    out << "# init_end_checksum: " << text::hex64(log.init_end_checksum) << "\n";
    out << "# update_start_checksum: " << text::hex64(log.update_start_checksum) << "\n";
    out << "phase,epoch,loss,train_accuracy,test_accuracy,init_test_accuracy,wall_ms,status\n";
    for (const auto& r : log.rows) {
        out << to_string(r.phase) << ',' << r.epoch << ',' << text::format_double(r.loss) << ','
            << text::format_double(r.train_accuracy) << ',' << text::format_double(r.test_accuracy) << ','
            << text::format_double(r.reference_test_accuracy) << ',' << text::format_double(r.wall_ms) << ','
            << (r.diverged ? "diverged" : "ok") << '\n';
    }
    return out.str();
}

TrainingLog parse_log(std::string_view content) {
    TrainingLog log;
    std::size_t line_no = 0;
    bool header_seen = false;
    for (auto line : text::split(content, '\n')) {
        ++line_no;
        line = text::trim(line);
        if (line.empty()) continue;
        if (line.front() == '#') {
            const auto colon = line.find(':');
            if (colon == std::string_view::npos) continue;
            const auto key = text::trim(line.substr(1, colon - 1));
            const auto value = text::trim(line.substr(colon + 1));
            if (key == "algorithm") log.algorithm = std::string(value);
            else if (key == "init_end_checksum") log.init_end_checksum = std::stoull(std::string(value), nullptr, 16);
            else if (key == "update_start_checksum") log.update_start_checksum = std::stoull(std::string(value), nullptr, 16);
            continue;
        }
        if (!header_seen) {
            if (!line.starts_with("phase,")) throw ParseError(line_no, "log header missing");
            header_seen = true;
            continue;
        }
        const auto cols = text::split(line, ',');
        if (cols.size() != 8) throw ParseError(line_no, "log rows need 8 columns");
        LogRow r;
        if (cols[0] == "initialization") r.phase = Phase::Initialization;
        else if (cols[0] == "update") r.phase = Phase::Update;
        else throw ParseError(line_no, "unknown phase '" + std::string(cols[0]) + "'");
        r.epoch = static_cast<std::size_t>(text::parse_int(cols[1], line_no));
        r.loss = text::parse_double(cols[2], line_no);
        r.train_accuracy = text::parse_double(cols[3], line_no);
        r.test_accuracy = text::parse_double(cols[4], line_no);
        r.reference_test_accuracy = text::parse_double(cols[5], line_no);
        r.wall_ms = text::parse_double(cols[6], line_no);
        r.diverged = cols[7] == "diverged";
        log.rows.push_back(r);
    }
    if (log.algorithm.empty()) throw ParseError(0, "log does not name its algorithm");
    return log;
}

std::string render_summary(const Summary& summary) {
    std::ostringstream out;
    out << "algorithm,metric";
    for (const auto& c : summary.columns) out << ',' << c;
    out << '\n';
    for (const auto& r : summary.rows) {
        out << r.algorithm << ',' << r.metric;
        for (double v : r.values) {
            char buf[32];
            if (std::isnan(v)) out << ",nan";
            else {
                std::snprintf(buf, sizeof buf, "%.4f", v);
                out << ',' << buf;
            }
        }
        out << '\n';
    }
    return out.str();
}

ExperimentResult run_experiment(const ExperimentConfig& config, const std::optional<std::filesystem::path>& out_dir) {
    config.validate();
    if (!std::filesystem::exists(config.init_dataset))
        throw Error("missing dataset file '" + config.init_dataset.string() + "'");
    if (!std::filesystem::exists(config.update_dataset))
        throw Error("missing dataset file '" + config.update_dataset.string() + "'");
    const auto init = data::read_dataset(config.init_dataset);
    const auto update = data::read_dataset(config.update_dataset);
    const auto phases = prepare_phase_data(init, update, config.train_fraction, config.split_seed);

    ExperimentResult result;
    result.logs.resize(config.algorithms.size());
    parallel_for(config.algorithms.size(), config.threads,
                 [&](std::size_t i) { result.logs[i] = run_online_training(config.algorithms[i], phases, config); });
    result.summary = summarize(result.logs, config.init_checkpoints, config.update_checkpoints);

    if (out_dir) {
        std::filesystem::create_directories(*out_dir);
        for (const auto& log : result.logs) text::write_file(*out_dir / ("log_" + log.algorithm + ".csv"), render_log(log));
        text::write_file(*out_dir / "summary.csv", render_summary(result.summary));
    }
    return result;
}

}  // namespace vsa::train
