#include "vsa/grid_model.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

#include "vsa/error.hpp"
#include "vsa/text.hpp"

namespace vsa::grid {

namespace {

constexpr int kFormatVersion = 1;

std::string join_ids(const std::vector<int>& ids) {
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(ids[i]);
    }
    return out;
}

BusKind parse_kind(std::string_view token, std::size_t line) {
    if (token == "Slack" || token == "SLACK" || token == "slack") return BusKind::Slack;
    if (token == "PV" || token == "pv") return BusKind::PV;
    if (token == "PQ" || token == "pq") return BusKind::PQ;
    throw ParseError(line, "unknown bus kind '" + std::string(token) + "' (expected Slack, PV or PQ)");
}

bool parse_flag(std::string_view token, std::size_t line) {
    if (token == "1") return true;
    if (token == "0") return false;
    throw ParseError(line, "expected status 0 or 1, got '" + std::string(token) + "'");
}

int parse_id(std::string_view token, std::size_t line) {
    const auto v = text::parse_int(token, line);
    if (v < 1 || v > 1'000'000'000) throw ParseError(line, "bus id must be a positive integer");
    return static_cast<int>(v);
}

}  // namespace

std::string_view to_string(BusKind kind) {
    switch (kind) {
        case BusKind::Slack:
            return "Slack";
        case BusKind::PV:
            return "PV";
        case BusKind::PQ:
            return "PQ";
    }
    return "?";
}

BranchRef BranchRef::parse(std::string_view text) {
    text = text::trim(text);
    BranchRef ref;
    auto colon = text.find(':');
    auto body = text.substr(0, colon);
    if (colon != std::string_view::npos) {
        ref.circuit = static_cast<int>(text::parse_int(text.substr(colon + 1)));
    }
    auto dash = body.find('-');
    if (dash == std::string_view::npos || dash == 0)
        throw ParseError(0, "branch reference must look like 'from-to[:circuit]', got '" +
                                std::string(text) + "'");
    ref.from_bus = static_cast<int>(text::parse_int(body.substr(0, dash)));
    ref.to_bus = static_cast<int>(text::parse_int(body.substr(dash + 1)));
    return ref;
}

std::string BranchRef::to_string() const {
    std::string s = std::to_string(from_bus) + "-" + std::to_string(to_bus);
    if (circuit != 1) s += ":" + std::to_string(circuit);
    return s;
}

NetworkCase NetworkCase::create(double base_mva, std::vector<Bus> buses, std::vector<Branch> branches,
                                std::vector<Generator> generators, std::vector<Load> loads,
                                std::string name) {
    NetworkCase c;
    c.name_ = std::move(name);
    c.base_mva_ = base_mva;
    c.buses_ = std::move(buses);
    c.branches_ = std::move(branches);
    c.generators_ = std::move(generators);
    c.loads_ = std::move(loads);
    c.index_and_validate();
    return c;
}

void NetworkCase::index_and_validate() {
    if (!(base_mva_ > 0.0)) throw ValidationError("base_mva must be positive");
    if (buses_.empty()) throw ValidationError("case has no buses");

    bus_lookup_.clear();
    std::size_t slack_count = 0;
    for (std::size_t i = 0; i < buses_.size(); ++i) {
        const auto& b = buses_[i];
        if (b.id < 1) throw ValidationError("bus id must be >= 1");
        if (!bus_lookup_.emplace(b.id, i).second)
            throw ValidationError("duplicate bus id " + std::to_string(b.id));
        if (!(b.base_kv > 0.0)) throw ValidationError("bus " + std::to_string(b.id) + ": base_kv must be positive");
        if (!(b.v_min < b.v_max)) throw ValidationError("bus " + std::to_string(b.id) + ": v_min must be below v_max");
        if (b.kind != BusKind::PQ && !(b.v_setpoint > 0.0))
            throw ValidationError("bus " + std::to_string(b.id) + ": voltage setpoint must be positive");
        if (b.kind == BusKind::Slack) {
            ++slack_count;
            slack_index_ = i;
        }
    }
    if (slack_count == 0) throw ValidationError("no slack bus");
    if (slack_count > 1) throw ValidationError("multiple slack buses");

    for (std::size_t k = 0; k < branches_.size(); ++k) {
        const auto& br = branches_[k];
        const auto label = "branch " + std::to_string(br.from_bus) + "-" + std::to_string(br.to_bus);
        if (!bus_lookup_.contains(br.from_bus) || !bus_lookup_.contains(br.to_bus))
            throw ValidationError(label + " references an unknown bus");
        if (br.from_bus == br.to_bus) throw ValidationError(label + " connects a bus to itself");
        if (br.x == 0.0) throw ValidationError(label + " has zero reactance");
        if (!(br.tap > 0.0)) throw ValidationError(label + " has a non-positive tap ratio");
        if (!(br.mva_rating > 0.0)) throw ValidationError(label + " needs a positive MVA rating");
        for (std::size_t j = 0; j < k; ++j) {
            const auto& o = branches_[j];
            const bool same = (o.from_bus == br.from_bus && o.to_bus == br.to_bus) ||
                              (o.from_bus == br.to_bus && o.to_bus == br.from_bus);
            if (same && o.circuit == br.circuit) throw ValidationError(label + " duplicates circuit " + std::to_string(br.circuit));
        }
    }
    for (const auto& g : generators_) {
        const auto label = "generator at bus " + std::to_string(g.bus);
        if (!bus_lookup_.contains(g.bus)) throw ValidationError(label + " references an unknown bus");
        if (!(g.q_min <= g.q_max)) throw ValidationError(label + ": q_min exceeds q_max");
        if (!(g.p_mw >= 0.0 && g.p_mw <= g.p_max)) throw ValidationError(label + ": p_mw outside [0, p_max]");
    }
    for (const auto& l : loads_) {
        if (!bus_lookup_.contains(l.bus)) throw ValidationError("load references unknown bus " + std::to_string(l.bus));
    }

    const auto islanded = disconnected_buses();
    if (!islanded.empty()) {
        throw IslandingError(islanded, islanded.size() == 1
                                           ? "disconnected bus " + std::to_string(islanded.front())
                                           : "disconnected buses {" + join_ids(islanded) + "}");
    }
}

std::size_t NetworkCase::in_service_branch_count() const {
    return static_cast<std::size_t>(
        std::count_if(branches_.begin(), branches_.end(), [](const Branch& b) { return b.in_service; }));
}

std::optional<std::size_t> NetworkCase::find_bus(int id) const {
    auto it = bus_lookup_.find(id);
    if (it == bus_lookup_.end()) return std::nullopt;
    return it->second;
}

std::size_t NetworkCase::bus_index(int id) const {
    auto idx = find_bus(id);
    if (!idx) throw ValidationError("unknown bus " + std::to_string(id));
    return *idx;
}

std::size_t NetworkCase::branch_index(const BranchRef& ref) const {
    for (std::size_t k = 0; k < branches_.size(); ++k) {
        const auto& b = branches_[k];
        const bool match = (b.from_bus == ref.from_bus && b.to_bus == ref.to_bus) ||
                           (b.from_bus == ref.to_bus && b.to_bus == ref.from_bus);
        if (match && b.circuit == ref.circuit) return k;
    }
    throw ValidationError("no branch " + ref.to_string() + " in case");
}

BranchRef NetworkCase::branch_ref(std::size_t index) const {
    const auto& b = branches_.at(index);
    return {b.from_bus, b.to_bus, b.circuit};
}

std::complex<double> NetworkCase::load_pu(std::size_t load_index) const {
    const auto& l = loads_.at(load_index);
    return {l.p_mw / base_mva_, l.q_mvar / base_mva_};
}

double NetworkCase::total_load_mw() const {
    double s = 0.0;
    for (const auto& l : loads_) s += l.p_mw;
    return s;
}

double NetworkCase::total_load_mvar() const {
    double s = 0.0;
    for (const auto& l : loads_) s += l.q_mvar;
    return s;
}

double NetworkCase::total_generation_capacity_mw() const {
    double s = 0.0;
    for (const auto& g : generators_)
        if (g.in_service) s += g.p_max;
    return s;
}

std::vector<int> NetworkCase::disconnected_buses() const {
    const std::size_t n = buses_.size();
    std::vector<std::vector<std::size_t>> adjacency(n);
    for (const auto& b : branches_) {
        if (!b.in_service) continue;
        const auto f = bus_lookup_.at(b.from_bus);
        const auto t = bus_lookup_.at(b.to_bus);
        adjacency[f].push_back(t);
        adjacency[t].push_back(f);
    }
    std::vector<char> seen(n, 0);
    std::deque<std::size_t> queue{slack_index_};
    seen[slack_index_] = 1;
    while (!queue.empty()) {
        const auto u = queue.front();
        queue.pop_front();
        for (auto v : adjacency[u]) {
            if (!seen[v]) {
                seen[v] = 1;
                queue.push_back(v);
            }
        }
    }
    std::vector<int> out;
    for (std::size_t i = 0; i < n; ++i)
        if (!seen[i]) out.push_back(buses_[i].id);
    std::sort(out.begin(), out.end());
    return out;
}

NetworkCase NetworkCase::with_loads(std::vector<Load> loads) const {
    NetworkCase c = *this;
    c.loads_ = std::move(loads);
    for (const auto& l : c.loads_)
        if (!c.bus_lookup_.contains(l.bus)) throw ValidationError("load references unknown bus " + std::to_string(l.bus));
    return c;
}

NetworkCase NetworkCase::with_generators(std::vector<Generator> generators) const {
    NetworkCase c = *this;
    c.generators_ = std::move(generators);
    c.index_and_validate();
    return c;
}

NetworkCase NetworkCase::with_branch_status(std::size_t branch_index, bool in_service) const {
    if (branch_index >= branches_.size())
        throw ValidationError("branch index " + std::to_string(branch_index) + " out of range");
    NetworkCase c = *this;
    c.branches_[branch_index].in_service = in_service;
    c.index_and_validate();
    return c;
}

bool NetworkCase::operator==(const NetworkCase& other) const {
    return name_ == other.name_ && base_mva_ == other.base_mva_ && buses_ == other.buses_ &&
           branches_ == other.branches_ && generators_ == other.generators_ && loads_ == other.loads_;
}

NetworkCase apply_outage(const NetworkCase& c, std::size_t branch_index) {
    if (branch_index >= c.branch_count())
        throw ValidationError("branch index " + std::to_string(branch_index) + " out of range (case has " +
                              std::to_string(c.branch_count()) + " branches)");
    const auto ref = c.branch_ref(branch_index);
    if (!c.branches()[branch_index].in_service)
        throw ValidationError("branch " + ref.to_string() + " already out of service");
    try {
        return c.with_branch_status(branch_index, false);
    } catch (const IslandingError& e) {
        throw IslandingError(e.disconnected_buses(), "outage of " + ref.to_string() + " disconnects bus set {" +
                                                         join_ids(e.disconnected_buses()) + "}");
    }
}

// ---------------------------------------------------------------------------------------------
// Case file format

NetworkCase parse_case(std::string_view text) {
    enum class Section { None, Base, Bus, Branch, Gen, Load };
    Section section = Section::None;
    bool have_version = false;
    std::optional<double> base_mva;
    std::string name;
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::vector<Generator> generators;
    std::vector<Load> loads;

    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;

        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = text::trim(line);
        if (line.empty()) {
            if (end == text.size()) break;
            continue;
        }

        if (line.front() == '[') {
            if (line.back() != ']') throw ParseError(line_no, "unterminated section header");
            const auto tag = line.substr(1, line.size() - 2);
            if (tag == "BASE") section = Section::Base;
            else if (tag == "BUS") section = Section::Bus;
            else if (tag == "BRANCH") section = Section::Branch;
            else if (tag == "GEN") section = Section::Gen;
            else if (tag == "LOAD") section = Section::Load;
            else throw ParseError(line_no, "unknown section [" + std::string(tag) + "]");
            if (!have_version) throw ParseError(line_no, "missing 'format_version: 1' before first section");
            continue;
        }

        if (line.starts_with("format_version")) {
            auto colon = line.find(':');
            if (colon == std::string_view::npos) throw ParseError(line_no, "expected 'format_version: 1'");
            const auto v = text::parse_int(line.substr(colon + 1), line_no);
            if (v != kFormatVersion) throw ParseError(line_no, "unsupported format_version " + std::to_string(v));
            have_version = true;
            continue;
        }

        const auto cols = text::split_whitespace(line);
        auto need = [&](std::size_t n, const char* what) {
            if (cols.size() != n)
                throw ParseError(line_no, std::string(what) + " record needs " + std::to_string(n) + " columns, found " +
                                              std::to_string(cols.size()));
        };
        switch (section) {
            case Section::None:
                throw ParseError(line_no, "record outside of any section");
            case Section::Base: {
                if (cols.size() != 2) throw ParseError(line_no, "BASE entries are 'key value'");
                if (cols[0] == "base_mva") base_mva = text::parse_double(cols[1], line_no);
                else if (cols[0] == "name") name = std::string(cols[1]);
                else throw ParseError(line_no, "unknown BASE key '" + std::string(cols[0]) + "'");
                break;
            }
            case Section::Bus: {
                need(6, "BUS");
                Bus b;
                b.id = parse_id(cols[0], line_no);
                b.kind = parse_kind(cols[1], line_no);
                b.base_kv = text::parse_double(cols[2], line_no);
                b.v_setpoint = text::parse_double(cols[3], line_no);
                b.v_min = text::parse_double(cols[4], line_no);
                b.v_max = text::parse_double(cols[5], line_no);
                buses.push_back(b);
                break;
            }
            case Section::Branch: {
                need(9, "BRANCH");
                Branch br;
                br.from_bus = parse_id(cols[0], line_no);
                br.to_bus = parse_id(cols[1], line_no);
                br.circuit = static_cast<int>(text::parse_int(cols[2], line_no));
                br.r = text::parse_double(cols[3], line_no);
                br.x = text::parse_double(cols[4], line_no);
                br.b_shunt = text::parse_double(cols[5], line_no);
                br.tap = text::parse_double(cols[6], line_no);
                br.mva_rating = text::parse_double(cols[7], line_no);
                br.in_service = parse_flag(cols[8], line_no);
                branches.push_back(br);
                break;
            }
            case Section::Gen: {
                need(6, "GEN");
                Generator g;
                g.bus = parse_id(cols[0], line_no);
                g.p_mw = text::parse_double(cols[1], line_no);
                g.q_min = text::parse_double(cols[2], line_no);
                g.q_max = text::parse_double(cols[3], line_no);
                g.p_max = text::parse_double(cols[4], line_no);
                g.in_service = parse_flag(cols[5], line_no);
                generators.push_back(g);
                break;
            }
            case Section::Load: {
                need(3, "LOAD");
                Load l;
                l.bus = parse_id(cols[0], line_no);
                l.p_mw = text::parse_double(cols[1], line_no);
                l.q_mvar = text::parse_double(cols[2], line_no);
                loads.push_back(l);
                break;
            }
        }
        if (end == text.size()) break;
    }

    if (!have_version) throw ParseError(0, "missing 'format_version: 1'");
    if (!base_mva) throw ValidationError("missing base_mva in [BASE]");

    auto c = NetworkCase::create(*base_mva, std::move(buses), std::move(branches), std::move(generators),
                                 std::move(loads), std::move(name));
    const double required = 1.05 * c.total_load_mw();
    if (c.total_generation_capacity_mw() < required)
        throw ValidationError("insufficient generation capacity: " + text::format_double(c.total_generation_capacity_mw()) +
                              " MW < 1.05 x base load (" + text::format_double(required) + " MW)");
    return c;
}

NetworkCase load_case(const std::string& path) { return parse_case(text::read_file(path)); }

std::string render_case(const NetworkCase& c) {
    using text::format_double;
    std::ostringstream out;
    out << "format_version: " << kFormatVersion << "\n\n[BASE]\n";
    out << "base_mva " << format_double(c.base_mva()) << "\n";
    if (!c.name().empty()) out << "name " << c.name() << "\n";
    out << "\n[BUS]\n# id kind base_kv v_setpoint v_min v_max\n";
    for (const auto& b : c.buses()) {
        out << b.id << ' ' << to_string(b.kind) << ' ' << format_double(b.base_kv) << ' ' << format_double(b.v_setpoint)
            << ' ' << format_double(b.v_min) << ' ' << format_double(b.v_max) << "\n";
    }
    out << "\n[BRANCH]\n# from to circuit r x b_shunt tap mva_rating in_service\n";
    for (const auto& br : c.branches()) {
        out << br.from_bus << ' ' << br.to_bus << ' ' << br.circuit << ' ' << format_double(br.r) << ' '
            << format_double(br.x) << ' ' << format_double(br.b_shunt) << ' ' << format_double(br.tap) << ' '
            << format_double(br.mva_rating) << ' ' << (br.in_service ? 1 : 0) << "\n";
    }
    out << "\n[GEN]\n# bus p_mw q_min q_max p_max in_service\n";
    for (const auto& g : c.generators()) {
        out << g.bus << ' ' << format_double(g.p_mw) << ' ' << format_double(g.q_min) << ' ' << format_double(g.q_max)
            << ' ' << format_double(g.p_max) << ' ' << (g.in_service ? 1 : 0) << "\n";
    }
    out << "\n[LOAD]\n# bus p_mw q_mvar\n";
    for (const auto& l : c.loads()) {
        out << l.bus << ' ' << format_double(l.p_mw) << ' ' << format_double(l.q_mvar) << "\n";
    }
    return out.str();
}

}  // namespace vsa::grid
