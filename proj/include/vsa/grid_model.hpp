#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace vsa::grid {

enum class BusKind { Slack, PV, PQ };

std::string_view to_string(BusKind kind);

struct Bus {
    int id = 0;
    BusKind kind = BusKind::PQ;
    double base_kv = 1.0;
    double v_setpoint = 1.0;  // p.u., used by Slack and PV buses
    double v_min = 0.9;
    double v_max = 1.1;

    bool operator==(const Bus&) const = default;
};

/// Line or transformer. Transformers carry tap != 1 with the off-nominal ratio on the from side.
struct Branch {
    int from_bus = 0;
    int to_bus = 0;
    int circuit = 1;
    double r = 0.0;
    double x = 0.0;
    double b_shunt = 0.0;  // total line charging, p.u.
    double tap = 1.0;
    double mva_rating = 0.0;
    bool in_service = true;

    bool operator==(const Branch&) const = default;
};

struct Generator {
    int bus = 0;
    double p_mw = 0.0;
    double q_min = 0.0;  // MVar
    double q_max = 0.0;
    double p_max = 0.0;
    bool in_service = true;

    bool operator==(const Generator&) const = default;
};

struct Load {
    int bus = 0;
    double p_mw = 0.0;
    double q_mvar = 0.0;

    bool operator==(const Load&) const = default;
};

/// Identifies a branch by its terminal buses, as written in contingency lists ("17-43", "63-64:2").
struct BranchRef {
    int from_bus = 0;
    int to_bus = 0;
    int circuit = 1;

    static BranchRef parse(std::string_view text);
    std::string to_string() const;

    bool operator==(const BranchRef&) const = default;
};

/// Validated, immutable network description. Quantities are stored in MW/MVar as written in the
/// case file; per-unit views divide by base_mva.
class NetworkCase {
  public:
    /// Builds a case and checks the structural invariants (ids, references, single slack,
    /// connectivity over in-service branches). Throws ValidationError.
    static NetworkCase create(double base_mva, std::vector<Bus> buses, std::vector<Branch> branches,
                              std::vector<Generator> generators, std::vector<Load> loads,
                              std::string name = {});

    const std::string& name() const noexcept { return name_; }
    double base_mva() const noexcept { return base_mva_; }
    const std::vector<Bus>& buses() const noexcept { return buses_; }
    const std::vector<Branch>& branches() const noexcept { return branches_; }
    const std::vector<Generator>& generators() const noexcept { return generators_; }
    const std::vector<Load>& loads() const noexcept { return loads_; }

    std::size_t bus_count() const noexcept { return buses_.size(); }
    std::size_t branch_count() const noexcept { return branches_.size(); }
    std::size_t in_service_branch_count() const;

    /// Position of a bus id in buses(). Throws ValidationError for unknown ids.
    std::size_t bus_index(int id) const;
    std::optional<std::size_t> find_bus(int id) const;
    std::size_t slack_index() const noexcept { return slack_index_; }

    /// Branch position for a reference, matching either orientation.
    std::size_t branch_index(const BranchRef& ref) const;
    BranchRef branch_ref(std::size_t index) const;

    std::complex<double> load_pu(std::size_t load_index) const;
    double total_load_mw() const;
    double total_load_mvar() const;
    double total_generation_capacity_mw() const;

    /// Bus ids not reachable from the slack over in-service branches, ascending.
    std::vector<int> disconnected_buses() const;

    NetworkCase with_loads(std::vector<Load> loads) const;
    NetworkCase with_generators(std::vector<Generator> generators) const;

    /// Copy with one branch status changed. Throws IslandingError if the result is disconnected.
    NetworkCase with_branch_status(std::size_t branch_index, bool in_service) const;

    bool operator==(const NetworkCase& other) const;

  private:
    NetworkCase() = default;
    void index_and_validate();

    std::string name_;
    double base_mva_ = 100.0;
    std::vector<Bus> buses_;
    std::vector<Branch> branches_;
    std::vector<Generator> generators_;
    std::vector<Load> loads_;
    std::unordered_map<int, std::size_t> bus_lookup_;
    std::size_t slack_index_ = 0;
};

/// Parses the sectioned case format (format_version 1). Throws ParseError for syntax problems
/// and ValidationError for semantic ones.
NetworkCase parse_case(std::string_view text);
NetworkCase load_case(const std::string& path);

/// Serializes a case so that parse_case(render_case(c)) == c.
std::string render_case(const NetworkCase& c);

/// Copy of `c` with one branch taken out of service.
/// Throws ValidationError when the index is bad or the branch is already out, and IslandingError
/// when the outage separates buses from the slack.
NetworkCase apply_outage(const NetworkCase& c, std::size_t branch_index);

}  // namespace vsa::grid
