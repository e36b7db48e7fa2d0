#pragma once

#include <filesystem>
#include <string>

#include "vsa/grid_model.hpp"

namespace vsa::testing {

inline std::filesystem::path source_path(const std::string& relative) {
    return std::filesystem::path(VSA_SOURCE_DIR) / relative;
}

inline grid::NetworkCase load_bundled(const std::string& name) {
    return grid::load_case(source_path("data/cases/" + name).string());
}

/// Slack bus 1 feeding a PQ load at bus 2 through a single branch.
inline grid::NetworkCase two_bus(double load_mw, double load_mvar = 0.0, double x = 0.1, double r = 0.0,
                                 double b_shunt = 0.0) {
    std::vector<grid::Bus> buses = {{1, grid::BusKind::Slack, 138.0, 1.0, 0.9, 1.1},
                                    {2, grid::BusKind::PQ, 138.0, 1.0, 0.9, 1.1}};
    std::vector<grid::Branch> branches = {{1, 2, 1, r, x, b_shunt, 1.0, 1000.0, true}};
    std::vector<grid::Generator> gens = {{1, load_mw, -10000.0, 10000.0, 10000.0, true}};
    std::vector<grid::Load> loads = {{2, load_mw, load_mvar}};
    return grid::NetworkCase::create(100.0, buses, branches, gens, loads, "two-bus");
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("vsa_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace vsa::testing
