#ifndef GRIDSHED_TESTS_TEST_UTIL_HPP
#define GRIDSHED_TESTS_TEST_UTIL_HPP

#include <functional>
#include <random>
#include <string>

#include "gridshed/cascade.hpp"
#include "gridshed/netmodel.hpp"
#include "gridshed/solver.hpp"

namespace gridshed::testing {

std::string data_path(const std::string& name);

/// Connected random network: spanning tree plus extra chords, admittances in
/// [0.5, 2], wide box bounds around balanced injections.
PowerNetwork random_network(std::mt19937& rng, int n_buses, int extra_edges);

Vec random_balanced_injections(std::mt19937& rng, int n_buses, double scale = 1.0);

/// Network for solver tests: bounds straddle zero strictly and contain the
/// base injection strictly, so Slater's condition holds.
PowerNetwork random_solver_network(std::mt19937& rng, int n_buses, int extra_edges,
                                   bool random_weights);

/// Tightens flow thresholds to factor * |base flow| on the most loaded
/// branches so some constraints are active at the optimum.
void tighten_thresholds(PowerNetwork& network, double factor, int count);

/// Single-state quiescent trajectory at the given admittance; lets tests
/// build shedding problems without running a disturbance first.
CascadeTrajectory frozen_trajectory(const PowerNetwork& network, const Vec& admittance);

double central_difference(const std::function<double(double)>& f, double x, double h);

PowerNetwork two_bus_network(double injection = 1.0, double admittance = 1.0,
                             double threshold = 2.0);
PowerNetwork triangle_network(double threshold = 2.0);

}  // namespace gridshed::testing

#endif
