#pragma once

#include <map>
#include <utility>
#include <vector>

#include "netgee/inference.hpp"

namespace netgee {

// The simulation-study layout: two balanced network sizes (K communities
// of m = 10) crossed with four modularity levels.
inline const std::vector<std::pair<int, int>>& study_sizes() {
  static const std::vector<std::pair<int, int>> sizes = {{20, 10}, {40, 10}};  // (K, m)
  return sizes;
}

inline const std::vector<std::pair<double, double>>& study_pq_grid() {
  static const std::vector<std::pair<double, double>> grid = {
      {0.8, 0.0}, {0.7, 0.1}, {0.6, 0.2}, {0.5, 0.3}};
  return grid;
}

struct ReferenceCell {
  double gee_indep, gee_exch, naive;
};

using ReferenceTable =
    std::map<std::pair<int, std::pair<double, double>>, ReferenceCell>;

// Published Type-I error rates (B = 1000) that `reproduce` compares
// against; keyed by (n, (p, q)).
inline const ReferenceTable& table1_reference() {
  static const ReferenceTable t = {
      {{200, {0.8, 0.0}}, {0.049, 0.055, 0.062}},
      {{200, {0.7, 0.1}}, {0.050, 0.055, 0.079}},
      {{200, {0.6, 0.2}}, {0.058, 0.061, 0.091}},
      {{200, {0.5, 0.3}}, {0.072, 0.075, 0.095}},
      {{400, {0.8, 0.0}}, {0.050, 0.050, 0.060}},
      {{400, {0.7, 0.1}}, {0.051, 0.056, 0.075}},
      {{400, {0.6, 0.2}}, {0.059, 0.062, 0.090}},
      {{400, {0.5, 0.3}}, {0.070, 0.075, 0.096}},
  };
  return t;
}

inline const ReferenceTable& table2_reference() {
  static const ReferenceTable t = {
      {{200, {0.8, 0.0}}, {0.045, 0.060, 0.049}},
      {{200, {0.7, 0.1}}, {0.055, 0.055, 0.056}},
      {{200, {0.6, 0.2}}, {0.060, 0.070, 0.062}},
      {{200, {0.5, 0.3}}, {0.063, 0.075, 0.065}},
      {{400, {0.8, 0.0}}, {0.050, 0.055, 0.050}},
      {{400, {0.7, 0.1}}, {0.060, 0.060, 0.061}},
      {{400, {0.6, 0.2}}, {0.059, 0.065, 0.063}},
      {{400, {0.5, 0.3}}, {0.065, 0.078, 0.068}},
  };
  return t;
}

inline double reference_rate(const ReferenceCell& cell, Method method) {
  switch (method) {
    case Method::GeeIndependence: return cell.gee_indep;
    case Method::GeeExchangeable: return cell.gee_exch;
    case Method::Naive: return cell.naive;
  }
  return 0.0;
}

}  // namespace netgee
