#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "netgee/graph.hpp"
#include "netgee/io.hpp"

namespace netgee {

// Country-to-country flight counts; countries are alpha-2 codes in
// lexicographic order and the diagonal (domestic flights) is zero.
struct FlightCountMatrix {
  std::vector<std::string> countries;
  Eigen::MatrixXd counts;
  std::string month;
};

struct CountryCovariates {
  std::vector<std::string> codes;  // aligned with FlightCountMatrix
  Eigen::VectorXd gdp;             // USD
  Eigen::VectorXd population;      // persons
  Eigen::VectorXd urban_pct;       // raw percent
  Eigen::VectorXd incidence_rate;  // cases per 1000
  Eigen::VectorXd aid;             // USD millions, pre-dichotomization
  bool has_incidence = false;
  bool has_aid = false;
};

struct JoinReport {
  std::vector<std::string> kept;
  std::vector<std::pair<std::string, std::string>> dropped;  // code, reason
  double domestic_flights_dropped = 0.0;
};

struct LoadResult {
  FlightCountMatrix flights;
  CountryCovariates covariates;
  JoinReport report;
};

enum class AdjacencyMode { Weighted, Unweighted };
enum class QuartileDomain { OffDiagonal, AllEntries };

namespace detail {

// Linear-interpolation quantile of a sorted sample (the inclusive
// convention: h = (N-1) * prob).
inline double quantile_sorted(const std::vector<double>& sorted, double prob) {
  if (sorted.empty()) throw std::invalid_argument("quantile of empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

inline double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of empty sample");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace detail

struct AdjacencyBuild {
  DirectedGraph graph;
  double q3 = std::numeric_limits<double>::quiet_NaN();  // unweighted mode only
};

// Unweighted: A_ij = 1 iff C_ij exceeds (strictly) the third quartile of
// the count entries (off-diagonal ones by default, zeros included).
// Weighted: A_ij = C_ij / (population_j / 1e6), flights per million
// destination inhabitants.
inline AdjacencyBuild build_adjacency(const FlightCountMatrix& flights,
                                      AdjacencyMode mode,
                                      const CountryCovariates& covs,
                                      QuartileDomain domain = QuartileDomain::OffDiagonal) {
  const auto n = flights.counts.rows();
  if (n == 0) throw std::invalid_argument("empty count matrix");
  if (mode == AdjacencyMode::Weighted &&
      covs.codes != flights.countries)
    throw std::invalid_argument("covariates do not align with count matrix");

  if (mode == AdjacencyMode::Unweighted) {
    std::vector<double> entries;
    entries.reserve(static_cast<std::size_t>(n) * n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        if (domain == QuartileDomain::AllEntries || i != j)
          entries.push_back(flights.counts(i, j));
    std::sort(entries.begin(), entries.end());
    const double q3 = detail::quantile_sorted(entries, 0.75);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        if (i != j && flights.counts(i, j) > q3) a(i, j) = 1.0;
    return {DirectedGraph(std::move(a), /*is_binary=*/true), q3};
  }

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double pop_millions = covs.population[j] / 1e6;
    if (!(pop_millions > 0.0))
      throw std::invalid_argument("zero population for country " + covs.codes[j]);
    for (Eigen::Index i = 0; i < n; ++i)
      if (i != j) a(i, j) = flights.counts(i, j) / pop_millions;
  }
  return {DirectedGraph(std::move(a), /*is_binary=*/false),
          std::numeric_limits<double>::quiet_NaN()};
}

// Design column per country: (1, population/1e6, gdp/1e12, urban_pct/1e2).
inline Eigen::MatrixXd scale_covariates(const CountryCovariates& covs) {
  const auto n = static_cast<Eigen::Index>(covs.codes.size());
  Eigen::MatrixXd x(4, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    x(0, j) = 1.0;
    x(1, j) = covs.population[j] / 1e6;
    x(2, j) = covs.gdp[j] / 1e12;
    x(3, j) = covs.urban_pct[j] / 1e2;
  }
  return x;
}

// 1 iff strictly above the median; ties at the median map to 0.
inline Eigen::VectorXd dichotomize_aid(const Eigen::VectorXd& aid) {
  if (aid.size() == 0) throw std::invalid_argument("empty aid vector");
  const double med =
      detail::median(std::vector<double>(aid.data(), aid.data() + aid.size()));
  Eigen::VectorXd out(aid.size());
  for (Eigen::Index i = 0; i < aid.size(); ++i) out[i] = aid[i] > med ? 1.0 : 0.0;
  return out;
}

inline double aid_median(const Eigen::VectorXd& aid) {
  return detail::median(std::vector<double>(aid.data(), aid.data() + aid.size()));
}

// Reads the flight edge list (origin_code,dest_code,count[,month]) and
// the covariate table (code,gdp,population,urban_pct[,incidence_rate[,aid]]),
// inner-joins on alpha-2 code, drops and logs incomplete countries, and
// orders everything lexicographically by code. Duplicate covariate rows
// and malformed cells are errors carrying the line number.
inline LoadResult load_and_join(const std::string& flight_csv_path,
                                const std::string& covariates_csv_path) {
  auto ff = detail::open_in(flight_csv_path);
  std::string line;
  std::size_t line_no = 0;
  struct FlightRow { std::string from, to; double count; };
  std::vector<FlightRow> rows;
  std::set<std::string> flight_codes;
  std::string month;
  while (std::getline(ff, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != 3 && cells.size() != 4)
      throw std::runtime_error(flight_csv_path + ":" + std::to_string(line_no) +
                               ": expected origin_code,dest_code,count[,month]");
    if (line_no == 1 && (cells[0] == "origin_code" || cells[0] == "origin")) continue;
    FlightRow r{cells[0], cells[1],
                detail::parse_number(cells[2], flight_csv_path, line_no)};
    if (r.count < 0.0)
      throw std::runtime_error(flight_csv_path + ":" + std::to_string(line_no) +
                               ": negative flight count");
    if (cells.size() == 4 && month.empty()) month = cells[3];
    flight_codes.insert(r.from);
    flight_codes.insert(r.to);
    rows.push_back(std::move(r));
  }

  auto cf = detail::open_in(covariates_csv_path);
  struct CovRow { double gdp, population, urban, incidence, aid; bool has_inc, has_aid; };
  std::map<std::string, CovRow> covs;
  std::vector<std::string> incomplete;
  line_no = 0;
  bool file_has_inc = false, file_has_aid = false;
  while (std::getline(cf, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (line_no == 1 && cells[0] == "code") {
      file_has_inc = cells.size() >= 5;
      file_has_aid = cells.size() >= 6;
      continue;
    }
    if (cells.size() < 4 || cells.size() > 6)
      throw std::runtime_error(covariates_csv_path + ":" + std::to_string(line_no) +
                               ": expected code,gdp,population,urban_pct[,incidence_rate[,aid]]");
    const std::string code = cells[0];
    if (covs.count(code))
      throw std::runtime_error(covariates_csv_path + ":" + std::to_string(line_no) +
                               ": duplicate country code '" + code + "'");
    bool missing = false;
    for (std::size_t c = 1; c < cells.size(); ++c)
      if (cells[c].empty()) missing = true;
    if (missing) {
      incomplete.push_back(code);
      continue;
    }
    CovRow r{};
    r.gdp = detail::parse_number(cells[1], covariates_csv_path, line_no);
    r.population = detail::parse_number(cells[2], covariates_csv_path, line_no);
    r.urban = detail::parse_number(cells[3], covariates_csv_path, line_no);
    r.has_inc = cells.size() >= 5;
    r.has_aid = cells.size() >= 6;
    r.incidence = r.has_inc ? detail::parse_number(cells[4], covariates_csv_path, line_no) : 0.0;
    r.aid = r.has_aid ? detail::parse_number(cells[5], covariates_csv_path, line_no) : 0.0;
    file_has_inc = file_has_inc || r.has_inc;
    file_has_aid = file_has_aid || r.has_aid;
    covs.emplace(code, r);
  }

  LoadResult out;
  for (const auto& code : flight_codes)
    if (covs.count(code)) out.report.kept.push_back(code);
  if (out.report.kept.empty())
    throw std::runtime_error("empty intersection of flight and covariate countries");
  std::sort(out.report.kept.begin(), out.report.kept.end());
  for (const auto& code : flight_codes)
    if (!covs.count(code))
      out.report.dropped.emplace_back(
          code, std::count(incomplete.begin(), incomplete.end(), code)
                    ? "incomplete covariates"
                    : "missing from covariates");
  for (const auto& [code, r] : covs)
    if (!flight_codes.count(code)) out.report.dropped.emplace_back(code, "missing from flights");
  std::sort(out.report.dropped.begin(), out.report.dropped.end());

  const auto& kept = out.report.kept;
  const auto n = static_cast<Eigen::Index>(kept.size());
  std::map<std::string, Eigen::Index> index;
  for (Eigen::Index i = 0; i < n; ++i) index[kept[i]] = i;

  out.flights.countries = kept;
  out.flights.month = month;
  out.flights.counts = Eigen::MatrixXd::Zero(n, n);
  for (const auto& r : rows) {
    const auto fi = index.find(r.from);
    const auto ti = index.find(r.to);
    if (fi == index.end() || ti == index.end()) continue;
    if (fi->second == ti->second) {
      out.report.domestic_flights_dropped += r.count;
      continue;
    }
    out.flights.counts(fi->second, ti->second) += r.count;
  }

  auto& cv = out.covariates;
  cv.codes = kept;
  cv.gdp.resize(n);
  cv.population.resize(n);
  cv.urban_pct.resize(n);
  cv.incidence_rate.resize(n);
  cv.aid.resize(n);
  cv.has_incidence = file_has_inc;
  cv.has_aid = file_has_aid;
  for (Eigen::Index i = 0; i < n; ++i) {
    const CovRow& r = covs.at(kept[i]);
    cv.gdp[i] = r.gdp;
    cv.population[i] = r.population;
    cv.urban_pct[i] = r.urban;
    cv.incidence_rate[i] = r.incidence;
    cv.aid[i] = r.aid;
  }
  return out;
}

inline nlohmann::json join_report_to_json(const JoinReport& report) {
  nlohmann::json j;
  j["kept"] = report.kept;
  nlohmann::json dropped = nlohmann::json::array();
  for (const auto& [code, reason] : report.dropped)
    dropped.push_back({{"code", code}, {"reason", reason}});
  j["dropped"] = dropped;
  j["domestic_flights_dropped"] = report.domestic_flights_dropped;
  return j;
}

}  // namespace netgee
