#include <algorithm>
#include <cmath>
#include <limits>

#include "align/error.hpp"
#include "align/stats.hpp"
#include "align/text.hpp"

namespace align::stats {

std::size_t DataTable::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return i;
  }
  throw FormulaMismatch("no column named '" + std::string(name) + "'");
}

void DataTable::add_column(std::string name, std::vector<double> values) {
  if (!columns.empty() && values.size() != rows()) {
    throw FormulaMismatch("column '" + name + "' has " + std::to_string(values.size()) +
                          " rows, table has " + std::to_string(rows()));
  }
  names.push_back(std::move(name));
  columns.push_back(std::move(values));
}

std::size_t DataTable::missing_count(std::size_t column) const {
  return static_cast<std::size_t>(
      std::count_if(columns[column].begin(), columns[column].end(), [](double v) { return std::isnan(v); }));
}

Design build_design(const DataTable& table, std::span<const std::string> terms, bool intercept) {
  const std::size_t n = table.rows();
  Design d;
  const std::size_t p = terms.size() + (intercept ? 1 : 0);
  d.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  Eigen::Index col = 0;
  if (intercept) {
    d.names.emplace_back(kIntercept);
    d.x.col(col++).setOnes();
  }
  for (const auto& term : terms) {
    const auto factors = text::split(term, ':');
    Eigen::VectorXd v = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n));
    for (const auto& f : factors) {
      const auto& c = table.column(f);
      for (std::size_t i = 0; i < n; ++i) v[static_cast<Eigen::Index>(i)] *= c[i];
    }
    if (!v.allFinite()) throw FormulaMismatch("term '" + term + "' has missing values");
    d.names.push_back(term);
    d.x.col(col++) = v;
  }
  return d;
}

void require_full_rank(const Design& design) {
  const auto& x = design.x;
  if (x.rows() < x.cols()) {
    throw RankError("design has " + std::to_string(x.rows()) + " rows for " +
                    std::to_string(x.cols()) + " columns");
  }
  const bool has_intercept = !design.names.empty() && design.names.front() == kIntercept;
  std::vector<std::string> constant;
  if (has_intercept) {
    for (Eigen::Index j = 1; j < x.cols(); ++j) {
      if (x.col(j).maxCoeff() == x.col(j).minCoeff()) {
        constant.push_back(design.names[static_cast<std::size_t>(j)]);
      }
    }
  }
  if (!constant.empty()) {
    std::string list;
    for (const auto& c : constant) list += (list.empty() ? "" : ", ") + c;
    throw RankError("constant predictor columns: " + list);
  }
  Eigen::MatrixXd scaled = x;
  for (Eigen::Index j = 0; j < scaled.cols(); ++j) {
    const double norm = scaled.col(j).norm();
    if (norm == 0.0) {
      throw RankError("all-zero column: " + design.names[static_cast<std::size_t>(j)]);
    }
    scaled.col(j) /= norm;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(scaled);
  qr.setThreshold(1e-10);
  if (qr.rank() < scaled.cols()) {
    std::string list;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index j = qr.rank(); j < scaled.cols(); ++j) {
      list += (list.empty() ? "" : ", ") + design.names[static_cast<std::size_t>(perm[j])];
    }
    throw RankError("design is rank deficient (rank " + std::to_string(qr.rank()) + " of " +
                    std::to_string(scaled.cols()) + "); dependent columns: " + list);
  }
}

}  // namespace align::stats
