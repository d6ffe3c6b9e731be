#pragma once

#include <string>
#include <vector>

#include "annotagg/label_data.hpp"
#include "oracles.hpp"

inline annotagg::LabelSpace numbered_labels(std::size_t K) {
  std::vector<std::string> names;
  for (std::size_t k = 0; k < K; ++k) names.push_back("l" + std::to_string(k));
  return annotagg::LabelSpace(names);
}

inline annotagg::AnnotationMatrix to_matrix(const oracle::Grid& rows, std::size_t K) {
  std::vector<std::string> items, annotators;
  for (std::size_t i = 0; i < rows.size(); ++i) items.push_back("item" + std::to_string(i));
  for (std::size_t j = 0; j < rows.at(0).size(); ++j) annotators.push_back("ann" + std::to_string(j));
  annotagg::AnnotationMatrix m(numbered_labels(K), items, annotators);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      if (rows[i][j] >= 0) m.set(i, j, static_cast<annotagg::LabelId>(rows[i][j]));
  return m;
}

inline oracle::Grid to_grid(const annotagg::AnnotationMatrix& m) {
  oracle::Grid g(m.n_items(), std::vector<int>(m.n_annotators(), -1));
  for (std::size_t i = 0; i < m.n_items(); ++i)
    for (std::size_t j = 0; j < m.n_annotators(); ++j)
      if (auto a = m.at(i, j)) g[i][j] = static_cast<int>(*a);
  return g;
}
