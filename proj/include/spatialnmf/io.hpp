#pragma once

#include "spatialnmf/types.hpp"

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace spatialnmf {

struct SpatialGraph;

/// Shortest decimal string that round-trips the double exactly.
std::string format_double(double x);

/// Matrix Market coordinate format, "real general", 1-indexed, cells as rows.
SparseMatrix read_matrix_market(const std::string& path);
void write_matrix_market(const std::string& path, const SparseMatrix& m);

/// One identifier per line, UTF-8.
std::vector<std::string> read_id_file(const std::string& path);
void write_id_file(const std::string& path,
                   const std::vector<std::string>& ids);

/// CSV with header `cell_id,x,y`; rows may be in any order and are realigned
/// to the given cell order. Throws if a cell is missing or unknown.
Matrix read_coords_csv(const std::string& path,
                       const std::vector<std::string>& cell_ids);
void write_coords_csv(const std::string& path,
                      const std::vector<std::string>& cell_ids,
                      const Matrix& coords);

/// CSV with header `cell_id,score`.
std::unordered_map<std::string, double> read_scores_csv(
    const std::string& path);

/// Assembles a Dataset from the four on-disk pieces and validates the
/// invariants. Coordinates are realigned to the cell file's order.
Dataset load_dataset(const std::string& matrix_path,
                     const std::string& genes_path,
                     const std::string& cells_path,
                     const std::string& coords_path);

void save_dataset(const Dataset& ds, const std::string& matrix_path,
                  const std::string& genes_path,
                  const std::string& cells_path,
                  const std::string& coords_path);

/// CSV with header `cell_id,cluster`.
void write_labels_csv(const std::string& path,
                      const std::vector<std::string>& cell_ids,
                      const std::vector<int>& labels);
std::vector<std::pair<std::string, int>> read_labels_csv(
    const std::string& path);

/// Dense factor dump, header `factor_1..factor_k`.
void write_factor_csv(const std::string& path, const Matrix& m);
Matrix read_factor_csv(const std::string& path);

/// Edge list `src,dst,weight`, sorted by src then dst.
void write_edge_list_csv(const std::string& path, const SpatialGraph& g);

}  // namespace spatialnmf
