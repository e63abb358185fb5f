#include "spatialnmf/io.hpp"

#include "spatialnmf/graphs.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>
#include <unordered_set>

namespace spatialnmf {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw std::runtime_error(path + ": " + what);
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(path, "cannot open for reading");
    return in;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) fail(path, "cannot open for writing");
    return out;
}

// Splits a CSV line; the file formats here never quote fields.
std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(sep, start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    if (!out.empty() && !out.back().empty() && out.back().back() == '\r') {
        out.back().pop_back();
    }
    return out;
}

double parse_double(const std::string& s, const std::string& path) {
    try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) fail(path, "malformed number '" + s + "'");
        return v;
    } catch (const std::logic_error&) {
        fail(path, "malformed number '" + s + "'");
    }
}

}  // namespace

std::string format_double(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

void validate(const Dataset& ds) {
    if (static_cast<Index>(ds.gene_names.size()) != ds.counts.cols()) {
        throw std::invalid_argument(
            "dataset: gene_names length " +
            std::to_string(ds.gene_names.size()) +
            " does not match matrix columns " +
            std::to_string(ds.counts.cols()));
    }
    if (static_cast<Index>(ds.cell_ids.size()) != ds.counts.rows()) {
        throw std::invalid_argument(
            "dataset: cell_ids length " + std::to_string(ds.cell_ids.size()) +
            " does not match matrix rows " + std::to_string(ds.counts.rows()));
    }
    if (ds.coords.rows() != ds.counts.rows() || ds.coords.cols() != 2) {
        throw std::invalid_argument(
            "dataset: coords must be n_cells x 2, got " +
            std::to_string(ds.coords.rows()) + " x " +
            std::to_string(ds.coords.cols()));
    }
    for (Index i = 0; i < ds.counts.outerSize(); ++i) {
        for (SparseMatrix::InnerIterator it(ds.counts, i); it; ++it) {
            if (it.value() < 0.0) {
                throw std::invalid_argument(
                    "dataset: negative entry at cell " +
                    std::to_string(it.row()) + ", gene " +
                    std::to_string(it.col()));
            }
        }
    }
    std::unordered_set<std::string> seen;
    for (const auto& g : ds.gene_names) {
        if (!seen.insert(g).second) {
            throw std::invalid_argument("dataset: duplicate gene name '" + g +
                                        "'");
        }
    }
    seen.clear();
    for (const auto& c : ds.cell_ids) {
        if (!seen.insert(c).second) {
            throw std::invalid_argument("dataset: duplicate cell id '" + c +
                                        "'");
        }
    }
}

SparseMatrix read_matrix_market(const std::string& path) {
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line)) fail(path, "empty file");
    if (line.rfind("%%MatrixMarket", 0) != 0) {
        fail(path, "missing MatrixMarket banner");
    }
    if (line.find("coordinate") == std::string::npos) {
        fail(path, "only coordinate format is supported");
    }
    while (std::getline(in, line)) {
        if (!line.empty() && line[0] != '%') break;
    }
    std::istringstream header(line);
    Index rows = 0, cols = 0;
    std::int64_t nnz = 0;
    if (!(header >> rows >> cols >> nnz)) fail(path, "malformed size line");
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(nnz));
    for (std::int64_t n = 0; n < nnz; ++n) {
        Index r = 0, c = 0;
        double v = 0.0;
        if (!(in >> r >> c >> v)) {
            fail(path, "expected " + std::to_string(nnz) +
                           " entries, file ends after " + std::to_string(n));
        }
        if (r < 1 || r > rows || c < 1 || c > cols) {
            fail(path, "entry (" + std::to_string(r) + ", " +
                           std::to_string(c) + ") outside declared " +
                           std::to_string(rows) + " x " +
                           std::to_string(cols) + " shape");
        }
        triplets.emplace_back(r - 1, c - 1, v);
    }
    SparseMatrix m(rows, cols);
    m.setFromTriplets(triplets.begin(), triplets.end());
    m.makeCompressed();
    return m;
}

void write_matrix_market(const std::string& path, const SparseMatrix& m) {
    auto out = open_out(path);
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << m.rows() << ' ' << m.cols() << ' ' << m.nonZeros() << '\n';
    for (Index i = 0; i < m.outerSize(); ++i) {
        for (SparseMatrix::InnerIterator it(m, i); it; ++it) {
            out << (it.row() + 1) << ' ' << (it.col() + 1) << ' '
                << format_double(it.value()) << '\n';
        }
    }
    if (!out) fail(path, "write failed");
}

std::vector<std::string> read_id_file(const std::string& path) {
    auto in = open_in(path);
    std::vector<std::string> ids;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) ids.push_back(line);
    }
    return ids;
}

void write_id_file(const std::string& path,
                   const std::vector<std::string>& ids) {
    auto out = open_out(path);
    for (const auto& id : ids) out << id << '\n';
    if (!out) fail(path, "write failed");
}

Matrix read_coords_csv(const std::string& path,
                       const std::vector<std::string>& cell_ids) {
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line)) fail(path, "empty file");
    auto header = split(line, ',');
    if (header.size() != 3 || header[0] != "cell_id" || header[1] != "x" ||
        header[2] != "y") {
        fail(path, "expected header 'cell_id,x,y'");
    }
    std::unordered_map<std::string, Index> order;
    order.reserve(cell_ids.size());
    for (std::size_t i = 0; i < cell_ids.size(); ++i) {
        order.emplace(cell_ids[i], static_cast<Index>(i));
    }
    Matrix coords(static_cast<Index>(cell_ids.size()), 2);
    std::vector<bool> filled(cell_ids.size(), false);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto fields = split(line, ',');
        if (fields.size() != 3) fail(path, "malformed row '" + line + "'");
        auto it = order.find(fields[0]);
        if (it == order.end()) {
            fail(path, "unknown cell id '" + fields[0] + "'");
        }
        coords(it->second, 0) = parse_double(fields[1], path);
        coords(it->second, 1) = parse_double(fields[2], path);
        filled[static_cast<std::size_t>(it->second)] = true;
    }
    for (std::size_t i = 0; i < filled.size(); ++i) {
        if (!filled[i]) {
            fail(path, "no coordinates for cell id '" + cell_ids[i] + "'");
        }
    }
    return coords;
}

void write_coords_csv(const std::string& path,
                      const std::vector<std::string>& cell_ids,
                      const Matrix& coords) {
    auto out = open_out(path);
    out << "cell_id,x,y\n";
    for (std::size_t i = 0; i < cell_ids.size(); ++i) {
        const Index r = static_cast<Index>(i);
        out << cell_ids[i] << ',' << format_double(coords(r, 0)) << ','
            << format_double(coords(r, 1)) << '\n';
    }
    if (!out) fail(path, "write failed");
}

std::unordered_map<std::string, double> read_scores_csv(
    const std::string& path) {
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line)) fail(path, "empty file");
    auto header = split(line, ',');
    if (header.size() != 2 || header[0] != "cell_id" ||
        header[1] != "score") {
        fail(path, "expected header 'cell_id,score'");
    }
    std::unordered_map<std::string, double> scores;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto fields = split(line, ',');
        if (fields.size() != 2) fail(path, "malformed row '" + line + "'");
        scores[fields[0]] = parse_double(fields[1], path);
    }
    return scores;
}

Dataset load_dataset(const std::string& matrix_path,
                     const std::string& genes_path,
                     const std::string& cells_path,
                     const std::string& coords_path) {
    Dataset ds;
    ds.counts = read_matrix_market(matrix_path);
    ds.gene_names = read_id_file(genes_path);
    ds.cell_ids = read_id_file(cells_path);
    if (static_cast<Index>(ds.gene_names.size()) != ds.counts.cols()) {
        fail(genes_path, "lists " + std::to_string(ds.gene_names.size()) +
                             " genes but matrix has " +
                             std::to_string(ds.counts.cols()) + " columns");
    }
    if (static_cast<Index>(ds.cell_ids.size()) != ds.counts.rows()) {
        fail(cells_path, "lists " + std::to_string(ds.cell_ids.size()) +
                             " cells but matrix has " +
                             std::to_string(ds.counts.rows()) + " rows");
    }
    ds.coords = read_coords_csv(coords_path, ds.cell_ids);
    ds.is_lognorm = false;
    validate(ds);
    return ds;
}

void save_dataset(const Dataset& ds, const std::string& matrix_path,
                  const std::string& genes_path,
                  const std::string& cells_path,
                  const std::string& coords_path) {
    write_matrix_market(matrix_path, ds.counts);
    write_id_file(genes_path, ds.gene_names);
    write_id_file(cells_path, ds.cell_ids);
    write_coords_csv(coords_path, ds.cell_ids, ds.coords);
}

void write_labels_csv(const std::string& path,
                      const std::vector<std::string>& cell_ids,
                      const std::vector<int>& labels) {
    if (cell_ids.size() != labels.size()) {
        throw std::invalid_argument("labels and cell_ids differ in length");
    }
    auto out = open_out(path);
    out << "cell_id,cluster\n";
    for (std::size_t i = 0; i < cell_ids.size(); ++i) {
        out << cell_ids[i] << ',' << labels[i] << '\n';
    }
    if (!out) fail(path, "write failed");
}

std::vector<std::pair<std::string, int>> read_labels_csv(
    const std::string& path) {
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line)) fail(path, "empty file");
    auto header = split(line, ',');
    if (header.size() != 2 || header[0] != "cell_id" ||
        header[1] != "cluster") {
        fail(path, "expected header 'cell_id,cluster'");
    }
    std::vector<std::pair<std::string, int>> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto fields = split(line, ',');
        if (fields.size() != 2) fail(path, "malformed row '" + line + "'");
        out.emplace_back(fields[0], std::stoi(fields[1]));
    }
    return out;
}

void write_factor_csv(const std::string& path, const Matrix& m) {
    auto out = open_out(path);
    for (Index c = 0; c < m.cols(); ++c) {
        out << (c > 0 ? "," : "") << "factor_" << (c + 1);
    }
    out << '\n';
    for (Index r = 0; r < m.rows(); ++r) {
        for (Index c = 0; c < m.cols(); ++c) {
            if (c > 0) out << ',';
            out << format_double(m(r, c));
        }
        out << '\n';
    }
    if (!out) fail(path, "write failed");
}

Matrix read_factor_csv(const std::string& path) {
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line)) fail(path, "empty file");
    const Index cols = static_cast<Index>(split(line, ',').size());
    std::vector<double> values;
    Index rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto fields = split(line, ',');
        if (static_cast<Index>(fields.size()) != cols) {
            fail(path, "row " + std::to_string(rows + 1) + " has " +
                           std::to_string(fields.size()) + " fields, header " +
                           std::to_string(cols));
        }
        for (const auto& f : fields) values.push_back(parse_double(f, path));
        ++rows;
    }
    Matrix m(rows, cols);
    for (Index r = 0; r < rows; ++r) {
        for (Index c = 0; c < cols; ++c) {
            m(r, c) = values[static_cast<std::size_t>(r * cols + c)];
        }
    }
    return m;
}

void write_edge_list_csv(const std::string& path, const SpatialGraph& g) {
    auto out = open_out(path);
    out << "src,dst,weight\n";
    // Row-major inner iteration already visits entries sorted by src, dst.
    for (Index i = 0; i < g.adjacency.outerSize(); ++i) {
        for (SparseMatrix::InnerIterator it(g.adjacency, i); it; ++it) {
            out << it.row() << ',' << it.col() << ','
                << format_double(it.value()) << '\n';
        }
    }
    if (!out) fail(path, "write failed");
}

}  // namespace spatialnmf
