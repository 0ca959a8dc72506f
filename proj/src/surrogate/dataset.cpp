#include "cybergen/surrogate/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "cybergen/parallel.hpp"

namespace cybergen::surrogate {

std::size_t GridSpec::size() const {
  if (axes.empty()) return 0;
  std::size_t n = 1;
  for (const auto& a : axes) n *= a.values.size();
  return n;
}

std::vector<double> GridSpec::point(std::size_t index) const {
  std::vector<double> p(axes.size());
  for (std::size_t k = axes.size(); k-- > 0;) {
    const auto& vals = axes[k].values;
    p[k] = vals[index % vals.size()];
    index /= vals.size();
  }
  return p;
}

void GridSpec::validate() const {
  if (axes.empty()) throw DatasetError("grid has no axes");
  for (const auto& a : axes) {
    if (a.values.empty()) throw DatasetError("grid axis '" + a.reaction_id + "' is empty");
    for (std::size_t i = 0; i < a.values.size(); ++i) {
      if (!(a.values[i] >= 0.0)) throw DatasetError("grid axis '" + a.reaction_id + "' has a negative value");
      if (i > 0 && !(a.values[i] > a.values[i - 1]))
        throw DatasetError("grid axis '" + a.reaction_id + "' is not strictly increasing");
    }
  }
}

std::vector<double> linspace(double first, double last, std::size_t count) {
  std::vector<double> v(count);
  if (count == 1) {
    v[0] = first;
    return v;
  }
  const double step = (last - first) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) v[i] = first + step * static_cast<double>(i);
  if (count > 0) v.back() = last;
  return v;
}

std::size_t SurrogateDataset::feasible_count() const {
  return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const auto& r) { return r.feasible; }));
}

SurrogateDataset SurrogateDataset::feasible_only() const {
  SurrogateDataset out{feature_names, label_names, {}};
  for (const auto& r : rows)
    if (r.feasible) out.rows.push_back(r);
  return out;
}

void SurrogateDataset::validate() const {
  for (const auto& r : rows) {
    if (r.features.size() != feature_names.size()) throw DatasetError("row feature arity mismatch");
    if (r.feasible && r.labels.size() != label_names.size()) throw DatasetError("row label arity mismatch");
    if (!r.feasible && !r.labels.empty()) throw DatasetError("infeasible row carries labels");
  }
}

SurrogateDataset sweep(const fba::MetabolicNetwork& net, const GridSpec& grid, const SweepOptions& opts) {
  grid.validate();
  const auto& man = net.manipulatable_ids;
  SurrogateDataset ds;
  for (const auto& axis : grid.axes) {
    if (std::find(man.begin(), man.end(), axis.reaction_id) == man.end())
      throw DatasetError("grid axis '" + axis.reaction_id + "' is not a manipulatable reaction");
    const auto k = opts.k_cat.find(axis.reaction_id);
    if (k == opts.k_cat.end()) throw DatasetError("no k_cat for '" + axis.reaction_id + "'");
    const auto name = opts.feature_names.find(axis.reaction_id);
    ds.feature_names.push_back(name != opts.feature_names.end() ? name->second : "e_" + axis.reaction_id);
  }
  std::vector<LabelSpec> labels = opts.labels;
  if (labels.empty())
    for (const auto& id : net.exchange_ids) labels.push_back({"v_" + id, id});
  for (const auto& l : labels) {
    net.require_reaction(l.reaction_id);
    ds.label_names.push_back(l.name);
  }

  ds.rows.resize(grid.size());
  parallel_for(
      grid.size(),
      [&](std::size_t j) {
        const auto g = grid.point(j);
        fba::FluxAssignment pinned;
        fba::FluxAssignment kcat;
        for (std::size_t a = 0; a < grid.axes.size(); ++a) {
          pinned[grid.axes[a].reaction_id] = g[a];
          kcat[grid.axes[a].reaction_id] = opts.k_cat.at(grid.axes[a].reaction_id);
        }
        const auto sol = fba::solve_fba(net, pinned, kcat, opts.simplex);
        DatasetRow& row = ds.rows[j];
        // Enzyme features come straight from the grid point, so infeasible rows have them too.
        for (std::size_t a = 0; a < grid.axes.size(); ++a)
          row.features.push_back(std::abs(g[a]) / kcat.at(grid.axes[a].reaction_id));
        row.feasible = sol.status == fba::LpStatus::optimal;
        if (row.feasible)
          for (const auto& l : labels) row.labels.push_back(sol.fluxes.at(l.reaction_id));
      },
      opts.threads);
  return ds;
}

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_cell(const std::string& cell, std::size_t line_no) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &used);
  } catch (const std::exception&) {
    throw DatasetError("line " + std::to_string(line_no) + ": '" + cell + "' is not a number");
  }
  if (used != cell.size()) throw DatasetError("line " + std::to_string(line_no) + ": trailing characters in '" + cell + "'");
  return v;
}

}  // namespace

void write_dataset_csv(const SurrogateDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DatasetError("cannot write " + path.string());
  for (const auto& f : ds.feature_names) out << f << ',';
  for (const auto& l : ds.label_names) out << l << ',';
  out << "feasible\n";
  for (const auto& r : ds.rows) {
    for (double f : r.features) out << format_double(f) << ',';
    for (std::size_t k = 0; k < ds.label_names.size(); ++k) {
      if (r.feasible) out << format_double(r.labels[k]);
      out << ',';
    }
    out << (r.feasible ? 1 : 0) << '\n';
  }
}

SurrogateDataset read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DatasetError(path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv_line(line);
  if (header.empty() || header.back() != "feasible") throw DatasetError("header must end with 'feasible'");

  SurrogateDataset ds;
  for (std::size_t c = 0; c + 1 < header.size(); ++c) {
    if (header[c].rfind("e_", 0) == 0) {
      if (!ds.label_names.empty()) throw DatasetError("feature column '" + header[c] + "' after a label column");
      ds.feature_names.push_back(header[c]);
    } else {
      ds.label_names.push_back(header[c]);
    }
  }
  const std::size_t nf = ds.feature_names.size();
  const std::size_t nl = ds.label_names.size();

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw DatasetError("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) + " cells");
    DatasetRow row;
    const auto& flag = cells.back();
    if (flag != "0" && flag != "1") throw DatasetError("line " + std::to_string(line_no) + ": feasible must be 0 or 1");
    row.feasible = flag == "1";
    for (std::size_t c = 0; c < nf; ++c) row.features.push_back(parse_cell(cells[c], line_no));
    for (std::size_t c = 0; c < nl; ++c) {
      const auto& cell = cells[nf + c];
      if (row.feasible) {
        row.labels.push_back(parse_cell(cell, line_no));
      } else if (!cell.empty()) {
        throw DatasetError("line " + std::to_string(line_no) + ": infeasible row carries labels");
      }
    }
    ds.rows.push_back(std::move(row));
  }
  ds.validate();
  return ds;
}

DataSplit split(const SurrogateDataset& ds, std::uint64_t seed, double test_fraction, double validation_fraction) {
  SurrogateDataset feasible = ds.feasible_only();
  const std::size_t n = feasible.rows.size();
  if (n < 10) throw DatasetError("split needs at least 10 feasible rows, got " + std::to_string(n));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  const auto n_rest = n - n_test;
  const auto n_val = static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(n_rest)));

  DataSplit out;
  for (auto* part : {&out.train, &out.validation, &out.test}) {
    part->feature_names = feasible.feature_names;
    part->label_names = feasible.label_names;
  }
  for (std::size_t k = 0; k < n; ++k) {
    const auto& row = feasible.rows[order[k]];
    if (k < n_test) out.test.rows.push_back(row);
    else if (k < n_test + n_val) out.validation.rows.push_back(row);
    else out.train.rows.push_back(row);
  }
  return out;
}

}  // namespace cybergen::surrogate
