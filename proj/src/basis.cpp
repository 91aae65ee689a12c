#include "ccx/basis.hpp"

#include <algorithm>
#include <cmath>

#include "ccx/error.hpp"
#include "ccx/quantile.hpp"

namespace ccx {

std::string to_string(BasisKind kind) {
  switch (kind) {
    case BasisKind::natural_cubic: return "natural_cubic";
    case BasisKind::tensor_product: return "tensor_product";
    case BasisKind::linear_interaction: return "linear_interaction";
  }
  return "unknown";
}

void BasisSpec::validate() const {
  if (df < 1) throw InputError("spline df must be positive");
  if (static_cast<int>(interior_knots.size()) != df - 1) {
    throw InputError("natural cubic spline with df=" + std::to_string(df) + " needs " +
                     std::to_string(df - 1) + " interior knots");
  }
  if (!(boundary_knots.first < boundary_knots.second)) {
    throw InputError("boundary knots must be strictly increasing");
  }
  double prev = boundary_knots.first;
  for (const double k : interior_knots) {
    if (!(k > prev)) throw InputError("interior knots must increase strictly inside the boundary");
    prev = k;
  }
  if (!(prev < boundary_knots.second)) {
    throw InputError("interior knots must lie strictly inside the boundary");
  }
}

BasisSpec fit_knots(std::span<const double> values, int df) {
  if (df < 1) throw InputError("spline df must be positive");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  int n_distinct = 0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i == 0 || sorted[i] != sorted[i - 1]) ++n_distinct;
  }
  if (n_distinct < df + 1) {
    throw DegenerateDataError("sample has " + std::to_string(n_distinct) +
                              " distinct values; df=" + std::to_string(df) + " needs " +
                              std::to_string(df + 1) + " knots");
  }
  BasisSpec spec;
  spec.kind = BasisKind::natural_cubic;
  spec.df = df;
  spec.boundary_knots = {sorted.front(), sorted.back()};
  for (int k = 1; k < df; ++k) {
    spec.interior_knots.push_back(
        quantile_type1_sorted(sorted, static_cast<double>(k) / static_cast<double>(df)));
  }
  try {
    spec.validate();
  } catch (const InputError& e) {
    throw DegenerateDataError(std::string("knots collapse on tied values: ") + e.what());
  }
  return spec;
}

Eigen::VectorXd eval_natural_cubic(const BasisSpec& spec, double x) {
  // Truncated-power natural spline on knots rescaled to [0, 1]:
  //   N_1 = u,  N_{k+1} = d_k(u) - d_{K-1}(u),
  //   d_k(u) = ((u - k_k)_+^3 - (u - k_K)_+^3) / (k_K - k_k).
  const double lo = spec.boundary_knots.first;
  const double width = spec.boundary_knots.second - lo;
  const double u = (x - lo) / width;
  const int n_knots = spec.df + 1;
  std::vector<double> knots(n_knots);
  knots.front() = 0.0;
  knots.back() = 1.0;
  for (int k = 0; k + 2 < n_knots; ++k) knots[k + 1] = (spec.interior_knots[k] - lo) / width;

  auto cube_plus = [](double v) { return v > 0.0 ? v * v * v : 0.0; };
  const double tail = cube_plus(u - 1.0);
  auto d = [&](int k) { return (cube_plus(u - knots[k]) - tail) / (1.0 - knots[k]); };

  Eigen::VectorXd out(spec.df);
  out[0] = u;
  if (spec.df > 1) {
    const double last = d(n_knots - 2);
    for (int k = 0; k + 2 < n_knots; ++k) out[k + 1] = d(k) - last;
  }
  return out;
}

Eigen::VectorXd eval_interaction(const InteractionSpec& spec, double t, double a) {
  switch (spec.kind) {
    case BasisKind::linear_interaction: {
      Eigen::VectorXd out(1);
      out[0] = t * a;
      return out;
    }
    case BasisKind::tensor_product: {
      const auto bt = eval_natural_cubic(spec.temperature, t);
      const auto ba = eval_natural_cubic(spec.pm25, a);
      Eigen::VectorXd out(bt.size() * ba.size());
      for (Eigen::Index i = 0; i < bt.size(); ++i) {
        for (Eigen::Index j = 0; j < ba.size(); ++j) out[i * ba.size() + j] = bt[i] * ba[j];
      }
      return out;
    }
    case BasisKind::natural_cubic: break;
  }
  throw UnsupportedModelError("interaction basis must be linear_interaction or tensor_product");
}

int ModelBasis::dimension() const {
  return temperature.df + pm25.df + interaction_spec().dimension();
}

std::vector<Block> ModelBasis::blocks() const {
  const int h = interaction_spec().dimension();
  return {{"f", 0, temperature.df},
          {"g", temperature.df, pm25.df},
          {"h", temperature.df + pm25.df, h}};
}

std::vector<std::string> ModelBasis::labels() const {
  std::vector<std::string> out;
  for (int i = 1; i <= temperature.df; ++i) out.push_back("f[" + std::to_string(i) + "]");
  for (int j = 1; j <= pm25.df; ++j) out.push_back("g[" + std::to_string(j) + "]");
  if (interaction == BasisKind::linear_interaction) {
    out.emplace_back("h[TxA]");
  } else {
    for (int i = 1; i <= temperature.df; ++i) {
      for (int j = 1; j <= pm25.df; ++j) {
        out.push_back("h[" + std::to_string(i) + "," + std::to_string(j) + "]");
      }
    }
  }
  return out;
}

Eigen::VectorXd ModelBasis::row(double t, double a) const {
  Eigen::VectorXd out(dimension());
  out << eval_natural_cubic(temperature, t), eval_natural_cubic(pm25, a),
      eval_interaction(interaction_spec(), t, a);
  return out;
}

DesignMatrix build_design(std::span<const MatchedSet> sets, const ModelBasis& basis) {
  basis.temperature.validate();
  basis.pm25.validate();
  std::size_t n_rows = 0;
  for (const auto& s : sets) n_rows += s.rows.size();

  DesignMatrix dm;
  dm.x.resize(static_cast<Eigen::Index>(n_rows), basis.dimension());
  dm.labels = basis.labels();
  dm.blocks = basis.blocks();
  dm.set_begin.reserve(sets.size() + 1);
  std::size_t r = 0;
  for (const auto& s : sets) {
    dm.set_begin.push_back(r);
    std::size_t case_row = n_rows;
    for (const auto& day : s.rows) {
      if (day.is_case) case_row = r;
      dm.x.row(static_cast<Eigen::Index>(r)) = basis.row(day.temperature, day.pm25_window);
      ++r;
    }
    if (case_row == n_rows) throw InputError("matched set '" + s.subject_id + "' has no case row");
    dm.case_rows.push_back(case_row);
  }
  dm.set_begin.push_back(r);
  if (!dm.x.allFinite()) throw InputError("design matrix has non-finite entries");
  return dm;
}

}  // namespace ccx
