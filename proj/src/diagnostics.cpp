#include "stagger/diagnostics.hpp"

#include <map>
#include <ostream>

#include "json.hpp"
#include "stagger/error.hpp"
#include "stagger/fixed_effects.hpp"
#include "stagger/format.hpp"
#include "stagger/parallel.hpp"
#include "stagger/regression.hpp"

namespace stagger {

namespace {

// Weighted frequency components for every treated cell with positive weight.
WeightDecomposition components(const Panel& panel) {
  const std::size_t G = panel.n_cohorts() + 1;
  const std::size_t T = panel.n_times();
  std::vector<double> wg(G, 0.0), dg(G, 0.0), wt(T, 0.0), dt(T, 0.0), wgt(G * T, 0.0);
  double w_all = 0.0, d_all = 0.0;
  for (std::size_t i = 0; i < panel.size(); ++i) {
    const double w = panel.weight(i);
    const double d = panel.treated(i) ? w : 0.0;
    const auto g = static_cast<std::size_t>(panel.cohort_index(i));
    const auto t = static_cast<std::size_t>(panel.time_index(i));
    wg[g] += w;
    dg[g] += d;
    wt[t] += w;
    dt[t] += d;
    wgt[g * T + t] += d;
    w_all += w;
    d_all += d;
  }
  if (d_all <= 0.0) throw Error(ErrorKind::NoTreatedCells, "panel has no treated observations with positive weight");

  WeightDecomposition out;
  for (std::size_t g = 1; g < G; ++g) {
    for (std::size_t t = 0; t < T; ++t) {
      if (wgt[g * T + t] <= 0.0) continue;
      CellWeight c;
      c.cohort = static_cast<int>(g);
      c.adoption = panel.cohorts()[g - 1];
      c.time = panel.times()[t];
      c.rel_time = relative_time(c.adoption, c.time);
      c.p_d_given_g = dg[g] / wg[g];
      c.p_d_given_p = dt[t] / wt[t];
      c.p_d = d_all / w_all;
      c.p_gp = wgt[g * T + t] / w_all;
      out.cells.push_back(c);
    }
  }
  return out;
}

}  // namespace

double WeightDecomposition::sum() const {
  double s = 0.0;
  for (const auto& c : cells) s += c.weight;
  return s;
}

std::size_t WeightDecomposition::negative_count() const {
  std::size_t n = 0;
  for (const auto& c : cells) n += c.weight < 0.0 ? 1 : 0;
  return n;
}

double WeightDecomposition::negative_mass() const {
  double s = 0.0;
  for (const auto& c : cells) s += c.weight < 0.0 ? c.weight : 0.0;
  return s;
}

const CellWeight* WeightDecomposition::find(int adoption, int time) const {
  for (const auto& c : cells) {
    if (c.adoption == adoption && c.time == time) return &c;
  }
  return nullptr;
}

WeightDecomposition did_weights(const Panel& panel) {
  if (!is_balanced(panel)) return did_weights_bruteforce(panel);
  auto out = components(panel);
  double total = 0.0;
  for (auto& c : out.cells) {
    c.weight = (1.0 - c.p_d_given_g - (c.p_d_given_p - c.p_d)) * c.p_gp;
    total += c.weight;
  }
  if (total == 0.0) throw Error(ErrorKind::Unidentified, "treatment is collinear with the fixed effects");
  for (auto& c : out.cells) c.weight /= total;
  return out;
}

WeightDecomposition did_weights_bruteforce(const Panel& panel, FeLevel fe) {
  auto out = components(panel);
  out.closed_form = false;
  const Eigen::VectorXd d_tilde = residualize_treatment(panel, fe);
  const auto rows = all_rows(panel);
  const Eigen::VectorXd w = weights_of(panel, rows);
  const Design design{d_tilde, {"D_tilde"}};

  parallel_for(out.cells.size(), default_threads(), [&](std::size_t j) {
    auto& c = out.cells[j];
    Eigen::VectorXd indicator = Eigen::VectorXd::Zero(d_tilde.size());
    for (std::size_t i = 0; i < panel.size(); ++i) {
      if (panel.treated(i) && panel.cohort_index(i) == c.cohort && panel.time(i) == c.time) {
        indicator(static_cast<Eigen::Index>(i)) = 1.0;
      }
    }
    c.weight = wls_fit(design, indicator, w).coefficients(0);
  });
  return out;
}

double implied_estimand(const WeightDecomposition& weights, const EffectGrid& grid) {
  double s = 0.0;
  for (const auto& c : weights.cells) {
    const auto* cell = grid.find(c.adoption, c.time);
    if (!cell) {
      throw Error(ErrorKind::MissingCell, "effect grid has no cell (" + std::to_string(c.adoption) + "," +
                                              std::to_string(c.time) + ")");
    }
    s += c.weight * cell->beta;
  }
  return s;
}

double StackedWeights::sum() const {
  double s = 0.0;
  for (double w : weight) s += w * post;
  return s;
}

StackedWeights stacked_weights(const std::vector<double>& cohort_sizes, double control_size, int pre, int post) {
  if (post < 1) throw Error(ErrorKind::InvalidInput, "stacked weights need post >= 1");
  if (pre < 1) throw Error(ErrorKind::InvalidInput, "stacked weights need pre >= 1");
  if (cohort_sizes.empty()) throw Error(ErrorKind::NoTreatedCells, "no treated cohorts");
  StackedWeights out;
  out.pre = pre;
  out.post = post;
  out.tau = static_cast<double>(post) / static_cast<double>(pre + post);
  double total_size = 0.0;
  for (std::size_t c = 0; c < cohort_sizes.size(); ++c) {
    const double n_c = cohort_sizes[c] + control_size;
    const double pi = n_c > 0.0 ? cohort_sizes[c] / n_c : 0.0;
    if (!(pi > 0.0 && pi < 1.0)) {
      throw Error(ErrorKind::DegenerateDataset,
                  "dataset " + std::to_string(c) + " needs both treated and control units");
    }
    out.pi.push_back(pi);
    out.rho.push_back(n_c);
    total_size += n_c;
  }
  double denom = 0.0;
  for (std::size_t c = 0; c < out.pi.size(); ++c) {
    out.rho[c] /= total_size;
    denom += (1.0 - out.pi[c]) * out.pi[c] * out.rho[c];
  }
  for (std::size_t c = 0; c < out.pi.size(); ++c) {
    out.weight.push_back((1.0 - out.pi[c]) * out.pi[c] * out.rho[c] / (post * denom));
  }
  return out;
}

void write_weights_csv(std::ostream& os, const WeightDecomposition& weights) {
  os << "group,period,weight,p_d_given_g,p_d_given_p,p_d,p_gp\n";
  for (const auto& c : weights.cells) {
    os << c.adoption << ',' << c.time << ',' << fmt17(c.weight) << ',' << fmt17(c.p_d_given_g) << ','
       << fmt17(c.p_d_given_p) << ',' << fmt17(c.p_d) << ',' << fmt17(c.p_gp) << '\n';
  }
}

std::string weights_json(const WeightDecomposition& weights) {
  nlohmann::json j;
  j["closed_form"] = weights.closed_form;
  j["sum"] = weights.sum();
  j["negative_count"] = weights.negative_count();
  j["negative_mass"] = weights.negative_mass();
  auto& cells = j["cells"] = nlohmann::json::array();
  for (const auto& c : weights.cells) {
    cells.push_back({{"group", c.adoption},
                     {"period", c.time},
                     {"duration", c.rel_time},
                     {"weight", c.weight},
                     {"p_d_given_g", c.p_d_given_g},
                     {"p_d_given_p", c.p_d_given_p},
                     {"p_d", c.p_d},
                     {"p_gp", c.p_gp}});
  }
  return j.dump(2);
}

}  // namespace stagger
