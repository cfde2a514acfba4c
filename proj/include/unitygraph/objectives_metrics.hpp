#pragma once

// Training objective and evaluation metrics.
//
// Pose tensors are person-major matrices: [N * frames, 3J], row n*frames + f.
// Loss norms are Frobenius norms over the whole tensor. Metrics are computed
// in metres and reported in millimetres.

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "unitygraph/autodiff.hpp"
#include "unitygraph/layers.hpp"

namespace unitygraph {

/// Linear readout from final node embeddings back to pose space.
struct ReconstructionHead {
  Linear linear;

  template <class S>
  static ReconstructionHead create(ParamStore<S>& store, std::size_t node_dim, std::size_t pose_dim,
                                   const std::string& name = "reconstruction") {
    return {Linear::create(store, name, node_dim, pose_dim)};
  }

  template <class S>
  Var<S> operator()(Tape<S>& tape, ParamStore<S>& store, Var<S> nodes) const {
    return linear(tape, store, nodes);
  }
};

template <class S>
Matrix<S> reconstruct(const Matrix<S>& nodes, const ReconstructionHead& head, ParamStore<S>& store) {
  if (nodes.cols() != store[head.linear.weight].value.rows()) {
    throw Error(ErrorKind::shape_mismatch, "node width does not match reconstruction readout");
  }
  Tape<S> tape;
  return head(tape, store, tape.constant(nodes)).value();
}

struct LossWeights {
  double pre = 0.7;
  double rec = 0.2;
  double inf = 0.1;

  void validate() const {
    if (!(pre > 0.0) || !(rec >= 0.0) || !(inf >= 0.0) || !std::isfinite(pre + rec + inf)) {
      throw Error(ErrorKind::config_invalid, "loss weights must be finite, non-negative, with lambda_pre > 0");
    }
  }
  double combine(double p, double r, double i) const { return pre * p + rec * r + inf * i; }
};

struct PersonLoss {
  double pre = 0;
  double rec = 0;
  double inf = 0;
};

struct LossReport {
  double pre = 0;
  double rec = 0;
  double inf = 0;
  double total = 0;  // weights.combine(pre, rec, inf)
  std::vector<PersonLoss> per_person;

  nlohmann::json to_json() const {
    auto people = nlohmann::json::array();
    for (const auto& p : per_person) people.push_back({{"pre", p.pre}, {"rec", p.rec}, {"inf", p.inf}});
    return {{"pre", pre}, {"rec", rec}, {"inf", inf}, {"total", total}, {"per_person", std::move(people)}};
  }
};

/// Differentiable loss terms on the tape. total is already weighted.
template <class S>
struct LossVars {
  Var<S> pre, rec, inf, total;
};

template <class S>
LossVars<S> loss_terms(Var<S> y_hat, Var<S> y, Var<S> x_hat, Var<S> x, const std::vector<Var<S>>& r_hat,
                       const std::vector<Var<S>>& r, const LossWeights& w) {
  if (r_hat.size() != r.size() || r.empty()) throw Error(ErrorKind::shape_mismatch, "reasoning traces misaligned");
  LossVars<S> out;
  out.pre = ad::frobenius_norm(ad::sub(y_hat, y));
  out.rec = ad::frobenius_norm(ad::sub(x_hat, x));
  std::vector<Var<S>> steps;
  for (std::size_t p = 0; p < r.size(); ++p) steps.push_back(ad::sum(ad::row_norms(ad::sub(r_hat[p], r[p]))));
  out.inf = ad::weighted_sum(steps, std::vector<S>(steps.size(), S(1)));
  out.total = ad::weighted_sum<S>({out.pre, out.rec, out.inf},
                                  {static_cast<S>(w.pre), static_cast<S>(w.rec), static_cast<S>(w.inf)});
  return out;
}

namespace detail {

template <class S>
void require_finite(const Matrix<S>& m, const char* what) {
  if (!m.all_finite()) throw Error(ErrorKind::non_finite_value, std::string("non-finite values in ") + what);
}

template <class S>
void require_same_shape(const Matrix<S>& a, const Matrix<S>& b, const char* what) {
  if (!a.same_shape(b)) throw Error(ErrorKind::shape_mismatch, std::string("shape mismatch in ") + what);
}

template <class S>
double squared_distance(const Matrix<S>& a, const Matrix<S>& b, std::size_t row, std::size_t begin, std::size_t end) {
  double acc = 0;
  for (std::size_t c = begin; c < end; ++c) {
    const double d = static_cast<double>(a(row, c)) - static_cast<double>(b(row, c));
    acc += d * d;
  }
  return acc;
}

}  // namespace detail

/// Value-level loss with per-person breakdown. Persons are taken from the
/// reasoning trace (each step is [N, 3J]).
template <class S>
LossReport loss(const Matrix<S>& y_hat, const Matrix<S>& y, const Matrix<S>& x_hat, const Matrix<S>& x,
                const std::vector<Matrix<S>>& r_hat, const std::vector<Matrix<S>>& r, const LossWeights& w) {
  w.validate();
  detail::require_same_shape(y_hat, y, "prediction loss");
  detail::require_same_shape(x_hat, x, "reconstruction loss");
  if (r_hat.size() != r.size() || r.empty()) throw Error(ErrorKind::shape_mismatch, "reasoning traces misaligned");
  for (const auto* m : {&y_hat, &y, &x_hat, &x}) detail::require_finite(*m, "loss input");
  const std::size_t N = r.front().rows();
  if (N == 0 || y.rows() % N != 0 || x.rows() % N != 0) throw Error(ErrorKind::shape_mismatch, "person count");
  const std::size_t P = y.rows() / N, T = x.rows() / N;

  LossReport rep;
  rep.per_person.resize(N);
  double pre2 = 0, rec2 = 0;
  for (std::size_t n = 0; n < N; ++n) {
    double p2 = 0, q2 = 0;
    for (std::size_t f = 0; f < P; ++f) p2 += detail::squared_distance(y_hat, y, n * P + f, 0, y.cols());
    for (std::size_t f = 0; f < T; ++f) q2 += detail::squared_distance(x_hat, x, n * T + f, 0, x.cols());
    rep.per_person[n].pre = std::sqrt(p2);
    rep.per_person[n].rec = std::sqrt(q2);
    pre2 += p2;
    rec2 += q2;
  }
  for (std::size_t p = 0; p < r.size(); ++p) {
    detail::require_same_shape(r_hat[p], r[p], "inference loss");
    detail::require_finite(r_hat[p], "reasoning trace");
    detail::require_finite(r[p], "reasoning trace");
    if (r[p].rows() != N) throw Error(ErrorKind::shape_mismatch, "reasoning step has wrong person count");
    for (std::size_t n = 0; n < N; ++n) {
      const double d = std::sqrt(detail::squared_distance(r_hat[p], r[p], n, 0, r[p].cols()));
      rep.per_person[n].inf += d;
      rep.inf += d;
    }
  }
  rep.pre = std::sqrt(pre2);
  rep.rec = std::sqrt(rec2);
  rep.total = w.combine(rep.pre, rep.rec, rep.inf);
  return rep;
}

// ---------------------------------------------------------------- metrics

/// Mean per-joint Euclidean distance (metres) at each predicted frame.
template <class S>
std::vector<double> mpjpe_per_frame(const Matrix<S>& y_hat, const Matrix<S>& y, std::size_t persons) {
  detail::require_same_shape(y_hat, y, "mpjpe");
  if (persons == 0 || y.rows() % persons != 0 || y.cols() % 3 != 0) throw Error(ErrorKind::shape_mismatch, "mpjpe layout");
  const std::size_t P = y.rows() / persons, J = y.cols() / 3;
  std::vector<double> out(P, 0.0);
  for (std::size_t f = 0; f < P; ++f) {
    double acc = 0;
    for (std::size_t n = 0; n < persons; ++n)
      for (std::size_t j = 0; j < J; ++j) acc += std::sqrt(detail::squared_distance(y_hat, y, n * P + f, 3 * j, 3 * j + 3));
    out[f] = acc / static_cast<double>(persons * J);
  }
  return out;
}

/// Mean over the first `frames` predicted frames, in millimetres.
template <class S>
double mpjpe_up_to(const Matrix<S>& y_hat, const Matrix<S>& y, std::size_t persons, std::size_t frames) {
  const auto curve = mpjpe_per_frame(y_hat, y, persons);
  if (frames == 0 || frames > curve.size()) throw Error(ErrorKind::horizon_out_of_range, "mpjpe horizon exceeds prediction");
  double acc = 0;
  for (std::size_t f = 0; f < frames; ++f) acc += curve[f];
  return 1000.0 * acc / static_cast<double>(frames);
}

/// Number of predicted frames covering `seconds` at `fps`.
inline std::size_t frames_for_seconds(double seconds, double fps) {
  return static_cast<std::size_t>(std::lround(seconds * fps));
}

inline constexpr double kMpjpeHorizonsSeconds[] = {1.0, 2.0, 3.0};
inline constexpr int kVimHorizonsMs[] = {100, 200, 500, 700, 900};

/// Cumulative MPJPE (mm) at the 1 s / 2 s / 3 s horizons that fit in the prediction.
template <class S>
std::map<double, double> mpjpe(const Matrix<S>& y_hat, const Matrix<S>& y, std::size_t persons, double fps) {
  const std::size_t P = y.rows() / std::max<std::size_t>(persons, 1);
  std::map<double, double> out;
  for (double h : kMpjpeHorizonsSeconds) {
    const std::size_t k = frames_for_seconds(h, fps);
    if (k >= 1 && k <= P) out[h] = mpjpe_up_to(y_hat, y, persons, k);
  }
  return out;
}

/// Mean over persons of the norm of the stacked 3J displacement at the
/// predicted frame reached after t_ms, in millimetres.
template <class S>
double vim(const Matrix<S>& y_hat, const Matrix<S>& y, std::size_t persons, double fps, double t_ms) {
  detail::require_same_shape(y_hat, y, "vim");
  if (persons == 0 || y.rows() % persons != 0) throw Error(ErrorKind::shape_mismatch, "vim layout");
  const std::size_t P = y.rows() / persons;
  const long k = std::lround(t_ms * fps / 1000.0);
  if (k < 1 || static_cast<std::size_t>(k) > P) {
    throw Error(ErrorKind::horizon_out_of_range, "VIM horizon " + std::to_string(t_ms) + " ms is outside the prediction");
  }
  double acc = 0;
  for (std::size_t n = 0; n < persons; ++n)
    acc += std::sqrt(detail::squared_distance(y_hat, y, n * P + static_cast<std::size_t>(k) - 1, 0, y.cols()));
  return 1000.0 * acc / static_cast<double>(persons);
}

/// Per-frame distance of every joint from the root joint: [frames, J].
template <class S>
Matrix<double> root_distance_series(const Matrix<S>& poses) {
  if (poses.cols() % 3 != 0) throw Error(ErrorKind::shape_mismatch, "pose width must be 3J");
  const std::size_t J = poses.cols() / 3;
  Matrix<double> out(poses.rows(), J);
  for (std::size_t f = 0; f < poses.rows(); ++f)
    for (std::size_t j = 0; j < J; ++j) {
      double acc = 0;
      for (std::size_t c = 0; c < 3; ++c) {
        const double d = static_cast<double>(poses(f, 3 * j + c)) - static_cast<double>(poses(f, c));
        acc += d * d;
      }
      out(f, j) = std::sqrt(acc);
    }
  return out;
}

/// Pearson correlation of each column of two [T', J] series. nullopt marks a
/// joint where either series has (numerically) zero variance.
inline std::vector<std::optional<double>> ppc(const Matrix<double>& a, const Matrix<double>& b) {
  if (!a.same_shape(b)) throw Error(ErrorKind::shape_mismatch, "ppc series shapes differ");
  if (a.rows() < 2) throw Error(ErrorKind::insufficient_frames, "ppc needs at least two frames");
  const std::size_t F = a.rows();
  std::vector<std::optional<double>> out(a.cols());
  for (std::size_t j = 0; j < a.cols(); ++j) {
    double ma = 0, mb = 0, scale_a = 0, scale_b = 0;
    for (std::size_t t = 0; t < F; ++t) {
      ma += a(t, j);
      mb += b(t, j);
      scale_a = std::max(scale_a, std::abs(a(t, j)));
      scale_b = std::max(scale_b, std::abs(b(t, j)));
    }
    ma /= static_cast<double>(F);
    mb /= static_cast<double>(F);
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t t = 0; t < F; ++t) {
      const double da = a(t, j) - ma, db = b(t, j) - mb;
      sab += da * db;
      saa += da * da;
      sbb += db * db;
    }
    // Rounding in the mean leaves residual variance of order (eps * scale)^2 * F.
    const double eps = 64.0 * std::numeric_limits<double>::epsilon();
    const double floor_a = eps * eps * scale_a * scale_a * static_cast<double>(F);
    const double floor_b = eps * eps * scale_b * scale_b * static_cast<double>(F);
    if (saa <= floor_a || sbb <= floor_b) continue;
    out[j] = std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
  }
  return out;
}

/// Mean of the defined entries, nullopt if none is defined.
inline std::optional<double> mean_defined(const std::vector<std::optional<double>>& v) {
  double acc = 0;
  std::size_t k = 0;
  for (const auto& x : v)
    if (x) {
      acc += *x;
      ++k;
    }
  if (k == 0) return std::nullopt;
  return acc / static_cast<double>(k);
}

/// Interaction score over time: the joint-averaged correlation on a sliding
/// window ending at each frame (entries before the first full window are nullopt).
inline std::vector<std::optional<double>> ppc_series(const Matrix<double>& a, const Matrix<double>& b, std::size_t window) {
  if (!a.same_shape(b)) throw Error(ErrorKind::shape_mismatch, "ppc series shapes differ");
  if (window < 2) throw Error(ErrorKind::config_invalid, "ppc window must be at least 2 frames");
  std::vector<std::optional<double>> out(a.rows());
  for (std::size_t end = window; end <= a.rows(); ++end) {
    Matrix<double> wa(window, a.cols()), wb(window, b.cols());
    for (std::size_t t = 0; t < window; ++t)
      for (std::size_t j = 0; j < a.cols(); ++j) {
        wa(t, j) = a(end - window + t, j);
        wb(t, j) = b(end - window + t, j);
      }
    out[end - 1] = mean_defined(ppc(wa, wb));
  }
  return out;
}

/// Rows [n*frames, (n+1)*frames) of a person-major pose matrix.
template <class S>
Matrix<S> person_rows(const Matrix<S>& poses, std::size_t persons, std::size_t n) {
  const std::size_t F = poses.rows() / persons;
  Matrix<S> out(F, poses.cols());
  std::copy_n(poses.data() + n * F * poses.cols(), F * poses.cols(), out.data());
  return out;
}

struct PairCorrelation {
  std::size_t first = 0;
  std::size_t second = 0;
  std::vector<std::optional<double>> joints;
};

struct MetricReport {
  std::map<double, double> mpjpe_mm;  // horizon seconds -> mm
  std::map<int, double> vim_mm;       // horizon ms -> mm
  std::vector<PairCorrelation> ppc;
  std::size_t scenes = 0;

  nlohmann::json to_json() const {
    nlohmann::json doc;
    doc["scenes"] = scenes;
    doc["mpjpe_mm"] = nlohmann::json::object();
    for (const auto& [h, v] : mpjpe_mm) {
      std::ostringstream key;
      key << h << "s";
      doc["mpjpe_mm"][key.str()] = v;
    }
    doc["vim_mm"] = nlohmann::json::object();
    for (const auto& [h, v] : vim_mm) doc["vim_mm"][std::to_string(h) + "ms"] = v;
    auto pairs = nlohmann::json::array();
    for (const auto& p : ppc) {
      auto joints = nlohmann::json::array();
      for (const auto& j : p.joints) joints.push_back(j ? nlohmann::json(*j) : nlohmann::json(nullptr));
      pairs.push_back({{"first", p.first}, {"second", p.second}, {"joints", std::move(joints)}});
    }
    doc["ppc"] = std::move(pairs);
    return doc;
  }

  /// Horizons as columns, metrics as rows.
  std::string to_table() const {
    std::ostringstream os;
    os << std::fixed << std::setprecision(1);
    os << std::left << std::setw(8) << "metric";
    for (const auto& [h, v] : mpjpe_mm) os << std::right << std::setw(10) << (std::to_string(static_cast<int>(h * 1000)) + "ms");
    os << "\n" << std::left << std::setw(8) << "MPJPE";
    for (const auto& [h, v] : mpjpe_mm) os << std::right << std::setw(10) << v;
    os << "\n\n" << std::left << std::setw(8) << "metric";
    for (const auto& [h, v] : vim_mm) os << std::right << std::setw(10) << (std::to_string(h) + "ms");
    os << "\n" << std::left << std::setw(8) << "VIM";
    for (const auto& [h, v] : vim_mm) os << std::right << std::setw(10) << v;
    os << "\n";
    return os.str();
  }
};

/// Metrics of one scene. PPC uses the predicted poses of every ordered pair.
template <class S>
MetricReport evaluate_prediction(const Matrix<S>& y_hat, const Matrix<S>& y, std::size_t persons, double fps) {
  MetricReport rep;
  rep.scenes = 1;
  rep.mpjpe_mm = mpjpe(y_hat, y, persons, fps);
  const std::size_t P = y.rows() / persons;
  for (int ms : kVimHorizonsMs) {
    const long k = std::lround(ms * fps / 1000.0);
    if (k >= 1 && static_cast<std::size_t>(k) <= P) rep.vim_mm[ms] = vim(y_hat, y, persons, fps, ms);
  }
  if (P >= 2) {
    std::vector<Matrix<double>> series;
    for (std::size_t n = 0; n < persons; ++n) series.push_back(root_distance_series(person_rows(y_hat, persons, n)));
    for (std::size_t n = 0; n < persons; ++n)
      for (std::size_t m = 0; m < persons; ++m)
        if (m != n) rep.ppc.push_back({n, m, ppc(series[n], series[m])});
  }
  return rep;
}

/// Scene-averaged report. PPC pairs are kept from the first scene only.
inline MetricReport average_reports(const std::vector<MetricReport>& reports) {
  if (reports.empty()) throw Error(ErrorKind::empty_dataset, "no scenes to aggregate");
  MetricReport out;
  std::map<double, std::size_t> mcount;
  std::map<int, std::size_t> vcount;
  for (const auto& r : reports) {
    for (const auto& [h, v] : r.mpjpe_mm) {
      out.mpjpe_mm[h] += v;
      ++mcount[h];
    }
    for (const auto& [h, v] : r.vim_mm) {
      out.vim_mm[h] += v;
      ++vcount[h];
    }
    out.scenes += r.scenes;
  }
  for (auto& [h, v] : out.mpjpe_mm) v /= static_cast<double>(mcount[h]);
  for (auto& [h, v] : out.vim_mm) v /= static_cast<double>(vcount[h]);
  out.ppc = reports.front().ppc;
  return out;
}

}  // namespace unitygraph
