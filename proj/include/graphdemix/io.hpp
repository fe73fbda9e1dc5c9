#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "graphdemix/core.hpp"
#include "graphdemix/model.hpp"
#include "graphdemix/solver.hpp"

namespace graphdemix {

using Json = nlohmann::json;

inline Json rvec_to_json(const RVec& v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline RVec rvec_from_json(const Json& j) {
  if (!j.is_array()) throw parse_error("expected a real array");
  RVec v(static_cast<Index>(j.size()));
  for (Index i = 0; i < v.size(); ++i)
    v(i) = j[static_cast<std::size_t>(i)].get<double>();
  return v;
}

/// Complex values serialize as [re, im] pairs.
inline Json cvec_to_json(const CVec& v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i)
    a.push_back(Json::array({v(i).real(), v(i).imag()}));
  return a;
}

inline CVec cvec_from_json(const Json& j) {
  if (!j.is_array()) throw parse_error("expected a complex array");
  CVec v(static_cast<Index>(j.size()));
  for (Index i = 0; i < v.size(); ++i) {
    const auto& p = j[static_cast<std::size_t>(i)];
    if (!p.is_array() || p.size() != 2)
      throw parse_error("complex entries must be [re, im] pairs");
    v(i) = Complex(p[0].get<double>(), p[1].get<double>());
  }
  return v;
}

/// Matrices carry their shape; data is column-major [re, im] pairs.
inline Json cmat_to_json(const CMat& m) {
  Json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  j["data"] = cvec_to_json(Eigen::Map<const CVec>(m.data(), m.size()));
  return j;
}

inline CMat cmat_from_json(const Json& j) {
  if (!j.contains("rows") || !j.contains("cols") || !j.contains("data"))
    throw parse_error("matrix document needs rows/cols/data");
  const Index rows = j["rows"].get<Index>();
  const Index cols = j["cols"].get<Index>();
  const CVec flat = cvec_from_json(j["data"]);
  if (flat.size() != rows * cols)
    throw parse_error("matrix data length disagrees with rows*cols");
  return Eigen::Map<const CMat>(flat.data(), rows, cols);
}

inline Json basis_to_json(const SpectralBasis& b) {
  Json j;
  j["n"] = b.n;
  j["l"] = b.l;
  j["eigvals"] = cvec_to_json(b.eigvals);
  j["v"] = cmat_to_json(b.v);
  j["psi_raw"] = cmat_to_json(b.psi_raw);
  j["psi"] = cmat_to_json(b.psi);
  j["tap_transform"] = cmat_to_json(b.tap_transform);
  j["distinct_eigvals"] = b.distinct_eigvals;
  j["min_eig_gap"] = b.min_eig_gap;
  j["tap_transform_invertible"] = b.tap_transform_invertible;
  return j;
}

inline SpectralBasis basis_from_json(const Json& j) {
  SpectralBasis b;
  b.n = j.at("n").get<Index>();
  b.l = j.at("l").get<Index>();
  b.eigvals = cvec_from_json(j.at("eigvals"));
  b.v = cmat_from_json(j.at("v"));
  b.u = b.v.adjoint();
  b.psi_raw = cmat_from_json(j.at("psi_raw"));
  b.psi = cmat_from_json(j.at("psi"));
  b.tap_transform = cmat_from_json(j.at("tap_transform"));
  b.distinct_eigvals = j.at("distinct_eigvals").get<bool>();
  b.min_eig_gap = j.at("min_eig_gap").get<double>();
  b.tap_transform_invertible = j.at("tap_transform_invertible").get<bool>();
  if (b.eigvals.size() != b.n || b.v.rows() != b.n || b.v.cols() != b.n ||
      b.psi_raw.rows() != b.n || b.psi_raw.cols() != b.l ||
      b.psi.rows() != b.n || b.psi.cols() != b.l ||
      b.tap_transform.rows() != b.l || b.tap_transform.cols() != b.l)
    throw parse_error("basis document has inconsistent shapes");
  return b;
}

inline Json ground_truth_to_json(const GroundTruth& gt) {
  Json j;
  j["schema"] = 1;
  j["xs"] = Json::array();
  j["hs"] = Json::array();
  j["supports"] = Json::array();
  for (const auto& x : gt.xs) j["xs"].push_back(rvec_to_json(x));
  for (const auto& h : gt.hs) j["hs"].push_back(rvec_to_json(h));
  for (const auto& s : gt.supports) j["supports"].push_back(s);
  return j;
}

inline GroundTruth ground_truth_from_json(const Json& j) {
  GroundTruth gt;
  for (const auto& x : j.at("xs")) gt.xs.push_back(rvec_from_json(x));
  for (const auto& h : j.at("hs")) gt.hs.push_back(rvec_from_json(h));
  for (const auto& s : j.at("supports"))
    gt.supports.push_back(s.get<std::vector<Index>>());
  if (gt.xs.size() != gt.hs.size() || gt.xs.size() != gt.supports.size())
    throw parse_error("ground truth document has inconsistent source counts");
  return gt;
}

/// Serializes the full instance; aliased bases are stored once in a pool and
/// referenced per source, so single-graph structure survives the round trip.
inline Json problem_to_json(const DemixProblem& p) {
  Json j;
  j["schema"] = 1;
  std::vector<const SpectralBasis*> pool;
  std::vector<std::size_t> refs;
  for (const auto& bp : p.bases) {
    std::size_t idx = pool.size();
    for (std::size_t k = 0; k < pool.size(); ++k)
      if (pool[k] == bp.get()) {
        idx = k;
        break;
      }
    if (idx == pool.size()) pool.push_back(bp.get());
    refs.push_back(idx);
  }
  j["basis_pool"] = Json::array();
  for (const auto* b : pool) j["basis_pool"].push_back(basis_to_json(*b));
  j["basis_ref"] = refs;
  j["y"] = cvec_to_json(p.y);
  if (p.mask) j["mask"] = *p.mask;
  j["noise_sigma"] = p.noise_sigma;
  j["as2_mode"] = p.as2_mode;
  j["as2_rows"] = p.as2_rows;
  j["seed"] = p.seed;
  j["known_entries"] = Json::array();
  for (const auto& ke : p.known_entries) {
    Json e;
    e["source"] = ke.source;
    e["entries"] = Json::array();
    for (const auto& [node, value] : ke.entries)
      e["entries"].push_back(Json::array({node, value}));
    j["known_entries"].push_back(e);
  }
  return j;
}

inline DemixProblem problem_from_json(const Json& j) {
  if (j.value("schema", 0) != 1)
    throw parse_error("problem document has unsupported schema");
  DemixProblem p;
  std::vector<std::shared_ptr<const SpectralBasis>> pool;
  for (const auto& bj : j.at("basis_pool"))
    pool.push_back(std::make_shared<SpectralBasis>(basis_from_json(bj)));
  for (const auto& r : j.at("basis_ref")) {
    const std::size_t idx = r.get<std::size_t>();
    if (idx >= pool.size())
      throw parse_error("basis_ref index out of range");
    p.bases.push_back(pool[idx]);
  }
  p.y = cvec_from_json(j.at("y"));
  if (j.contains("mask")) p.mask = j["mask"].get<std::vector<Index>>();
  p.noise_sigma = j.at("noise_sigma").get<double>();
  p.as2_mode = j.at("as2_mode").get<bool>();
  p.as2_rows = j.at("as2_rows").get<std::vector<std::vector<Index>>>();
  p.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& e : j.value("known_entries", Json::array())) {
    KnownEntries ke;
    ke.source = e.at("source").get<Index>();
    for (const auto& pr : e.at("entries"))
      ke.entries.emplace_back(pr[0].get<Index>(), pr[1].get<double>());
    p.known_entries.push_back(std::move(ke));
  }
  return p;
}

/// Solver diagnostics as a JSON record (factors omitted, they live in the
/// solution object).
inline Json diagnostics_to_json(const LiftedSolution& s) {
  Json j;
  j["objective"] = s.objective;
  j["primal_residual"] = s.primal_residual;
  j["dual_residual"] = s.dual_residual;
  j["iterations"] = s.iterations;
  j["converged"] = s.converged;
  j["feasibility"] = s.feasibility;
  j["numeric_warning"] = s.numeric_warning;
  j["refined"] = s.refined;
  if (!s.objective_trace.empty()) j["objective_trace"] = s.objective_trace;
  if (!s.surrogate_trace.empty()) j["surrogate_trace"] = s.surrogate_trace;
  return j;
}

}  // namespace graphdemix
