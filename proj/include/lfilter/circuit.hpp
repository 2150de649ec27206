#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "lfilter/filter.hpp"
#include "lfilter/pauli.hpp"
#include "lfilter/schedule.hpp"

namespace lfilter {

/// Pauli-string expansion of the parent Hamiltonian split into its three
/// parts: the projector sum, the commutator (linear in 1/delta) and the
/// sandwich (quadratic in 1/delta). All coefficients are real.
struct TermDecomposition {
  int n_sites = 0;
  FilterParams params;
  std::vector<PauliString> part1;  // sum_i P_i
  std::vector<PauliString> part2;  // -(i/delta) [H, sum_i P_i]
  std::vector<PauliString> part3;  // (H-E)(sum_i P_i)(H-E) / delta^2
  int max_h_width = 0;        // w: widest interaction window of H
  int max_terms_per_site = 0; // v: most H terms touching one site

  std::vector<PauliString> all() const {
    std::vector<PauliString> out;
    out.reserve(part1.size() + part2.size() + part3.size());
    out.insert(out.end(), part1.begin(), part1.end());
    out.insert(out.end(), part2.begin(), part2.end());
    out.insert(out.end(), part3.begin(), part3.end());
    return out;
  }
};

namespace detail {

class TermAccumulator {
 public:
  explicit TermAccumulator(int n) : n_(n) {}

  void add(const PauliString& s) {
    auto [it, inserted] = index_.try_emplace(s.packed_factors(), coeffs_.size());
    if (inserted) {
      keys_.push_back(s.packed_factors());
      coeffs_.push_back(s.coeff);
    } else {
      coeffs_[it->second] += s.coeff;
    }
  }

  /// Finalize: drop tiny coefficients (relative to `global_max`), demand real
  /// coefficients, sort canonically by support then label.
  std::vector<PauliString> finish(double global_max, double prune_rel) const {
    std::vector<PauliString> out;
    for (std::size_t i = 0; i < keys_.size(); ++i) {
      const Complex c = coeffs_[i];
      if (std::abs(c) <= prune_rel * global_max) continue;
      if (std::abs(c.imag()) > 1e-9 * std::max(1.0, std::abs(c.real())))
        throw std::runtime_error("decompose_parent: non-real coefficient in expansion");
      out.push_back(PauliString::from_packed(n_, keys_[i], Complex(c.real(), 0.0)));
    }
    std::sort(out.begin(), out.end(), [](const PauliString& a, const PauliString& b) {
      const auto ma = a.support_mask(), mb = b.support_mask();
      const int la = ma ? std::countr_zero(ma) : a.n_sites;
      const int lb = mb ? std::countr_zero(mb) : b.n_sites;
      if (la != lb) return la < lb;
      if (a.weight() != b.weight()) return a.weight() > b.weight();
      return a.packed_factors() < b.packed_factors();
    });
    return out;
  }

  double max_abs() const {
    double m = 0.0;
    for (const Complex& c : coeffs_) m = std::max(m, std::abs(c));
    return m;
  }

 private:
  int n_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
  std::vector<std::uint64_t> keys_;
  std::vector<Complex> coeffs_;
};

inline int string_width(const PauliString& s) {
  int lo = s.n_sites, hi = -1;
  for (int i = 0; i < s.n_sites; ++i)
    if (s.factor(i) != Pauli::I) {
      lo = std::min(lo, i);
      hi = std::max(hi, i);
    }
  return hi < lo ? 0 : hi - lo + 1;
}

}  // namespace detail

/// Symbolic expansion of the parent Hamiltonian into Pauli strings with
/// like-term collection. The three parts summed reproduce F^dag (sum P_i) F
/// exactly (up to the pruning threshold).
inline TermDecomposition decompose_parent(std::span<const PauliString> h_terms,
                                          std::span<const PauliString> projector_terms,
                                          const FilterParams& fp, double prune_rel = 1e-12) {
  if (h_terms.empty() || projector_terms.empty())
    throw std::invalid_argument("decompose_parent: empty term list");
  const int n = h_terms.front().n_sites;
  const double a = fp.delta_inv;

  TermDecomposition dec;
  dec.n_sites = n;
  dec.params = fp;

  // H - E_F as a collected string list
  std::vector<PauliString> hbar(h_terms.begin(), h_terms.end());
  if (fp.e_f != 0.0) hbar.push_back(PauliString::identity(n, -fp.e_f));
  hbar = detail::collect_terms(hbar, n);

  detail::TermAccumulator acc1(n), acc2(n), acc3(n);
  for (const auto& p : projector_terms) acc1.add(p);

  if (a != 0.0) {
    for (const auto& p : projector_terms) {
      for (const auto& h : hbar) {
        if ((p.support_mask() & h.support_mask()) == 0) continue;  // commuting: no term
        // i [P, Hbar] = i (P Hbar - Hbar P)
        PauliString ph = product(p, h);
        PauliString hp = product(h, p);
        ph.coeff *= Complex(0.0, a);
        hp.coeff *= Complex(0.0, -a);
        acc2.add(ph);
        acc2.add(hp);
      }
    }
    for (const auto& ha : hbar) {
      for (const auto& p : projector_terms) {
        const PauliString hp = product(ha, p);
        for (const auto& hb : hbar) {
          PauliString s = product(hp, hb);
          s.coeff *= a * a;
          acc3.add(s);
        }
      }
    }
  }

  const double global_max = std::max({acc1.max_abs(), acc2.max_abs(), acc3.max_abs()});
  dec.part1 = acc1.finish(global_max, prune_rel);
  dec.part2 = acc2.finish(global_max, prune_rel);
  dec.part3 = acc3.finish(global_max, prune_rel);

  for (const auto& h : h_terms) dec.max_h_width = std::max(dec.max_h_width, detail::string_width(h));
  std::vector<int> per_site(static_cast<std::size_t>(n), 0);
  for (const auto& h : h_terms)
    for (int i = 0; i < n; ++i)
      if (h.factor(i) != Pauli::I) ++per_site[static_cast<std::size_t>(i)];
  for (int c : per_site) dec.max_terms_per_site = std::max(dec.max_terms_per_site, c);
  return dec;
}

inline TermDecomposition decompose_parent(const std::vector<PauliString>& h_terms,
                                          const std::vector<PauliString>& projector_terms,
                                          const FilterParams& fp, double prune_rel = 1e-12) {
  return decompose_parent(std::span<const PauliString>(h_terms),
                          std::span<const PauliString>(projector_terms), fp, prune_rel);
}

/// One layer of simultaneously executable rotations: supports are pairwise
/// disjoint. Angles are coefficient * tau.
struct CircuitLayer {
  struct Rotation {
    PauliString axis;  // unit-coefficient string
    double angle = 0.0;
  };
  std::vector<Rotation> rotations;
  std::uint32_t occupied = 0;
};

/// Greedy first-fit packing of the decomposition into disjoint-support
/// layers, ordered by leftmost support site with wider strings first.
/// Identity strings carry no gate (a global phase) and are skipped.
inline std::vector<CircuitLayer> schedule_layers(const TermDecomposition& dec, double tau) {
  std::vector<PauliString> strings = dec.all();
  std::stable_sort(strings.begin(), strings.end(),
                   [](const PauliString& x, const PauliString& y) {
                     const auto mx = x.support_mask(), my = y.support_mask();
                     const int lx = mx ? std::countr_zero(mx) : x.n_sites;
                     const int ly = my ? std::countr_zero(my) : y.n_sites;
                     if (lx != ly) return lx < ly;
                     if (x.weight() != y.weight()) return x.weight() > y.weight();
                     return x.packed_factors() < y.packed_factors();
                   });

  std::vector<CircuitLayer> layers;
  for (const auto& s : strings) {
    const std::uint32_t mask = s.support_mask();
    if (mask == 0) continue;
    bool placed = false;
    for (auto& layer : layers) {
      if ((layer.occupied & mask) == 0) {
        PauliString axis = s;
        axis.coeff = Complex(1.0, 0.0);
        layer.rotations.push_back({std::move(axis), s.coeff.real() * tau});
        layer.occupied |= mask;
        placed = true;
        break;
      }
    }
    if (!placed) {
      CircuitLayer layer;
      PauliString axis = s;
      axis.coeff = Complex(1.0, 0.0);
      layer.rotations.push_back({std::move(axis), s.coeff.real() * tau});
      layer.occupied = mask;
      layers.push_back(std::move(layer));
    }
  }
  return layers;
}

struct DepthReport {
  long per_step_depth = 0;
  long total_depth = 0;
};

inline DepthReport depth_report(const ScheduleSpec& sched, const TermDecomposition& dec) {
  const auto layers = schedule_layers(dec, sched.tau);
  DepthReport rep;
  rep.per_step_depth = static_cast<long>(layers.size());
  rep.total_depth = rep.per_step_depth * sched.steps();
  return rep;
}

/// Line-oriented circuit text: one rotation per line
///   ROT <angle> <site>:<symbol> [<site>:<symbol> ...]
/// with a blank line between layers. Angles use 17 significant digits and
/// round-trip bit-exactly through parse_circuit.
inline void export_circuit(const std::vector<CircuitLayer>& layers,
                           const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("export_circuit: cannot open " + path.string());
  bool first_layer = true;
  for (const auto& layer : layers) {
    if (!first_layer) out << "\n";
    first_layer = false;
    for (const auto& rot : layer.rotations) {
      char buf[40];
      std::snprintf(buf, sizeof(buf), "%.17g", rot.angle);
      out << "ROT " << buf;
      for (int i = 0; i < rot.axis.n_sites; ++i)
        if (rot.axis.factor(i) != Pauli::I)
          out << ' ' << i << ':' << pauli_char(rot.axis.factor(i));
      out << "\n";
    }
  }
  if (!out) throw std::runtime_error("export_circuit: write failure on " + path.string());
}

inline std::vector<CircuitLayer> parse_circuit(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("parse_circuit: cannot open " + path.string());

  // two passes over the parsed pairs: first find the site count
  struct RawRot {
    double angle;
    std::vector<std::pair<int, Pauli>> ops;
  };
  std::vector<std::vector<RawRot>> raw_layers(1);
  int max_site = -1;

  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) {
      if (!raw_layers.back().empty()) raw_layers.emplace_back();
      continue;
    }
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag != "ROT") throw std::runtime_error("parse_circuit: malformed line '" + line + "'");
    RawRot rot;
    if (!(ls >> rot.angle)) throw std::runtime_error("parse_circuit: missing angle in '" + line + "'");
    std::string pair;
    while (ls >> pair) {
      const auto colon = pair.find(':');
      if (colon == std::string::npos || colon + 2 != pair.size())
        throw std::runtime_error("parse_circuit: malformed pair '" + pair + "'");
      const int site = std::stoi(pair.substr(0, colon));
      rot.ops.emplace_back(site, pauli_from_char(pair[colon + 1]));
      max_site = std::max(max_site, site);
    }
    if (rot.ops.empty()) throw std::runtime_error("parse_circuit: rotation without support");
    raw_layers.back().push_back(std::move(rot));
  }
  if (raw_layers.back().empty()) raw_layers.pop_back();
  if (raw_layers.empty()) return {};

  const int n = max_site + 1;
  std::vector<CircuitLayer> layers;
  for (const auto& rl : raw_layers) {
    CircuitLayer layer;
    for (const auto& rot : rl) {
      PauliString axis(n);
      for (const auto& [site, p] : rot.ops) axis.set_factor(site, p);
      layer.occupied |= axis.support_mask();
      layer.rotations.push_back({std::move(axis), rot.angle});
    }
    layers.push_back(std::move(layer));
  }
  return layers;
}

}  // namespace lfilter
