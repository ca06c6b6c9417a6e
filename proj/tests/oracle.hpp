#pragma once

// Reference computations for tests. Nothing here calls into the library:
// values are derived from plain vectors, in 200-bit floating point where the
// library result is compared to tight tolerances.

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include <boost/multiprecision/cpp_bin_float.hpp>

namespace oracle {

using Big = boost::multiprecision::number<boost::multiprecision::cpp_bin_float<200>>;
using Vec = std::vector<double>;

inline Big sq_norm(const Vec& a) {
  Big s = 0;
  for (double x : a) s += Big(x) * Big(x);
  return s;
}

inline Big sq_dist(const Vec& a, const Vec& b) {
  Big s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    Big d = Big(a[i]) - Big(b[i]);
    s += d * d;
  }
  return s;
}

inline Big log10(const Big& x) { return boost::multiprecision::log(x) / boost::multiprecision::log(Big(10)); }

inline double energy_score(const Vec& logits) {
  Big s = 0;
  for (double l : logits) s += boost::multiprecision::exp(Big(l));
  return static_cast<double>(-boost::multiprecision::log(s));
}

inline double sa_sdr(const std::vector<Vec>& refs, const std::vector<Vec>& ests, double eps) {
  Big num = 0, den = 0;
  for (std::size_t m = 0; m < refs.size(); ++m) {
    num += sq_norm(refs[m]);
    den += sq_dist(refs[m], ests[m]);
  }
  return static_cast<double>(-10 * log10(num / (den + Big(eps))));
}

inline double kl_uniform(const Vec& p) {
  Big s = 0;
  const Big c = Big(p.size());
  for (double x : p) {
    if (x > 0) s += Big(x) * boost::multiprecision::log(Big(x) * c);
  }
  return static_cast<double>(s);
}

inline double arcface(const Vec& feature, const std::vector<Vec>& centers, std::size_t y,
                      double s, double m) {
  const Big fn = boost::multiprecision::sqrt(sq_norm(feature));
  std::vector<Big> cos(centers.size());
  for (std::size_t k = 0; k < centers.size(); ++k) {
    Big d = 0;
    for (std::size_t i = 0; i < feature.size(); ++i) d += Big(feature[i]) * Big(centers[k][i]);
    cos[k] = d / fn;
  }
  const Big lim = Big(1) - Big(1e-7);
  Big cy = cos[y];
  if (cy > lim) cy = lim;
  if (cy < -lim) cy = -lim;
  const Big target = Big(s) * boost::multiprecision::cos(boost::multiprecision::acos(cy) + Big(m));
  Big den = boost::multiprecision::exp(target);
  for (std::size_t k = 0; k < centers.size(); ++k) {
    if (k != y) den += boost::multiprecision::exp(Big(s) * cos[k]);
  }
  return static_cast<double>(boost::multiprecision::log(den) - target);
}

// Class-aware SDR improvement computed directly from its definition.
struct Slot {
  Vec wave;
  std::optional<std::size_t> label;
};

inline double clamp60(double v) { return std::clamp(v, -60.0, 60.0); }

inline double plain_sdr(const Vec& ref, const Vec& est) {
  long double num = 0, den = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    num += static_cast<long double>(ref[i]) * ref[i];
    const long double d = static_cast<long double>(ref[i]) - est[i];
    den += d * d;
  }
  if (den == 0) return 60.0;
  if (num == 0) return -60.0;
  return clamp60(static_cast<double>(10.0L * std::log10(num / den)));
}

inline double ca_sdri(const std::map<std::size_t, Vec>& truth, const std::vector<Slot>& pred,
                      const Vec& mixture) {
  std::set<std::size_t> uni;
  for (const auto& [k, _] : truth) uni.insert(k);
  for (const auto& s : pred) {
    if (s.label) uni.insert(*s.label);
  }
  if (uni.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t k : uni) {
    const auto t = truth.find(k);
    const Slot* hit = nullptr;
    for (const auto& s : pred) {
      if (s.label == k) hit = &s;
    }
    if (t == truth.end() || hit == nullptr) continue;
    total += plain_sdr(t->second, hit->wave) - plain_sdr(t->second, mixture);
  }
  return total / static_cast<double>(uni.size());
}

inline double acc_mix(const std::vector<std::set<std::size_t>>& truth,
                      const std::vector<std::set<std::size_t>>& pred) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += truth[i] == pred[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

// Tracks compared as multisets of labels (SILENCE = nullopt): the number of
// correctly labeled tracks is the size of the multiset intersection.
inline double acc_src(const std::vector<std::vector<std::optional<std::size_t>>>& truth,
                      const std::vector<std::vector<std::optional<std::size_t>>>& pred) {
  std::size_t hits = 0, total = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    std::vector<bool> used(truth[i].size(), false);
    for (const auto& p : pred[i]) {
      for (std::size_t j = 0; j < truth[i].size(); ++j) {
        if (!used[j] && truth[i][j] == p) {
          used[j] = true;
          ++hits;
          break;
        }
      }
    }
    total += truth[i].size();
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

// Balanced accuracy of "energy > t => silent", by enumeration.
inline double balanced(const Vec& energies, const std::vector<bool>& silent, double t) {
  std::size_t tp = 0, ns = 0, tn = 0, na = 0;
  for (std::size_t i = 0; i < energies.size(); ++i) {
    if (silent[i]) {
      ++ns;
      tp += energies[i] > t;
    } else {
      ++na;
      tn += !(energies[i] > t);
    }
  }
  double sum = 0;
  int kinds = 0;
  if (ns) sum += static_cast<double>(tp) / ns, ++kinds;
  if (na) sum += static_cast<double>(tn) / na, ++kinds;
  return sum / kinds;
}

// Best balanced accuracy over every distinct decision a scalar threshold can
// make: one threshold at each observed energy, plus one below all of them.
inline double best_balanced(const Vec& energies, const std::vector<bool>& silent) {
  double best = balanced(energies, silent, *std::min_element(energies.begin(), energies.end()) - 1);
  for (double e : energies) best = std::max(best, balanced(energies, silent, e));
  return best;
}

}  // namespace oracle
