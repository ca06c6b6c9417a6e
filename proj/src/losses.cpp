#include "s5/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace s5 {

namespace {

// d/dx of -10 log10(x) is -kDbPerNeper / x.
constexpr double kDbPerNeper = 10.0 / std::numbers::ln10;

void require_pairs(std::span<const AudioBuffer> refs, std::span<const AudioBuffer> ests) {
  if (refs.empty()) throw std::invalid_argument("need at least one source");
  if (refs.size() != ests.size()) {
    throw std::invalid_argument("reference/estimate count mismatch");
  }
  for (std::size_t m = 0; m < refs.size(); ++m) {
    require_compatible(refs[m], ests[m], "loss");
  }
}

double residual_energy(const AudioBuffer& ref, const AudioBuffer& est) {
  double acc = 0.0;
  auto s = ref.data();
  auto e = est.data();
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double d = s[k] - e[k];
    acc += d * d;
  }
  return acc;
}

void check_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw std::invalid_argument(std::string(what) + " must be finite");
  }
}

}  // namespace

LossValue sa_sdr_loss(std::span<const AudioBuffer> refs, std::span<const AudioBuffer> ests) {
  require_pairs(refs, ests);
  double num = 0.0, den = 0.0;
  for (std::size_t m = 0; m < refs.size(); ++m) {
    num += energy(refs[m]);
    den += residual_energy(refs[m], ests[m]);
  }
  if (num == 0.0) throw std::invalid_argument("sa_sdr_loss: all references silent");
  den += kLossEpsilon;

  LossValue out;
  out.value = -10.0 * std::log10(num / den);
  // dL/d est = kDbPerNeper * d(log den) = kDbPerNeper * (-2 (s - est)) / den
  const double scale = -2.0 * kDbPerNeper / den;
  for (std::size_t m = 0; m < refs.size(); ++m) {
    auto s = refs[m].data();
    auto e = ests[m].data();
    for (std::size_t k = 0; k < s.size(); ++k) out.gradient.push_back(scale * (s[k] - e[k]));
  }
  return out;
}

LossValue si_snr_loss(const AudioBuffer& ref, const AudioBuffer& est) {
  require_compatible(ref, est, "si_snr_loss");
  const double ref_energy = energy(ref);
  if (ref_energy == 0.0) throw std::invalid_argument("si_snr_loss: silent reference");
  const double alpha = dot(est, ref) / ref_energy;
  const double target = alpha * alpha * ref_energy;
  if (target == 0.0) {
    throw std::domain_error("si_snr_loss: estimate has no component along the reference");
  }
  auto n = ref.data();
  auto nh = est.data();
  std::vector<double> residual(n.size());
  double res = 0.0;
  for (std::size_t k = 0; k < n.size(); ++k) {
    residual[k] = nh[k] - alpha * n[k];
    res += residual[k] * residual[k];
  }
  const double den = res + kLossEpsilon * target;

  LossValue out;
  out.value = -10.0 * std::log10(target / den);
  // d target = 2 alpha n ; d res = 2 residual
  out.gradient.resize(n.size());
  for (std::size_t k = 0; k < n.size(); ++k) {
    const double dt = 2.0 * alpha * n[k];
    const double dd = 2.0 * residual[k] + kLossEpsilon * dt;
    out.gradient[k] = -kDbPerNeper * (dt / target - dd / den);
  }
  return out;
}

double uss_loss(double foreground, double interference, double noise, double lambda) {
  if (!std::isfinite(foreground) || !std::isfinite(interference) || !std::isfinite(noise) ||
      !std::isfinite(lambda)) {
    throw std::invalid_argument("uss_loss: inputs must be finite");
  }
  return foreground + lambda * (interference + noise);
}

LossValue kl_uniform_loss(std::span<const double> p) {
  if (p.size() < 2) throw std::invalid_argument("kl_uniform_loss: need at least 2 classes");
  check_finite(p, "probabilities");
  const double c = static_cast<double>(p.size());
  LossValue out;
  out.gradient.resize(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] < 0.0) throw std::invalid_argument("kl_uniform_loss: negative probability");
    if (p[k] == 0.0) {
      out.gradient[k] = -std::numeric_limits<double>::infinity();
      continue;
    }
    const double log_ratio = std::log(p[k] * c);
    out.value += p[k] * log_ratio;
    out.gradient[k] = log_ratio + 1.0;
  }
  return out;
}

LossValue arcface_loss(const EmbeddingGeometry& geom, ClassId label, double scale,
                       double margin) {
  const auto& f = geom.feature;
  const std::size_t classes = geom.centers.size();
  if (classes < 2) throw std::invalid_argument("arcface_loss: need at least 2 centers");
  if (label >= classes) throw std::invalid_argument("arcface_loss: label out of range");
  if (!std::isfinite(scale) || !std::isfinite(margin)) {
    throw std::invalid_argument("arcface_loss: scale and margin must be finite");
  }
  check_finite(f, "feature");
  double fnorm = 0.0;
  for (double x : f) fnorm += x * x;
  fnorm = std::sqrt(fnorm);
  if (fnorm == 0.0) throw std::invalid_argument("arcface_loss: zero feature");

  std::vector<double> cosines(classes);
  for (std::size_t k = 0; k < classes; ++k) {
    const auto& ck = geom.centers[k];
    if (ck.size() != f.size()) throw std::invalid_argument("arcface_loss: dimension mismatch");
    double d = 0.0, n2 = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      d += f[i] * ck[i];
      n2 += ck[i] * ck[i];
    }
    if (std::abs(std::sqrt(n2) - 1.0) > 1e-9) {
      throw std::invalid_argument("arcface_loss: class centers must be unit-norm");
    }
    cosines[k] = d / fnorm;
  }

  // Target logit with additive angular margin; clipped so arccos stays smooth.
  const double lo = -1.0 + kArcFaceCosClip;
  const double hi = 1.0 - kArcFaceCosClip;
  const double cos_y = std::clamp(cosines[label], lo, hi);
  const bool clipped = cos_y != cosines[label];
  const double theta = std::acos(cos_y);
  std::vector<double> logits(classes);
  for (std::size_t k = 0; k < classes; ++k) logits[k] = scale * cosines[k];
  logits[label] = scale * std::cos(theta + margin);

  const double top = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - top);
  LossValue out;
  out.value = top + std::log(sum) - logits[label];

  // dL/dz_k = softmax_k - [k == y]; chain through cos_k to the feature.
  std::vector<double> dcos(classes);
  for (std::size_t k = 0; k < classes; ++k) {
    const double dz = std::exp(logits[k] - top) / sum - (k == label ? 1.0 : 0.0);
    if (k == label) {
      dcos[k] = clipped ? 0.0 : dz * scale * std::sin(theta + margin) / std::sin(theta);
    } else {
      dcos[k] = dz * scale;
    }
  }
  out.gradient.assign(f.size(), 0.0);
  for (std::size_t k = 0; k < classes; ++k) {
    const auto& ck = geom.centers[k];
    for (std::size_t i = 0; i < f.size(); ++i) {
      // d cos_k / d f = (c_k - cos_k f_hat) / |f|
      out.gradient[i] += dcos[k] * (ck[i] - cosines[k] * f[i] / fnorm) / fnorm;
    }
  }
  return out;
}

double energy_score(std::span<const double> logits) {
  if (logits.empty()) throw std::invalid_argument("energy_score: empty logits");
  check_finite(logits, "logits");
  const double top = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double l : logits) sum += std::exp(l - top);
  return -(top + std::log(sum));
}

LossValue energy_hinge_loss(std::span<const double> in_scores, std::span<const double> out_scores,
                            double margin_in, double margin_out) {
  if (in_scores.empty() && out_scores.empty()) {
    throw std::invalid_argument("energy_hinge_loss: both score lists empty");
  }
  check_finite(in_scores, "energy scores");
  check_finite(out_scores, "energy scores");
  LossValue out;
  out.gradient.reserve(in_scores.size() + out_scores.size());
  if (!in_scores.empty()) {
    const double n = static_cast<double>(in_scores.size());
    double acc = 0.0;
    for (double e : in_scores) {
      const double h = std::max(0.0, e - margin_in);
      acc += h * h;
      out.gradient.push_back(2.0 * h / n);
    }
    out.value += acc / n;
  }
  if (!out_scores.empty()) {
    const double n = static_cast<double>(out_scores.size());
    double acc = 0.0;
    for (double e : out_scores) {
      const double h = std::max(0.0, margin_out - e);
      acc += h * h;
      out.gradient.push_back(-2.0 * h / n);
    }
    out.value += acc / n;
  }
  return out;
}

double sc_stage_loss(double arcface, double kl, double energy, int stage, double lambda_e) {
  if (!std::isfinite(arcface) || !std::isfinite(kl) || !std::isfinite(energy) ||
      !std::isfinite(lambda_e)) {
    throw std::invalid_argument("sc_stage_loss: inputs must be finite");
  }
  switch (stage) {
    case 1: return arcface + kl;
    case 2: return arcface + kl + lambda_e * energy;
    default: throw std::invalid_argument("sc_stage_loss: stage must be 1 or 2");
  }
}

LossValue masked_snr_loss(std::span<const AudioBuffer> refs, std::span<const AudioBuffer> ests,
                          const std::vector<bool>& active) {
  require_pairs(refs, ests);
  if (active.size() != refs.size()) {
    throw std::invalid_argument("masked_snr_loss: mask length differs from source count");
  }
  const auto n_active = static_cast<std::size_t>(std::count(active.begin(), active.end(), true));
  if (n_active == 0) throw std::invalid_argument("no active sources");

  LossValue out;
  const double weight = 1.0 / static_cast<double>(n_active);
  for (std::size_t m = 0; m < refs.size(); ++m) {
    auto s = refs[m].data();
    if (!active[m]) {
      out.gradient.insert(out.gradient.end(), s.size(), 0.0);
      continue;
    }
    const double num = energy(refs[m]);
    if (num == 0.0) throw std::invalid_argument("masked_snr_loss: active source is silent");
    const double den = residual_energy(refs[m], ests[m]) + kLossEpsilon;
    out.value -= weight * 10.0 * std::log10(num / den);
    auto e = ests[m].data();
    const double scale = -2.0 * weight * kDbPerNeper / den;
    for (std::size_t k = 0; k < s.size(); ++k) out.gradient.push_back(scale * (s[k] - e[k]));
  }
  return out;
}

}  // namespace s5
