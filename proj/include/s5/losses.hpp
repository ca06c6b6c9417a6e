#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "s5/audio.hpp"
#include "s5/manifest.hpp"

namespace s5 {

using LogitVector = std::vector<double>;

/// Loss value plus gradient w.r.t. the trainable argument (estimates, feature,
/// probabilities, or energy scores). Multi-buffer gradients are flattened in
/// argument order, each buffer channel-major.
struct LossValue {
  double value = 0.0;
  std::vector<double> gradient;
};

inline constexpr double kLossEpsilon = 1e-12;
inline constexpr double kUssLambda = 0.01;
inline constexpr double kArcFaceScale = 32.0;
inline constexpr double kArcFaceMargin = 0.5;
inline constexpr double kArcFaceCosClip = 1e-7;
inline constexpr double kEnergyMarginIn = -6.0;
inline constexpr double kEnergyMarginOut = -1.0;
inline constexpr double kEnergyWeight = 0.001;

/// Negative source-aggregated SDR:
///   -10 log10( sum |s_m|^2 / (sum |s_m - s_hat_m|^2 + eps) ).
LossValue sa_sdr_loss(std::span<const AudioBuffer> refs, std::span<const AudioBuffer> ests);

/// Negative SI-SNR. The estimate is projected onto the reference
/// (alpha = <est, ref> / |ref|^2). The floor is relative: the residual energy
/// is incremented by eps * |alpha ref|^2, so the loss is exactly invariant
/// to rescaling the estimate.
LossValue si_snr_loss(const AudioBuffer& ref, const AudioBuffer& est);

/// L_F + lambda (L_I + L_N).
double uss_loss(double foreground, double interference, double noise,
                double lambda = kUssLambda);

/// KL(p || uniform) with natural log and 0 log 0 = 0. Gradient entries are
/// log(C p_k) + 1 (minus infinity where p_k = 0). p is not renormalized.
LossValue kl_uniform_loss(std::span<const double> p);

/// Feature and class centers for the angular-margin loss. Centers must be
/// unit-norm; the feature is normalized internally so the loss is defined
/// (and differentiable) for any nonzero feature.
struct EmbeddingGeometry {
  std::vector<double> feature;
  std::vector<std::vector<double>> centers;
};

/// Additive angular margin (ArcFace) softmax loss; gradient w.r.t. feature.
LossValue arcface_loss(const EmbeddingGeometry& geom, ClassId label,
                       double scale = kArcFaceScale, double margin = kArcFaceMargin);

/// -log sum_k exp(l_k), via max-shifted log-sum-exp.
double energy_score(std::span<const double> logits);

/// mean_in max(0, E - m_in)^2 + mean_out max(0, m_out - E)^2. Gradient is
/// w.r.t. the scores, in-scores first. An empty list contributes 0.
LossValue energy_hinge_loss(std::span<const double> in_scores,
                            std::span<const double> out_scores,
                            double margin_in = kEnergyMarginIn,
                            double margin_out = kEnergyMarginOut);

/// Stage 1: arcface + kl. Stage 2: arcface + kl + lambda_e * energy.
double sc_stage_loss(double arcface, double kl, double energy, int stage,
                     double lambda_e = kEnergyWeight);

/// Mean negative SNR over active sources only; inactive estimates get a zero
/// gradient and never influence the value.
LossValue masked_snr_loss(std::span<const AudioBuffer> refs, std::span<const AudioBuffer> ests,
                          const std::vector<bool>& active);

/// Evaluates one serialized case, e.g. {"loss": "si_snr", "ref": [...],
/// "est": [...]}, and returns {"loss", "value", "gradient"} as JSON text.
/// Buffers are mono sample arrays.
std::string evaluate_loss_case(const std::string& case_json);

}  // namespace s5
