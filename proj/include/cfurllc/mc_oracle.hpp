#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "cfurllc/fcbl_rate.hpp"
#include "cfurllc/model.hpp"
#include "cfurllc/types.hpp"

namespace cfurllc {

/// One fading realization. Complex values are stored as separate real and
/// imaginary arrays.
struct FadingDraw {
  int num_aps = 0;
  int num_devices = 0;
  int antennas = 0;
  int num_groups = 0;
  std::vector<double> h_re, h_im;          // small-scale fading, CN(0, 1) entries
  std::vector<double> noise_re, noise_im;  // pilot noise projected on each group's sequence

  std::size_t h_index(int m, int k, int n) const {
    return (static_cast<std::size_t>(m) * num_devices + k) * antennas + n;
  }
  std::size_t noise_index(int m, int g, int n) const {
    return (static_cast<std::size_t>(m) * num_groups + g) * antennas + n;
  }
};

FadingDraw make_draw(int num_aps, int num_devices, int antennas, int num_groups);
void redraw(FadingDraw& draw, std::mt19937_64& rng);

/// True channels g = sqrt(beta) h and their MMSE estimates, same layout as
/// FadingDraw::h_index.
struct ChannelEstimates {
  int num_aps = 0;
  int num_devices = 0;
  int antennas = 0;
  std::vector<double> g_re, g_im;
  std::vector<double> est_re, est_im;
};

ChannelEstimates estimate_channels(const FadingDraw& draw, const NetworkInstance& inst,
                                   int tau, const Eigen::VectorXd& pilot_powers,
                                   const PilotGroups& groups);

/// Per-sample effective-SINR ingredients for every device.
struct InterferenceSample {
  Eigen::VectorXd desired;  // analytic DS_k
  Eigen::VectorXd leakage;  // |LS_k|^2 (beamforming uncertainty)
  Eigen::MatrixXd inter;    // |UI_{k,k'}|^2, zero diagonal
};

InterferenceSample interference_sample(const ChannelEstimates& est, const NetworkInstance& inst,
                                       const PowerProfile& powers, const Eigen::MatrixXd& lambda);

/// gamma_k for one fading realization.
Eigen::VectorXd instantaneous_sinr(const ChannelEstimates& est, const NetworkInstance& inst,
                                   const PowerProfile& powers, const Eigen::MatrixXd& lambda);

struct McOptions {
  int chunk_size = 250;  // samples per derived seed
  int threads = 1;
};

struct McEstimate {
  Eigen::VectorXd mean;
  Eigen::VectorXd stderr_;
};

/// Ergodic FCBL rate per device, per-sample rate clamped at zero.
McEstimate ergodic_rate_mc(const NetworkInstance& inst, const PowerProfile& powers,
                           const QosSpec& qos, const PilotGroups& groups, int n_samples,
                           std::uint64_t seed, const McOptions& options = {});

struct TermMoments {
  Eigen::VectorXd leakage_mean, leakage_stderr;  // E|LS_k|^2
  Eigen::MatrixXd inter_mean, inter_stderr;      // E|UI_{k,k'}|^2
};

TermMoments term_moments_mc(const NetworkInstance& inst, const PowerProfile& powers, int tau,
                            const PilotGroups& groups, int n_samples, std::uint64_t seed,
                            const McOptions& options = {});

}  // namespace cfurllc
