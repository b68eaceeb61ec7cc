#include "cfurllc/mc_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <thread>

#include "cfurllc/rng.hpp"

namespace cfurllc {

FadingDraw make_draw(int num_aps, int num_devices, int antennas, int num_groups) {
  FadingDraw d;
  d.num_aps = num_aps;
  d.num_devices = num_devices;
  d.antennas = antennas;
  d.num_groups = num_groups;
  const auto nh = static_cast<std::size_t>(num_aps) * num_devices * antennas;
  const auto nw = static_cast<std::size_t>(num_aps) * num_groups * antennas;
  d.h_re.assign(nh, 0.0);
  d.h_im.assign(nh, 0.0);
  d.noise_re.assign(nw, 0.0);
  d.noise_im.assign(nw, 0.0);
  return d;
}

void redraw(FadingDraw& draw, std::mt19937_64& rng) {
  std::normal_distribution<double> half(0.0, std::sqrt(0.5));
  for (std::size_t i = 0; i < draw.h_re.size(); ++i) {
    draw.h_re[i] = half(rng);
    draw.h_im[i] = half(rng);
  }
  for (std::size_t i = 0; i < draw.noise_re.size(); ++i) {
    draw.noise_re[i] = half(rng);
    draw.noise_im[i] = half(rng);
  }
}

ChannelEstimates estimate_channels(const FadingDraw& draw, const NetworkInstance& inst,
                                   int tau, const Eigen::VectorXd& pilot_powers,
                                   const PilotGroups& groups) {
  const int M = inst.num_aps(), K = inst.num_devices(), N = inst.antennas;
  ChannelEstimates est;
  est.num_aps = M;
  est.num_devices = K;
  est.antennas = N;
  const std::size_t total = draw.h_re.size();
  est.g_re.resize(total);
  est.g_im.resize(total);
  est.est_re.assign(total, 0.0);
  est.est_im.assign(total, 0.0);
  for (int m = 0; m < M; ++m) {
    for (int k = 0; k < K; ++k) {
      const double s = std::sqrt(inst.beta(m, k));
      for (int n = 0; n < N; ++n) {
        const auto i = draw.h_index(m, k, n);
        est.g_re[i] = s * draw.h_re[i];
        est.g_im[i] = s * draw.h_im[i];
      }
    }
  }

  std::vector<double> y_re(static_cast<std::size_t>(N)), y_im(static_cast<std::size_t>(N));
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const auto& group = groups[gi];
    for (int m = 0; m < M; ++m) {
      // Received pilot projected on the group's sequence.
      double load = 1.0;
      for (int n = 0; n < N; ++n) {
        const auto w = draw.noise_index(m, static_cast<int>(gi), n);
        y_re[static_cast<std::size_t>(n)] = draw.noise_re[w];
        y_im[static_cast<std::size_t>(n)] = draw.noise_im[w];
      }
      for (int i : group) {
        const double a = std::sqrt(tau * pilot_powers(i));
        load += tau * pilot_powers(i) * inst.beta(m, i);
        for (int n = 0; n < N; ++n) {
          const auto h = draw.h_index(m, i, n);
          y_re[static_cast<std::size_t>(n)] += a * est.g_re[h];
          y_im[static_cast<std::size_t>(n)] += a * est.g_im[h];
        }
      }
      for (int k : group) {
        const double c = std::sqrt(tau * pilot_powers(k)) * inst.beta(m, k) / load;
        for (int n = 0; n < N; ++n) {
          const auto h = draw.h_index(m, k, n);
          est.est_re[h] = c * y_re[static_cast<std::size_t>(n)];
          est.est_im[h] = c * y_im[static_cast<std::size_t>(n)];
        }
      }
    }
  }
  return est;
}

InterferenceSample interference_sample(const ChannelEstimates& est, const NetworkInstance& inst,
                                       const PowerProfile& powers, const Eigen::MatrixXd& lambda) {
  const int K = inst.num_devices(), N = inst.antennas;
  const auto& pd = powers.downlink;
  InterferenceSample s;
  s.desired = Eigen::VectorXd::Zero(K);
  s.leakage = Eigen::VectorXd::Zero(K);
  s.inter = Eigen::MatrixXd::Zero(K, K);
  auto index = [&](int m, int k, int n) {
    return (static_cast<std::size_t>(m) * K + k) * N + n;
  };

  for (int kp = 0; kp < K; ++kp) {
    for (int k = 0; k < K; ++k) {
      // sum_{m in M_k'} sqrt(p_{m,k'}) g_{m,k}^H a_{m,k'}
      double re = 0.0, im = 0.0, mean = 0.0;
      for (int m : inst.serving_aps[static_cast<std::size_t>(kp)]) {
        const double p = pd(m, kp);
        const double lam = lambda(m, kp);
        if (p <= 0.0 || lam <= 0.0) continue;
        const double scale = std::sqrt(p / (N * lam));
        double dr = 0.0, di = 0.0;
        for (int n = 0; n < N; ++n) {
          const auto a = index(m, k, n);
          const auto b = index(m, kp, n);
          // conj(g) * est
          dr += est.g_re[a] * est.est_re[b] + est.g_im[a] * est.est_im[b];
          di += est.g_re[a] * est.est_im[b] - est.g_im[a] * est.est_re[b];
        }
        re += scale * dr;
        im += scale * di;
        if (k == kp) mean += std::sqrt(p * N * lam);
      }
      if (k == kp) {
        s.desired(k) = mean;
        s.leakage(k) = (re - mean) * (re - mean) + im * im;
      } else {
        s.inter(k, kp) = re * re + im * im;
      }
    }
  }
  return s;
}

Eigen::VectorXd instantaneous_sinr(const ChannelEstimates& est, const NetworkInstance& inst,
                                   const PowerProfile& powers, const Eigen::MatrixXd& lambda) {
  const auto s = interference_sample(est, inst, powers, lambda);
  const Eigen::VectorXd denom = s.leakage + s.inter.rowwise().sum() + Eigen::VectorXd::Ones(s.leakage.size());
  return s.desired.array().square() / denom.array();
}

namespace {

struct Accumulator {
  Eigen::ArrayXd sum, sumsq;
  void init(Eigen::Index n) {
    sum = Eigen::ArrayXd::Zero(n);
    sumsq = Eigen::ArrayXd::Zero(n);
  }
  void add(const Eigen::ArrayXd& v) {
    sum += v;
    sumsq += v.square();
  }
  void merge(const Accumulator& o) {
    sum += o.sum;
    sumsq += o.sumsq;
  }
};

// Runs `per_sample(rng, acc)` over chunks with derived seeds and merges the
// chunk accumulators in chunk order, so threading never changes the result.
template <typename Fn>
Accumulator run_chunks(int n_samples, std::uint64_t seed, const McOptions& opt,
                       Eigen::Index width, const Fn& per_sample) {
  if (opt.chunk_size <= 0) throw std::invalid_argument("chunk size must be positive");
  const int chunks = (n_samples + opt.chunk_size - 1) / opt.chunk_size;
  std::vector<Accumulator> parts(static_cast<std::size_t>(chunks));
  auto work = [&](int first, int stride) {
    for (int c = first; c < chunks; c += stride) {
      auto rng = make_engine(seed, Stream::kFading, static_cast<std::uint64_t>(c));
      Accumulator& acc = parts[static_cast<std::size_t>(c)];
      acc.init(width);
      const int count = std::min(opt.chunk_size, n_samples - c * opt.chunk_size);
      for (int s = 0; s < count; ++s) per_sample(rng, acc);
    }
  };
  const int threads = std::clamp(opt.threads, 1, std::max(1, chunks));
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
    for (auto& th : pool) th.join();
  }
  Accumulator total;
  total.init(width);
  for (const auto& p : parts) total.merge(p);
  return total;
}

void finish(const Accumulator& acc, int n, Eigen::VectorXd& mean, Eigen::VectorXd& se) {
  mean = acc.sum / n;
  const Eigen::ArrayXd var =
      ((acc.sumsq - n * mean.array().square()) / std::max(1, n - 1)).max(0.0);
  se = (var / n).sqrt();
}

}  // namespace

McEstimate ergodic_rate_mc(const NetworkInstance& inst, const PowerProfile& powers,
                           const QosSpec& qos, const PilotGroups& groups, int n_samples,
                           std::uint64_t seed, const McOptions& options) {
  if (n_samples < 100) throw std::invalid_argument("ergodic_rate_mc needs at least 100 samples");
  const int K = inst.num_devices();
  const int tau = qos.pilot_length;
  const Eigen::MatrixXd lambda = lambda_gain(tau, powers.pilot, inst.beta, groups);
  const double scale = (1.0 - qos.eta()) / std::numbers::ln2;
  std::vector<double> alpha(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) alpha[static_cast<std::size_t>(k)] = qos.alpha(k);

  const auto acc = run_chunks(
      n_samples, seed, options, K,
      [&](std::mt19937_64& rng, Accumulator& a) {
        thread_local FadingDraw draw;
        if (draw.num_aps != inst.num_aps() || draw.num_devices != K ||
            draw.antennas != inst.antennas || draw.num_groups != static_cast<int>(groups.size())) {
          draw = make_draw(inst.num_aps(), K, inst.antennas, static_cast<int>(groups.size()));
        }
        redraw(draw, rng);
        const auto est = estimate_channels(draw, inst, tau, powers.pilot, groups);
        const Eigen::VectorXd gamma = instantaneous_sinr(est, inst, powers, lambda);
        Eigen::ArrayXd rate(K);
        for (int k = 0; k < K; ++k) {
          const double gk = gamma(k);
          rate(k) = gk > 0.0 ? std::max(0.0, scale * f_raw(1.0 / gk, alpha[static_cast<std::size_t>(k)]))
                             : 0.0;
        }
        a.add(rate);
      });
  McEstimate out;
  finish(acc, n_samples, out.mean, out.stderr_);
  return out;
}

TermMoments term_moments_mc(const NetworkInstance& inst, const PowerProfile& powers, int tau,
                            const PilotGroups& groups, int n_samples, std::uint64_t seed,
                            const McOptions& options) {
  if (n_samples < 2) throw std::invalid_argument("term_moments_mc needs at least 2 samples");
  const int K = inst.num_devices();
  const Eigen::MatrixXd lambda = lambda_gain(tau, powers.pilot, inst.beta, groups);
  const auto acc = run_chunks(
      n_samples, seed, options, K + K * K,
      [&](std::mt19937_64& rng, Accumulator& a) {
        thread_local FadingDraw draw;
        if (draw.num_aps != inst.num_aps() || draw.num_devices != K ||
            draw.antennas != inst.antennas || draw.num_groups != static_cast<int>(groups.size())) {
          draw = make_draw(inst.num_aps(), K, inst.antennas, static_cast<int>(groups.size()));
        }
        redraw(draw, rng);
        const auto est = estimate_channels(draw, inst, tau, powers.pilot, groups);
        const auto s = interference_sample(est, inst, powers, lambda);
        Eigen::ArrayXd v(K + K * K);
        v.head(K) = s.leakage.array();
        v.tail(K * K) = s.inter.reshaped().array();
        a.add(v);
      });
  Eigen::VectorXd mean, se;
  finish(acc, n_samples, mean, se);
  TermMoments out;
  out.leakage_mean = mean.head(K);
  out.leakage_stderr = se.head(K);
  out.inter_mean = mean.tail(K * K).reshaped(K, K);
  out.inter_stderr = se.tail(K * K).reshaped(K, K);
  return out;
}

}  // namespace cfurllc
