#include "tnma/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace tnma {

namespace {

struct Moments {
  double mean = 0.0;
  double var = 0.0;  // n - 1 denominator
};

Moments moments(const double* x, std::size_t n) {
  Moments m;
  m.mean = std::accumulate(x, x + n, 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) ss += (x[i] - m.mean) * (x[i] - m.mean);
  m.var = ss / static_cast<double>(n - 1);
  return m;
}

void check(const Traces& chains) {
  if (chains.size() < 2) throw std::invalid_argument("diagnostics need at least two chains");
  const std::size_t n = chains.front().size();
  if (n < 4) throw std::invalid_argument("diagnostics need at least four draws per chain");
  for (const auto& c : chains)
    if (c.size() != n) throw std::invalid_argument("chains must have equal length");
}

}  // namespace

std::optional<double> split_rhat(const Traces& chains) {
  check(chains);
  const std::size_t half = chains.front().size() / 2;
  const std::size_t n = chains.front().size();
  std::vector<Moments> parts;
  for (const auto& c : chains) {
    parts.push_back(moments(c.data(), half));
    parts.push_back(moments(c.data() + (n - half), half));  // odd length drops the middle draw
  }
  const double m = static_cast<double>(parts.size());
  const double len = static_cast<double>(half);
  double w = 0.0, grand = 0.0;
  for (const auto& p : parts) {
    w += p.var;
    grand += p.mean;
  }
  w /= m;
  grand /= m;
  if (!(w > 0.0)) return std::nullopt;
  double b = 0.0;
  for (const auto& p : parts) b += (p.mean - grand) * (p.mean - grand);
  b *= len / (m - 1.0);
  const double var_plus = (len - 1.0) / len * w + b / len;
  return std::sqrt(var_plus / w);
}

std::optional<double> effective_sample_size(const Traces& chains) {
  check(chains);
  const std::size_t m = chains.size();
  const std::size_t n = chains.front().size();
  const double dn = static_cast<double>(n);

  std::vector<Moments> mom;
  for (const auto& c : chains) mom.push_back(moments(c.data(), n));
  double w = 0.0, grand = 0.0;
  for (const auto& p : mom) {
    w += p.var;
    grand += p.mean;
  }
  w /= static_cast<double>(m);
  grand /= static_cast<double>(m);
  if (!(w > 0.0)) return std::nullopt;
  double b_over_n = 0.0;
  for (const auto& p : mom) b_over_n += (p.mean - grand) * (p.mean - grand);
  b_over_n /= static_cast<double>(m - 1);
  const double var_plus = (dn - 1.0) / dn * w + b_over_n;

  // Mean over chains of the biased lag-t autocovariance.
  const auto mean_autocov = [&](std::size_t t) {
    double acc = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      const auto& x = chains[c];
      const double mu = mom[c].mean;
      double s = 0.0;
      for (std::size_t i = 0; i + t < n; ++i) s += (x[i] - mu) * (x[i + t] - mu);
      acc += s / dn;
    }
    return acc / static_cast<double>(m);
  };
  const auto rho = [&](std::size_t t) { return 1.0 - (w - mean_autocov(t)) / var_plus; };

  // Pair sums P_k = rho(2k) + rho(2k+1), kept while positive, forced monotone.
  double tau_sum = 0.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t + 1 < n; t += 2) {
    const double pair = (t == 0 ? 1.0 : rho(t)) + rho(t + 1);
    if (!(pair > 0.0)) break;
    const double mono = std::min(pair, prev_pair);
    tau_sum += mono;
    prev_pair = mono;
  }
  const double tau = std::max(-1.0 + 2.0 * tau_sum, 1.0 / std::log10(static_cast<double>(m) * dn));
  return static_cast<double>(m) * dn / tau;
}

}  // namespace tnma
