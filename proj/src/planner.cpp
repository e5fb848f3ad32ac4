#include "fmdp/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "fmdp/error.hpp"

namespace fmdp {

namespace {

// near-ties within this margin keep the earlier action
constexpr double kTieMargin = 1e-12;

}  // namespace

OptimisticModelView::Backup OptimisticModelView::backup(std::size_t s, std::span<const double> h) const {
  const std::size_t S = stateCount();
  std::vector<double> p(S);
  Backup best{-std::numeric_limits<double>::infinity(), 0};
  const auto count = extendedActionCount(s);
  for (std::uint64_t e = 0; e < count; ++e) {
    distribution(s, e, h, p);
    double v = reward(s, e);
    for (std::size_t n = 0; n < S; ++n) v += p[n] * h[n];
    if (v > best.value + kTieMargin) best = {v, e};
  }
  return best;
}

void TabularView::distribution(std::size_t s, std::uint64_t a, std::span<const double>,
                               std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  for (const auto& t : mdp_->row(s, a)) out[t.next] += t.prob;
}

OptimisticModelView::Backup TabularView::backup(std::size_t s, std::span<const double> h) const {
  Backup best{-std::numeric_limits<double>::infinity(), 0};
  for (std::size_t a = 0; a < mdp_->actionCount(); ++a) {
    double v = mdp_->reward(s, a);
    for (const auto& t : mdp_->row(s, a)) v += t.prob * h[t.next];
    if (v > best.value + kTieMargin) best = {v, a};
  }
  return best;
}

EviResult eviSolve(const OptimisticModelView& view, const EviOptions& options) {
  if (!(options.tolerance > 0.0)) throw DomainError("EVI tolerance must be positive");
  const std::size_t S = view.stateCount();
  EviResult result;
  std::vector<double> h(S, 0.0), next(S, 0.0);
  std::vector<std::uint64_t> policy(S, 0);
  double tau = options.damping == Damping::Always ? 0.5 : 1.0;
  std::uint64_t plainIterations = 0;
  double span = std::numeric_limits<double>::infinity();
  if (options.trace) *options.trace << "iteration,span,gain\n";

  for (std::uint64_t it = 1; it <= options.maxIterations; ++it) {
    const auto sweep = [&](std::size_t s) {
      const auto b = view.backup(s, h);
      next[s] = tau * b.value + (1.0 - tau) * h[s];
      policy[s] = b.action;
    };
    const auto count = static_cast<std::ptrdiff_t>(S);
    if (options.parallel) {
#pragma omp parallel for schedule(dynamic, 4)
      for (std::ptrdiff_t s = 0; s < count; ++s) sweep(static_cast<std::size_t>(s));
    } else {
      for (std::ptrdiff_t s = 0; s < count; ++s) sweep(static_cast<std::size_t>(s));
    }
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t s = 0; s < S; ++s) {
      const double inc = next[s] - h[s];
      lo = std::min(lo, inc);
      hi = std::max(hi, inc);
    }
    span = hi - lo;
    const double gain = 0.5 * (hi + lo) / tau;
    if (options.trace) *options.trace << it << ',' << span << ',' << gain << '\n';
    // subtracting the minimum keeps h bounded without touching the increments
    const double base = *std::min_element(next.begin(), next.end());
    for (std::size_t s = 0; s < S; ++s) h[s] = next[s] - base;

    if (span <= options.tolerance * tau) {
      result.gain = gain;
      result.bias = h;
      result.policy = policy;
      result.iterations = it;
      result.span = span;
      result.biasSpan = *std::max_element(h.begin(), h.end());
      result.damped = tau < 1.0;
      return result;
    }
    if (tau == 1.0 && options.damping == Damping::Auto && ++plainIterations >= options.plainBudget) tau = 0.5;
  }
  throw NonConvergenceError("extended value iteration hit its iteration cap", span);
}

namespace {

/// Dense chain of a policy, reused across policies during enumeration.
struct ChainBuffer {
  std::vector<double> P, r, mu, next;

  void load(const TabularMdp& mdp, std::span<const std::size_t> policy) {
    const std::size_t S = mdp.stateCount();
    P.assign(S * S, 0.0);
    r.resize(S);
    for (std::size_t s = 0; s < S; ++s) {
      for (const auto& t : mdp.row(s, policy[s])) P[s * S + t.next] += t.prob;
      r[s] = mdp.reward(s, policy[s]);
    }
  }

  double gain(std::size_t S) {
    mu.assign(S, 1.0 / static_cast<double>(S));
    next.resize(S);
    double damp = 1.0;
    for (std::uint64_t it = 1; it <= 10'000'000; ++it) {
      std::fill(next.begin(), next.end(), 0.0);
      for (std::size_t s = 0; s < S; ++s) {
        const double m = mu[s];
        if (m == 0.0) continue;
        const double* row = P.data() + s * S;
        for (std::size_t n = 0; n < S; ++n) next[n] += m * row[n];
      }
      double change = 0.0;
      for (std::size_t s = 0; s < S; ++s) {
        next[s] = damp * next[s] + (1.0 - damp) * mu[s];
        change = std::max(change, std::abs(next[s] - mu[s]));
      }
      mu.swap(next);
      if (change <= 1e-10) break;
      if (it == 1000 && damp == 1.0) damp = 0.5;  // oscillating: use 0.5 I + 0.5 P
    }
    double g = 0.0;
    for (std::size_t s = 0; s < S; ++s) g += mu[s] * r[s];
    return g;
  }
};

}  // namespace

double policyGain(const TabularMdp& mdp, std::span<const std::size_t> policy) {
  if (policy.size() != mdp.stateCount()) throw DomainError("policy length differs from state count");
  for (auto a : policy)
    if (a >= mdp.actionCount()) throw DomainError("policy action out of range");
  ChainBuffer buf;
  buf.load(mdp, policy);
  return buf.gain(mdp.stateCount());
}

BruteForceResult exactGainBruteForce(const TabularMdp& mdp, bool parallel) {
  const std::size_t S = mdp.stateCount(), A = mdp.actionCount();
  double total = 1.0;
  for (std::size_t s = 0; s < S; ++s) total *= static_cast<double>(A);
  if (total > 1e7) throw SizeError("brute force limited to 1e7 policies");
  const auto count = static_cast<std::int64_t>(total);

  const auto decodePolicy = [&](std::int64_t k, std::vector<std::size_t>& policy) {
    policy.resize(S);
    for (std::size_t s = 0; s < S; ++s) {
      policy[s] = static_cast<std::size_t>(k % static_cast<std::int64_t>(A));
      k /= static_cast<std::int64_t>(A);
    }
  };
  const auto better = [](double g, std::int64_t k, double bestG, std::int64_t bestK) {
    return g > bestG || (g == bestG && k < bestK);
  };

  double bestGain = -1.0;
  std::int64_t bestIndex = -1;
  if (parallel) {
#pragma omp parallel
    {
      ChainBuffer buf;
      std::vector<std::size_t> policy;
      double localGain = -1.0;
      std::int64_t localIndex = -1;
#pragma omp for schedule(static)
      for (std::int64_t k = 0; k < count; ++k) {
        decodePolicy(k, policy);
        buf.load(mdp, policy);
        const double g = buf.gain(S);
        if (localIndex < 0 || better(g, k, localGain, localIndex)) localGain = g, localIndex = k;
      }
#pragma omp critical
      if (localIndex >= 0 && (bestIndex < 0 || better(localGain, localIndex, bestGain, bestIndex)))
        bestGain = localGain, bestIndex = localIndex;
    }
  } else {
    ChainBuffer buf;
    std::vector<std::size_t> policy;
    for (std::int64_t k = 0; k < count; ++k) {
      decodePolicy(k, policy);
      buf.load(mdp, policy);
      const double g = buf.gain(S);
      if (bestIndex < 0 || better(g, k, bestGain, bestIndex)) bestGain = g, bestIndex = k;
    }
  }
  BruteForceResult out;
  out.gain = bestGain;
  decodePolicy(bestIndex, out.policy);
  return out;
}

}  // namespace fmdp
