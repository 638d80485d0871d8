"""Core bandit data model: reward grids, reward matrices, empirical estimation.

Rewards live on a finite shared grid in [0, 1].  A bandit instance is a
column-stochastic matrix P with one column per arm; column x is the reward
distribution of arm x over the grid.  Everything downstream (structures,
lower bounds, policies) works with these two objects plus the observation
log that a running policy maintains.
"""

import numpy as np


class RewardSupport:
    """Sorted grid of distinct reward levels, all in [0, 1]."""

    def __init__(self, values):
        values = np.asarray(values, dtype=float)
        if values.ndim != 1 or values.size < 2:
            raise ValueError("support needs at least 2 levels")
        if np.any(np.diff(values) <= 0):
            raise ValueError("support levels must be strictly increasing")
        if values[0] < 0.0 or values[-1] > 1.0:
            raise ValueError("support levels must lie in [0, 1]")
        self.values = values

    def __len__(self):
        return self.values.size

    def index_of(self, r):
        """Grid index of reward r; raises if r is not on the grid."""
        idx = int(np.argmin(np.abs(self.values - r)))
        if abs(self.values[idx] - r) > 1e-12:
            raise ValueError("reward %r is not on the support grid" % (r,))
        return idx


class RewardMatrix:
    """Column-stochastic |R| x |X| matrix; column x is arm x's distribution."""

    def __init__(self, probs, support):
        probs = np.asarray(probs, dtype=float)
        if probs.ndim != 2 or probs.shape[0] != len(support):
            raise ValueError("probs must be |R| x |X|")
        if np.any(probs < 0):
            raise ValueError("probabilities must be nonnegative")
        colsums = probs.sum(axis=0)
        if np.any(np.abs(colsums - 1.0) > 1e-12):
            raise ValueError("columns must sum to 1 within 1e-12")
        self.probs = probs
        self.support = support
        self.arm_count = probs.shape[1]

    def column(self, x):
        return self.probs[:, x]

    def copy(self):
        return RewardMatrix(self.probs.copy(), self.support)


def mean_reward(P, x):
    """Expected reward of arm x: sum_r r * P(r, x)."""
    return float(P.support.values @ P.probs[:, x])


def all_means(P):
    return P.support.values @ P.probs


def best_arm_and_value(P):
    """Lowest-index maximizing arm and the optimal mean reward."""
    means = all_means(P)
    # ties broken by lowest index: argmax already returns the first maximizer
    best = int(np.argmax(means))
    return best, float(means[best])


def gap(P, x):
    """Suboptimality gap: optimal mean minus arm x's mean (>= 0)."""
    _, star = best_arm_and_value(P)
    g = star - mean_reward(P, x)
    return 0.0 if g < 0 else g


def gaps(P):
    means = all_means(P)
    return np.maximum(means.max() - means, 0.0)


class DusaObservationLog:
    """Per-run mutable state: pull counts, empirical matrix, round, s_t.

    The empirical column of the pulled arm is re-weighted in place by the
    running-mean recurrence
        P_{t+1}(r, x_t) = N P_t(r, x_t) / (N + 1)          r != observed
        P_{t+1}(r, x_t) = (1 + N P_t(r, x_t)) / (N + 1)    r == observed
    which is exact in real arithmetic.  Floating-point drift is absorbed by
    renormalizing the column every RENORM_EVERY updates.
    """

    RENORM_EVERY = 10_000

    def __init__(self, support, arm_count):
        self.support = support
        self.arm_count = arm_count
        self.counts = np.zeros(arm_count, dtype=np.int64)
        self.probs = np.zeros((len(support), arm_count))
        self.t = 0
        self.s = 0
        self._updates = np.zeros(arm_count, dtype=np.int64)

    def empirical(self):
        return RewardMatrix(self.probs.copy(), self.support)

    def record(self, x, r):
        """Fold one observed reward of arm x into the empirical column."""
        ridx = self.support.index_of(r)
        n = self.counts[x]
        if n == 0:
            self.probs[:, x] = 0.0
            self.probs[ridx, x] = 1.0
        else:
            self.probs[:, x] *= n / (n + 1.0)
            self.probs[ridx, x] += 1.0 / (n + 1.0)
        self.counts[x] = n + 1
        self.t += 1
        self._updates[x] += 1
        if self._updates[x] % self.RENORM_EVERY == 0:
            self.probs[:, x] /= self.probs[:, x].sum()


def record_observation(log, x, r):
    """Functional wrapper over DusaObservationLog.record."""
    log.record(x, r)
    return log


def pseudo_regret(P, pulls):
    """Sum of per-pull gaps of the pulled arms under the true matrix P."""
    g = gaps(P)
    pulls = np.asarray(pulls, dtype=int)
    return float(g[pulls].sum())
