"""Statistical experiments, Bayesian updating, and the Blackwell order.

An experiment is a row-stochastic likelihood matrix (one row per state,
one column per signal).  Updating it at an interior prior produces a
finite-support distribution over posterior beliefs whose barycenter is
the prior.  Informativeness comparisons run through two equivalent
routes: garbling feasibility between likelihood matrices, and the
mean-preserving-contraction (dilation) test between posterior
distributions; both are small linear programs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from .geometry import TOL_GEO, TOL_SUM, Belief, _coerce, affinely_independent

# Barycenter agreement required of Bayes-plausible posterior distributions.
TOL_BARY = 1e-10


class PriorNotInterior(ValueError):
    """The prior must put strictly positive weight on every state."""


class BarycenterMismatch(ValueError):
    """Posterior distribution's mean disagrees with the stated prior."""


class DimensionMismatch(ValueError):
    """Matrix shapes do not line up."""


class NotAffinelyIndependent(ValueError):
    """Operation requires an affinely independent support."""


class TargetOutsideOppositeHull(ValueError):
    """The contraction target must lie in the hull of the other support points."""


class InfeasibleWeights(ValueError):
    """No strictly positive reweighting preserves the barycenter."""


def _check_rows_stochastic(matrix: np.ndarray, what: str) -> np.ndarray:
    if matrix.ndim != 2 or matrix.shape[0] < 1 or matrix.shape[1] < 1:
        raise ValueError(f"{what} must be a non-empty 2-d matrix")
    if np.min(matrix) < -TOL_SUM:
        raise ValueError(f"{what} has a negative entry: {np.min(matrix)}")
    matrix = np.maximum(matrix, 0.0)
    sums = matrix.sum(axis=1)
    if np.max(np.abs(sums - 1.0)) > 1e-9:
        raise ValueError(f"{what} rows must sum to 1 (max deviation {np.max(np.abs(sums - 1.0)):.2e})")
    return matrix / sums[:, None]


@dataclass(frozen=True, eq=False)
class Experiment:
    """A signal structure: likelihoods[theta, s] = P(signal s | state theta)."""

    likelihoods: np.ndarray
    signal_labels: tuple

    def __init__(self, likelihoods, signal_labels: Optional[Sequence] = None) -> None:
        arr = np.array(likelihoods, dtype=np.float64)
        arr = _check_rows_stochastic(arr, "likelihood matrix")
        if signal_labels is None:
            signal_labels = tuple(f"s{j}" for j in range(arr.shape[1]))
        else:
            signal_labels = tuple(str(s) for s in signal_labels)
            if len(signal_labels) != arr.shape[1]:
                raise DimensionMismatch("one label per signal required")
        arr.flags.writeable = False
        object.__setattr__(self, "likelihoods", arr)
        object.__setattr__(self, "signal_labels", signal_labels)

    @property
    def n_states(self) -> int:
        return self.likelihoods.shape[0]

    @property
    def n_signals(self) -> int:
        return self.likelihoods.shape[1]

    def to_json(self) -> dict:
        return {
            "likelihoods": [[float(v) for v in row] for row in self.likelihoods],
            "signals": list(self.signal_labels),
        }

    @staticmethod
    def from_json(doc: dict) -> "Experiment":
        return Experiment(doc["likelihoods"], doc.get("signals"))


def fully_informative(n: int) -> Experiment:
    return Experiment(np.eye(n))


def uninformative(n: int) -> Experiment:
    return Experiment(np.ones((n, 1)))


def binary_symmetric(accuracy: float) -> Experiment:
    """Two states, two signals, P(correct signal | state) = accuracy."""
    a = float(accuracy)
    return Experiment(np.array([[a, 1.0 - a], [1.0 - a, a]]))


@dataclass(frozen=True, eq=False)
class PosteriorDistribution:
    """Finite-support distribution over posterior beliefs.

    Support points closer than ``merge_tol`` are merged on construction
    (probabilities summed), so the support is always pairwise distinct;
    zero-probability atoms are dropped.  The barycenter is cached.
    """

    support: np.ndarray
    probs: np.ndarray
    barycenter: Belief

    def __init__(self, support, probs, merge_tol: float = TOL_GEO) -> None:
        pts = np.asarray([_coerce(p) for p in support], dtype=np.float64)
        pr = np.asarray(probs, dtype=np.float64).ravel()
        if pts.ndim != 2 or pts.shape[0] != pr.shape[0]:
            raise DimensionMismatch("one probability per support point required")
        if np.min(pr) < -TOL_SUM:
            raise ValueError(f"negative probability: {np.min(pr)}")
        pr = np.maximum(pr, 0.0)
        if abs(pr.sum() - 1.0) > 1e-9:
            raise ValueError(f"probabilities must sum to 1, got {pr.sum()}")
        merged_pts: list = []
        merged_pr: list = []
        for row, p in zip(pts, pr):
            if p <= 0.0:
                continue
            for i, kept in enumerate(merged_pts):
                if np.max(np.abs(row - kept)) <= merge_tol:
                    merged_pr[i] += p
                    break
            else:
                merged_pts.append(row.copy())
                merged_pr.append(p)
        if not merged_pts:
            raise ValueError("distribution needs at least one positive-probability atom")
        sup = np.asarray(merged_pts)
        pra = np.asarray(merged_pr)
        pra = pra / pra.sum()
        sup.flags.writeable = False
        pra.flags.writeable = False
        object.__setattr__(self, "support", sup)
        object.__setattr__(self, "probs", pra)
        object.__setattr__(self, "barycenter", Belief(pra @ sup))

    @property
    def size(self) -> int:
        return self.support.shape[0]

    @property
    def n_states(self) -> int:
        return self.support.shape[1]

    def beliefs(self) -> list:
        return [Belief(row) for row in self.support]

    def to_json(self) -> dict:
        return {
            "support": [[float(v) for v in row] for row in self.support],
            "probs": [float(p) for p in self.probs],
        }

    @staticmethod
    def from_json(doc: dict) -> "PosteriorDistribution":
        return PosteriorDistribution(doc["support"], doc["probs"])


def point_mass(x) -> PosteriorDistribution:
    return PosteriorDistribution([_coerce(x)], [1.0])


@dataclass(frozen=True, eq=False)
class GarblingMatrix:
    """Row-stochastic post-processing of signals: entries[s, s'] = P(s' | s)."""

    entries: np.ndarray

    def __init__(self, entries) -> None:
        arr = np.array(entries, dtype=np.float64)
        arr = _check_rows_stochastic(arr, "garbling matrix")
        arr.flags.writeable = False
        object.__setattr__(self, "entries", arr)


def bayes(prior, experiment: Experiment) -> PosteriorDistribution:
    """Bayesian posterior distribution of an experiment at an interior prior.

    Signal s arrives with probability sum_theta prior[theta] *
    likelihood[theta, s]; zero-probability signals are dropped and
    coincident posteriors merged.  The barycenter equals the prior.
    """
    mu = _coerce(prior)
    if np.min(mu) <= 0.0:
        raise PriorNotInterior("bayes requires a full-support prior")
    if mu.shape[0] != experiment.n_states:
        raise DimensionMismatch("prior length must match the experiment's state count")
    marginal = mu @ experiment.likelihoods
    keep = marginal > 0.0
    posts = (mu[:, None] * experiment.likelihoods[:, keep]) / marginal[keep][None, :]
    return PosteriorDistribution(posts.T, marginal[keep])


def experiment_from_posteriors(rho: PosteriorDistribution, prior) -> Experiment:
    """Inverse of :func:`bayes`: build an experiment realizing a posterior distribution.

    One signal per support point, likelihood[theta, j] = probs[j] *
    support[j, theta] / prior[theta].  Requires the barycenter to match
    the (interior) prior, which is exactly what makes the rows stochastic.
    """
    mu = _coerce(prior)
    if np.min(mu) <= 0.0:
        raise PriorNotInterior("reconstruction requires a full-support prior")
    if np.max(np.abs(rho.barycenter.coords - mu)) > TOL_BARY:
        raise BarycenterMismatch(
            f"barycenter {rho.barycenter.coords} != prior {mu}"
        )
    lik = (rho.probs[None, :] * rho.support.T) / mu[:, None]
    # Row sums equal barycenter/prior ratios; renormalize the residual drift.
    return Experiment(lik / lik.sum(axis=1)[:, None])


def garble(experiment: Experiment, m: GarblingMatrix) -> Experiment:
    """Degrade an experiment by post-processing its signals through m."""
    if m.entries.shape[0] != experiment.n_signals:
        raise DimensionMismatch(
            f"garbling expects {experiment.n_signals} rows, got {m.entries.shape[0]}"
        )
    return Experiment(experiment.likelihoods @ m.entries)


def blackwell_dominates(pi: Experiment, pi_prime: Experiment, tol: float = 1e-8) -> bool:
    """True when pi_prime is a garbling of pi (pi is weakly more informative).

    Feasibility of a row-stochastic M with pi @ M = pi_prime, tested by
    minimizing the sup-norm residual with a linear program.
    """
    if pi.n_states != pi_prime.n_states:
        raise DimensionMismatch("experiments must share the state space")
    A = pi.likelihoods
    B = pi_prime.likelihoods
    k, kp = A.shape[1], B.shape[1]
    nv = k * kp + 1
    c = np.zeros(nv)
    c[-1] = 1.0
    # Row-stochasticity of M: for each signal s of pi, sum_s' M[s, s'] = 1.
    A_eq = np.zeros((k, nv))
    for s in range(k):
        A_eq[s, s * kp : (s + 1) * kp] = 1.0
    b_eq = np.ones(k)
    # |(A M - B)[theta, s']| <= t for all theta, s'.
    n = A.shape[0]
    A_ub = np.zeros((2 * n * kp, nv))
    b_ub = np.zeros(2 * n * kp)
    row = 0
    for sign in (+1.0, -1.0):
        for theta in range(n):
            for sp in range(kp):
                for s in range(k):
                    A_ub[row, s * kp + sp] = sign * A[theta, s]
                A_ub[row, -1] = -1.0
                b_ub[row] = sign * B[theta, sp]
                row += 1
    bounds = [(0.0, 1.0)] * (k * kp) + [(0.0, None)]
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs")
    if res.status != 0:
        raise RuntimeError(f"garbling LP failed: {res.message}")
    return bool(res.fun <= tol)


def is_mpc(rho_prime: PosteriorDistribution, rho: PosteriorDistribution, tol: float = 1e-8) -> bool:
    """True when rho_prime is a mean-preserving contraction of rho.

    Dilation (martingale-coupling) test: each support point of rho_prime
    must split into a distribution over rho's support with matching
    barycenter, and the splits must mix back to rho's probabilities.
    Works uniformly in every dimension.
    """
    if rho.n_states != rho_prime.n_states:
        raise DimensionMismatch("posterior distributions must share the state space")
    if np.max(np.abs(rho.barycenter.coords - rho_prime.barycenter.coords)) > max(tol, TOL_BARY):
        raise BarycenterMismatch("mean-preserving comparison requires equal barycenters")
    I, J = rho_prime.size, rho.size
    n = rho.n_states
    nv = I * J + 1
    c = np.zeros(nv)
    c[-1] = 1.0
    # Each row of the dilation kernel is a probability vector.
    A_eq = np.zeros((I, nv))
    for i in range(I):
        A_eq[i, i * J : (i + 1) * J] = 1.0
    b_eq = np.ones(I)
    rows = []
    rhs = []
    # Barycenter of row i reproduces rho_prime's i-th support point.
    for sign in (+1.0, -1.0):
        for i in range(I):
            for theta in range(n):
                r = np.zeros(nv)
                r[i * J : (i + 1) * J] = sign * rho.support[:, theta]
                r[-1] = -1.0
                rows.append(r)
                rhs.append(sign * rho_prime.support[i, theta])
    # Mixture of the rows reproduces rho's probabilities.
    for sign in (+1.0, -1.0):
        for j in range(J):
            r = np.zeros(nv)
            for i in range(I):
                r[i * J + j] = sign * rho_prime.probs[i]
            r[-1] = -1.0
            rows.append(r)
            rhs.append(sign * rho.probs[j])
    A_ub = np.asarray(rows)
    b_ub = np.asarray(rhs)
    bounds = [(0.0, 1.0)] * (I * J) + [(0.0, None)]
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs")
    if res.status != 0:
        raise RuntimeError(f"dilation LP failed: {res.message}")
    return bool(res.fun <= tol)


def bring_point_in(
    rho: PosteriorDistribution,
    index: int,
    gamma: float,
    direction_target,
) -> PosteriorDistribution:
    """Contract one support point toward a target inside the others' hull.

    The moved point becomes gamma * x + (1 - gamma) * target; all
    probabilities are re-solved (uniquely, thanks to affine independence)
    to keep the barycenter fixed, which always raises the moved point's
    probability.  The output is a strict mean-preserving contraction of
    the input.
    """
    from .geometry import in_convex_hull  # local import to avoid cycle at module load

    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must be strictly between 0 and 1")
    pts = rho.support
    k = rho.size
    if not 0 <= index < k:
        raise IndexError(f"support index {index} out of range")
    if not affinely_independent(pts):
        raise NotAffinelyIndependent("support must be affinely independent")
    target = _coerce(direction_target)
    others = np.delete(pts, index, axis=0)
    if k >= 2 and not in_convex_hull(target, others, tol=1e-7):
        raise TargetOutsideOppositeHull("target must lie in the hull of the other support points")

    moved = gamma * pts[index] + (1.0 - gamma) * target
    new_pts = pts.copy()
    new_pts[index] = moved
    # Unique convex weights with the original barycenter.
    A = np.vstack([new_pts.T, np.ones((1, k))])
    b = np.concatenate([rho.barycenter.coords, [1.0]])
    w, *_ = np.linalg.lstsq(A, b, rcond=None)
    if np.max(np.abs(A @ w - b)) > 1e-8:
        raise InfeasibleWeights("barycenter left the affine hull of the new support")
    if np.min(w) < 1e-12:
        raise InfeasibleWeights(
            f"no strictly positive weights preserve the barycenter (min {np.min(w):.3e})"
        )
    if w[index] < rho.probs[index] + 1e-9:
        raise InfeasibleWeights("moved point's probability did not strictly increase")
    return PosteriorDistribution(new_pts, w)
