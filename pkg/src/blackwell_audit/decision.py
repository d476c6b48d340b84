"""Finite decision problems and welfare under distorted updating.

A decision problem is a payoff matrix over (action, state).  The value
function is the upper envelope of the action payoff lines over the
belief simplex.  Welfare evaluates the action a rule-following agent
actually picks: the action optimal at the held (distorted) posterior,
scored either at the true Bayesian posterior (the single-mistake
convention used throughout) or at the held posterior again
(double-mistake).  Respecting the informativeness order is equivalent to
convexity of the welfare profile, which is what the convexity scan
probes.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .geometry import Belief, _coerce
from .distortions import Distortion, evaluate_batch
from .experiments import BarycenterMismatch, PosteriorDistribution

#: Default slack when collecting the set of optimal actions.
TIE_TOL = 1e-10


class WelfareMode(str, enum.Enum):
    """How a mistaken action is scored: at the true posterior, or at the held one."""

    SINGLE = "single"
    DOUBLE = "double"


@dataclass(frozen=True, eq=False)
class DecisionProblem:
    """Payoff matrix u[action, state] over a finite action set."""

    payoff: np.ndarray
    action_labels: tuple

    def __init__(self, payoff, action_labels: Optional[Sequence] = None) -> None:
        arr = np.array(payoff, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1:
            raise ValueError("payoff must be a non-empty 2-d matrix")
        if not np.all(np.isfinite(arr)):
            raise ValueError("payoff entries must be finite")
        if action_labels is None:
            action_labels = tuple(f"a{i}" for i in range(arr.shape[0]))
        else:
            action_labels = tuple(str(a) for a in action_labels)
            if len(action_labels) != arr.shape[0]:
                raise ValueError("one label per action required")
        arr.flags.writeable = False
        object.__setattr__(self, "payoff", arr)
        object.__setattr__(self, "action_labels", action_labels)

    @property
    def n_actions(self) -> int:
        return self.payoff.shape[0]

    @property
    def n_states(self) -> int:
        return self.payoff.shape[1]

    def to_json(self) -> dict:
        return {
            "payoff": [[float(v) for v in row] for row in self.payoff],
            "actions": list(self.action_labels),
        }

    @staticmethod
    def from_json(doc: dict) -> "DecisionProblem":
        return DecisionProblem(doc["payoff"], doc.get("actions"))


def quadratic_loss_problem(
    n_actions: int = 101, offset: float = 0.3, targets: Sequence[float] = (1.0, 0.0)
) -> DecisionProblem:
    """Quadratic-loss problem on an action grid of [0, 1].

    u(a, state j) = -(a - target_j)**2 + offset.  With the two-state
    targets (1, 0) and the scalar convention x = coords[0], the value
    function is -x(1-x) + offset, attained at a = x (exactly on-grid
    whenever x is a multiple of the action step).
    """
    targets = np.asarray(targets, dtype=np.float64)
    grid = np.linspace(0.0, 1.0, n_actions)
    payoff = -((grid[:, None] - targets[None, :]) ** 2) + offset
    return DecisionProblem(payoff, [f"{a:g}" for a in grid])


class SelectorPolicy(str, enum.Enum):
    LEX_FIRST = "lex-first"
    LEX_LAST = "lex-last"
    PINNED = "pinned"


@dataclass(frozen=True)
class Selector:
    """Consistent action choice: a function of the held posterior alone.

    Ties (scores within ``tie_tol`` of the best) break lexicographically,
    or through explicit pins: (belief coordinates, action index) pairs
    matched within ``pin_tol``, falling back to lex-first.
    """

    policy: SelectorPolicy = SelectorPolicy.LEX_FIRST
    tie_tol: float = TIE_TOL
    pins: tuple = ()
    pin_tol: float = 1e-9

    def to_json(self) -> dict:
        doc: dict = {"policy": self.policy.value, "tie_tol": self.tie_tol}
        if self.pins:
            doc["pins"] = [
                {"belief": [float(v) for v in b], "action": int(a)} for b, a in self.pins
            ]
        return doc

    @staticmethod
    def from_json(doc: dict) -> "Selector":
        pins = tuple(
            (tuple(entry["belief"]), int(entry["action"])) for entry in doc.get("pins", ())
        )
        return Selector(SelectorPolicy(doc.get("policy", "lex-first")), doc.get("tie_tol", TIE_TOL), pins)


class ValueResult(NamedTuple):
    payoff: float
    argmax: tuple


def value_function(p: DecisionProblem, x, tie_tol: float = TIE_TOL) -> ValueResult:
    """Best attainable expected payoff at belief x, with the optimal action set."""
    scores = p.payoff @ _coerce(x)
    best = float(np.max(scores))
    argmax = tuple(int(i) for i in np.nonzero(scores >= best - tie_tol)[0])
    return ValueResult(best, argmax)


def value_batch(p: DecisionProblem, X: np.ndarray) -> np.ndarray:
    return np.max(np.asarray(X) @ p.payoff.T, axis=-1)


def select_action(p: DecisionProblem, sel: Selector, x_hat) -> int:
    """The selector's choice among actions optimal at the held belief."""
    xh = _coerce(x_hat)
    scores = p.payoff @ xh
    best = float(np.max(scores))
    ties = np.nonzero(scores >= best - sel.tie_tol)[0]
    if sel.policy is SelectorPolicy.PINNED:
        for coords, action in sel.pins:
            if np.max(np.abs(np.asarray(coords) - xh)) <= sel.pin_tol and action in ties:
                return int(action)
        return int(ties[0])
    if sel.policy is SelectorPolicy.LEX_LAST:
        return int(ties[-1])
    return int(ties[0])


def _select_batch(p: DecisionProblem, sel: Selector, X_hat: np.ndarray) -> np.ndarray:
    scores = X_hat @ p.payoff.T
    best = scores.max(axis=1, keepdims=True)
    ties = scores >= best - sel.tie_tol
    if sel.policy is SelectorPolicy.LEX_LAST:
        rev = ties[:, ::-1]
        choice = p.n_actions - 1 - rev.argmax(axis=1)
    else:
        choice = ties.argmax(axis=1)
    if sel.policy is SelectorPolicy.PINNED and sel.pins:
        for r in range(X_hat.shape[0]):
            for coords, action in sel.pins:
                if np.max(np.abs(np.asarray(coords) - X_hat[r])) <= sel.pin_tol and ties[r, action]:
                    choice[r] = action
                    break
    return choice.astype(np.int64)


def welfare(
    p: DecisionProblem,
    d: Distortion,
    mu,
    sel: Selector,
    mode: WelfareMode,
    x,
) -> float:
    """Expected payoff of the action chosen at the distorted belief.

    Single-mistake scores that action at the true posterior x;
    double-mistake re-uses the held belief and so equals the value
    function evaluated at the image.
    """
    return float(welfare_batch(p, d, mu, sel, mode, _coerce(x)[None, :])[0])


def welfare_batch(
    p: DecisionProblem,
    d: Distortion,
    mu,
    sel: Selector,
    mode: WelfareMode,
    X,
    chunk: int = 262144,
) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    mode = WelfareMode(mode)
    out = np.empty(X.shape[0])
    for lo in range(0, X.shape[0], chunk):
        part = X[lo : lo + chunk]
        imgs = evaluate_batch(d, mu, part)
        if mode is WelfareMode.DOUBLE:
            out[lo : lo + chunk] = value_batch(p, imgs)
        else:
            actions = _select_batch(p, sel, imgs)
            out[lo : lo + chunk] = np.einsum("ij,ij->i", p.payoff[actions], part)
    return out


def expected_payoff(
    p: DecisionProblem,
    d: Distortion,
    mu,
    sel: Selector,
    mode: WelfareMode,
    rho_b: PosteriorDistribution,
) -> float:
    """Ex-ante welfare of an experiment, via its Bayesian posterior distribution."""
    mua = _coerce(mu)
    if np.max(np.abs(rho_b.barycenter.coords - mua)) > 1e-8:
        raise BarycenterMismatch("posterior distribution is not plausible for this prior")
    w = welfare_batch(p, d, mu, sel, mode, rho_b.support)
    return float(rho_b.probs @ w)


@dataclass(frozen=True)
class ConvexityViolation:
    x: np.ndarray
    x_prime: np.ndarray
    lam: float
    lhs: float
    rhs: float

    @property
    def gap(self) -> float:
        return self.lhs - self.rhs

    def csv_row(self) -> list:
        return (
            [float(v) for v in self.x]
            + [float(v) for v in self.x_prime]
            + [self.lam, self.lhs, self.rhs, self.gap]
        )


MIX_WEIGHTS = (0.25, 0.5, 0.75)


def convexity_violations(
    p: DecisionProblem,
    d: Distortion,
    mu,
    sel: Selector,
    mode: WelfareMode,
    grid_size: int = 200,
    tol: float = 1e-9,
    seed: int = 0,
    n_pairs: Optional[int] = None,
    chunk: int = 200_000,
) -> list:
    """Sampled convexity check of the welfare profile.

    Two states: every pair of scalar grid nodes.  Three or more: random
    interior pairs (seeded).  Each pair is tested at the mixing weights
    0.25 / 0.5 / 0.75; a violation is a mixture whose welfare exceeds the
    chord by more than ``tol``.
    """
    mua = _coerce(mu)
    n = mua.shape[0]
    if n == 2:
        ts = np.arange(grid_size + 1, dtype=np.float64) / grid_size
        nodes = np.column_stack([ts, 1.0 - ts])
        ii, jj = np.triu_indices(len(ts), k=1)
        A = nodes[ii]
        B = nodes[jj]
    else:
        rng = np.random.default_rng(seed)
        count = n_pairs if n_pairs is not None else 10 * grid_size
        A = rng.dirichlet(np.ones(n), size=count)
        B = rng.dirichlet(np.ones(n), size=count)
    wA = welfare_batch(p, d, mu, sel, mode, A)
    wB = welfare_batch(p, d, mu, sel, mode, B)

    found: list = []
    for lam in MIX_WEIGHTS:
        mixes = lam * A + (1.0 - lam) * B
        chord = lam * wA + (1.0 - lam) * wB
        for lo in range(0, mixes.shape[0], chunk):
            part = mixes[lo : lo + chunk]
            lhs = welfare_batch(p, d, mu, sel, mode, part)
            rhs = chord[lo : lo + chunk]
            bad = np.nonzero(lhs > rhs + tol)[0]
            for k in bad:
                found.append(
                    ConvexityViolation(A[lo + k].copy(), B[lo + k].copy(), lam, float(lhs[k]), float(rhs[k]))
                )
    return found


def violations_to_csv(records: Sequence[ConvexityViolation], path) -> None:
    """CSV report: x coordinates, x' coordinates, lambda, lhs, rhs, gap."""
    import csv as _csv

    with open(path, "w", newline="") as fh:
        writer = _csv.writer(fh)
        if records:
            n = len(records[0].x)
        else:
            n = 0
        header = (
            [f"x{i}" for i in range(n)]
            + [f"xp{i}" for i in range(n)]
            + ["lambda", "lhs", "rhs", "gap"]
        )
        writer.writerow(header)
        for rec in records:
            writer.writerow([f"{v:.12g}" if isinstance(v, float) else v for v in rec.csv_row()])
