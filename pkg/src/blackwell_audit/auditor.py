"""End-to-end violation search for belief-updating rules.

The auditor scans a belief grid for distortion errors and, for each one,
tries a short list of constructions that convert the error into a
machine-checkable certificate: a pair of experiments ordered by
informativeness, plus a two-action decision problem, under which the
rule strictly prefers the less informative experiment.

Construction recipes, cheapest first
------------------------------------
* ``claim1-hyperplane``   - an off-hull image is cut from the support
  hull (and the contraction's image) by a strict hyperplane; the induced
  threshold problem makes the rule act on news it should ignore.
* ``claim2-separation``   - the same cut one contraction deeper, used
  when the first contraction's image is itself banished.
* ``claim3-mixture``      - two banished images with different
  destinations, compared through a three-point mixture.
* ``lemma3-threshold`` / ``lemma3-ternary`` - two-state contraction
  recipes built from scalar threshold problems.
* ``contagion1-separation`` - contraction recipe for three or more
  states: an edge point whose image misses the prior is separated from
  the original error's contraction path.
* ``degenerate-prior``    - the prior itself is misread; a two-stage
  contraction pair exposes it.
* ``vertexprop-separation`` - a vertex image off the segment toward the
  common collapse point.
* ``random-search``       - randomized experiment pairs and threshold
  problems for the remaining budget.

Every candidate pair is scored by exact expected-welfare computation and
emitted only if it passes independent re-verification.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .geometry import (
    TOL_GEO,
    Belief,
    Hyperplane,
    NoStrictSeparation,
    _coerce,
    in_convex_hull,
    on_segment,
    separating_hyperplane,
    separating_hyperplane_sets,
    simplex_lattice,
)
from .experiments import (
    BarycenterMismatch,
    Experiment,
    GarblingMatrix,
    InfeasibleWeights,
    NotAffinelyIndependent,
    PosteriorDistribution,
    TargetOutsideOppositeHull,
    bayes,
    blackwell_dominates,
    bring_point_in,
    experiment_from_posteriors,
    garble,
)
from .distortions import (
    Distortion,
    classify_batch,
    classify_error,
    evaluate_batch,
    is_affine,
    is_occasionally_coarse,
    is_occasionally_stubborn,
    is_trivial_on_interior,
    rule_from_json,
)
from .decision import (
    DecisionProblem,
    Selector,
    WelfareMode,
    expected_payoff,
)

#: A certificate's payoff gap must clear this threshold (negative side).
GAP_TOL = 1e-6
#: Minimum hyperplane margin accepted when building threshold problems.
SEP_MARGIN = 1e-7


class BudgetExhausted(RuntimeError):
    """All constructions tried within the allotted budget; no violation found."""


class _Budget:
    """Counts candidate constructions; raises when the allowance runs out."""

    def __init__(self, limit: int) -> None:
        self.limit = int(limit)
        self.used = 0

    def charge(self, amount: int = 1) -> None:
        if self.used + amount > self.limit:
            raise BudgetExhausted(f"construction budget of {self.limit} exhausted")
        self.used += amount

    @property
    def remaining(self) -> int:
        return self.limit - self.used


@dataclass(frozen=True)
class ViolationCertificate:
    """A self-contained, re-verifiable witness that a rule harms information.

    ``pi`` dominates ``pi_prime`` in the garbling order, yet the rule's
    expected welfare under ``pi`` falls short of that under ``pi_prime``
    by ``gap`` (strictly negative).  The rule's own spec is embedded so
    third parties can recompute both payoffs from scratch.
    """

    prior: Belief
    rule: Distortion
    pi: Experiment
    pi_prime: Experiment
    problem: DecisionProblem
    selector: Selector
    mode: WelfareMode
    gap: float
    recipe: str
    seed: int = 0

    def to_json(self) -> dict:
        return {
            "format": "blackwell-audit-certificate/1",
            "prior": self.prior.to_json(),
            "rule": self.rule.to_json(),
            "pi": self.pi.to_json(),
            "pi_prime": self.pi_prime.to_json(),
            "problem": self.problem.to_json(),
            "selector": self.selector.to_json(),
            "mode": self.mode.value,
            "gap": self.gap,
            "recipe": self.recipe,
            "seed": self.seed,
        }

    @staticmethod
    def from_json(doc: dict) -> "ViolationCertificate":
        prior = Belief(doc["prior"])
        return ViolationCertificate(
            prior=prior,
            rule=rule_from_json(doc["rule"], n=prior.n),
            pi=Experiment.from_json(doc["pi"]),
            pi_prime=Experiment.from_json(doc["pi_prime"]),
            problem=DecisionProblem.from_json(doc["problem"]),
            selector=Selector.from_json(doc["selector"]),
            mode=WelfareMode(doc["mode"]),
            gap=float(doc["gap"]),
            recipe=str(doc["recipe"]),
            seed=int(doc.get("seed", 0)),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=2)


def hyperplane_problem(h: Hyperplane) -> DecisionProblem:
    """Two-action problem whose value function is max(0, normal . x - offset).

    Action 0 pays nothing in every state; action 1 pays normal[theta] -
    offset, so its expected payoff at belief x is exactly the signed
    hyperplane evaluation.
    """
    zero = np.zeros_like(h.normal)
    act = h.normal - h.offset
    return DecisionProblem(np.vstack([zero, act]), ["pass", "act"])


def verify_certificate(c: ViolationCertificate, tol: float = GAP_TOL) -> Tuple[bool, Optional[str]]:
    """Independently re-check a certificate; returns (ok, reason-if-not).

    Recomputes dominance with the garbling feasibility program and both
    expected payoffs from the raw experiments (posteriors via Bayes, one
    welfare evaluation per support point, no pushforward shortcut); none
    of the auditor's intermediate state is reused.
    """
    try:
        mu = c.prior
        if not mu.is_interior():
            return False, "prior"
        if c.pi.n_states != mu.n or c.pi_prime.n_states != mu.n or c.problem.n_states != mu.n:
            return False, "malformed"
    except Exception:
        return False, "malformed"
    if not blackwell_dominates(c.pi, c.pi_prime, tol=1e-8):
        return False, "dominance"
    try:
        rho = bayes(mu, c.pi)
        rho_p = bayes(mu, c.pi_prime)
        gap = expected_payoff(c.problem, c.rule, mu, c.selector, c.mode, rho) - expected_payoff(
            c.problem, c.rule, mu, c.selector, c.mode, rho_p
        )
    except Exception:
        return False, "malformed"
    if abs(gap - c.gap) > 1e-9:
        return False, "gap-mismatch"
    if gap > -tol:
        return False, "gap-too-small"
    return True, None


def _try_pair(
    d: Distortion,
    mu: np.ndarray,
    sel: Selector,
    mode: WelfareMode,
    rho_hi: PosteriorDistribution,
    rho_lo: PosteriorDistribution,
    problem: DecisionProblem,
    recipe: str,
    seed: int,
) -> Optional[ViolationCertificate]:
    """Materialize a candidate pair as experiments; keep it only if it verifies."""
    try:
        pi = experiment_from_posteriors(rho_hi, mu)
        pi_p = experiment_from_posteriors(rho_lo, mu)
    except (BarycenterMismatch, ValueError):
        return None
    gap = expected_payoff(problem, d, mu, sel, mode, bayes(mu, pi)) - expected_payoff(
        problem, d, mu, sel, mode, bayes(mu, pi_p)
    )
    if gap > -GAP_TOL:
        return None
    cert = ViolationCertificate(
        prior=Belief(mu),
        rule=d,
        pi=pi,
        pi_prime=pi_p,
        problem=problem,
        selector=sel,
        mode=mode,
        gap=float(gap),
        recipe=recipe,
        seed=seed,
    )
    ok, _ = verify_certificate(cert)
    return cert if ok else None


# ---------------------------------------------------------------------------
# Scaffolding
# ---------------------------------------------------------------------------


def _tangent_basis(n: int) -> np.ndarray:
    """Orthonormal basis (rows) of the simplex tangent space {v : sum v = 0}."""
    ones = np.ones((1, n)) / np.sqrt(n)
    proj = np.eye(n) - ones.T @ ones
    u, s, _ = np.linalg.svd(proj)
    return u[:, :-1].T if s[-1] < 0.5 else u.T  # last singular value is 0


def _spread_directions(u: np.ndarray, n: int, kappa: float = 0.9) -> np.ndarray:
    """n-1 tangent directions averaging to u, fanned symmetrically around it."""
    if n == 2:
        return u[None, :]
    basis = _tangent_basis(n)
    coords = basis @ u
    perp = basis.T - np.outer(u, coords) / max(float(coords @ coords), 1e-300)
    pu, ps, _ = np.linalg.svd(perp, full_matrices=False)
    P = pu[:, ps > 1e-9].T[: n - 2]  # (n-2, n) orthonormal, perpendicular to u
    m = n - 1
    centered = np.eye(m) - 1.0 / m
    _, _, vt = np.linalg.svd(centered)
    flat = centered @ vt[: m - 1].T  # m regular-simplex vertices, zero sum
    return u[None, :] + kappa * (flat @ P)


def _fit_inside(mu: np.ndarray, dirs: np.ndarray, eps: float) -> np.ndarray:
    """Scale the step down until every mu + step * dir stays inside the simplex."""
    step = eps
    for _ in range(40):
        pts = mu[None, :] + step * dirs
        if np.min(pts) > 1e-9:
            return pts
        step *= 0.5
    raise InfeasibleWeights("could not fit scaffold inside the simplex")


def _plausible(support: np.ndarray, mu: np.ndarray) -> Optional[PosteriorDistribution]:
    """Unique positive weights giving the support barycenter mu, if any."""
    A = np.vstack([support.T, np.ones((1, support.shape[0]))])
    b = np.concatenate([mu, [1.0]])
    w, *_ = np.linalg.lstsq(A, b, rcond=None)
    if np.max(np.abs(A @ w - b)) > 1e-9 or np.min(w) < 1e-9:
        return None
    try:
        return PosteriorDistribution(support, w)
    except ValueError:
        return None


def _scaffold(mu: np.ndarray, x0: np.ndarray, eps: float) -> Optional[PosteriorDistribution]:
    """Distribution on {x0} + (n-1) points near the prior, mean = prior."""
    u = mu - x0
    nrm = float(np.linalg.norm(u))
    if nrm < 1e-9:
        return None
    dirs = _spread_directions(u / nrm, mu.shape[0])
    try:
        pts = _fit_inside(mu, dirs, eps)
    except InfeasibleWeights:
        return None
    return _plausible(np.vstack([x0[None, :], pts]), mu)


def _vertex_pulled_scaffold(
    mu: np.ndarray, x0: np.ndarray, pull: float
) -> Optional[PosteriorDistribution]:
    """Distribution on {x0} + pulled-in vertices, mean = prior.

    Wide scaffold for the contraction recipes, where the moved edge point
    must sit well off the line through the prior and the error.
    """
    n = mu.shape[0]
    for drop in np.argsort(-np.abs(x0 - mu), kind="stable"):
        idx = [i for i in range(n) if i != drop]
        verts = (1.0 - pull) * np.eye(n)[idx] + pull * mu[None, :]
        rho = _plausible(np.vstack([x0[None, :], verts]), mu)
        if rho is not None and rho.size == n:
            return rho
    return None


def _moved_point(rho: PosteriorDistribution, x0: np.ndarray, gamma: float, target: np.ndarray):
    """bring_point_in, with the moved point's coordinates returned alongside."""
    moved = gamma * x0 + (1.0 - gamma) * target
    try:
        rho_new = bring_point_in(rho, 0, gamma, target)
    except (InfeasibleWeights, NotAffinelyIndependent, TargetOutsideOppositeHull, ValueError):
        return None, moved
    return rho_new, moved


# ---------------------------------------------------------------------------
# Expansive recipes
# ---------------------------------------------------------------------------


def _audit_expansive(
    d: Distortion,
    mu: np.ndarray,
    x0: np.ndarray,
    budget: _Budget,
    sel: Selector,
    mode: WelfareMode,
    tol: float,
    seed: int,
) -> Optional[ViolationCertificate]:
    img0 = evaluate_batch(d, mu, x0[None, :])[0]
    if np.max(np.abs(x0 - mu)) <= tol:
        return _audit_prior_error(d, mu, budget, sel, mode, tol, seed)

    eps0 = 0.05 * np.sqrt(2.0)  # nearness in simplex-diameter units
    for eps in (eps0, eps0 / 2.0, eps0 / 4.0):
        rho = _scaffold(mu, x0, eps)
        if rho is None:
            continue
        others = rho.support[1:]
        if in_convex_hull(img0, rho.support, tol=1e-7):
            continue  # image not banished at this scaffold width
        imgs_others = evaluate_batch(d, mu, others)
        target = others.mean(axis=0)
        for gamma in (0.6, 0.35, 0.15):
            rho_p, x0p = _moved_point(rho, x0, gamma, target)
            if rho_p is None:
                continue
            img0p = evaluate_batch(d, mu, x0p[None, :])[0]

            if np.max(np.abs(img0p - img0)) > tol:
                # A shared destination would sit on both sides: skip the cut.
                budget.charge()
                hull_set = np.vstack([rho.support, imgs_others, img0p[None, :]])
                try:
                    h = separating_hyperplane(img0, hull_set, margin=SEP_MARGIN)
                    cert = _try_pair(
                        d, mu, sel, mode, rho, rho_p, hyperplane_problem(h), "claim1-hyperplane", seed
                    )
                    if cert is not None:
                        return cert
                except NoStrictSeparation:
                    pass

            rho_pp, x0pp = _moved_point(rho, x0, gamma / 2.0, target)
            if rho_pp is None:
                continue
            img0pp = evaluate_batch(d, mu, x0pp[None, :])[0]
            if np.max(np.abs(img0pp - img0p)) <= tol:
                continue  # same destination: consistent with a collapse rule

            budget.charge()
            kite = np.vstack([rho_p.support, imgs_others, img0pp[None, :]])
            try:
                h = separating_hyperplane(img0p, kite, margin=SEP_MARGIN)
                cert = _try_pair(
                    d, mu, sel, mode, rho_p, rho_pp, hyperplane_problem(h), "claim2-separation", seed
                )
                if cert is not None:
                    return cert
            except NoStrictSeparation:
                pass

            budget.charge()
            base = np.vstack([rho_p.support, imgs_others, img0p[None, :]])
            try:
                h = separating_hyperplane(img0pp, base, margin=SEP_MARGIN)
            except NoStrictSeparation:
                continue
            # Mixture on {x0, x0pp, others}: collapsing the first two onto
            # x0p reproduces rho_p, making rho_p its strict contraction.
            lam = gamma / (2.0 - gamma)  # x0p = lam * x0 + (1 - lam) * x0pp
            q = float(rho_p.probs[0])
            mix_support = np.vstack([x0[None, :], x0pp[None, :], rho_p.support[1:]])
            mix_probs = np.concatenate([[q * lam, q * (1.0 - lam)], rho_p.probs[1:]])
            try:
                rho_mix = PosteriorDistribution(mix_support, mix_probs)
            except ValueError:
                continue
            cert = _try_pair(
                d, mu, sel, mode, rho_mix, rho_p, hyperplane_problem(h), "claim3-mixture", seed
            )
            if cert is not None:
                return cert
    return None


def _audit_prior_error(
    d: Distortion,
    mu: np.ndarray,
    budget: _Budget,
    sel: Selector,
    mode: WelfareMode,
    tol: float,
    seed: int,
) -> Optional[ViolationCertificate]:
    """The prior itself is misread: two-stage contraction pair around it."""
    img_mu = evaluate_batch(d, mu, mu[None, :])[0]
    drift = img_mu - mu
    if np.max(np.abs(drift)) <= tol:
        return None
    basis = _tangent_basis(mu.shape[0])
    # The tangent direction least aligned with the drift keeps the image separable.
    v = basis[int(np.argmin(np.abs(basis @ drift)))]
    step_bound = np.where(np.abs(v) > 1e-12, np.minimum(1.0 - mu, mu) / np.abs(v), np.inf)
    t = 0.8 * float(np.min(step_bound))
    x1 = mu + t * v
    x2 = mu - t * v
    x3 = 0.5 * (x1 + mu)
    x4 = 0.5 * (x2 + mu)
    pts = np.vstack([x1, x2, x3, x4])
    imgs = evaluate_batch(d, mu, pts)
    budget.charge()
    try:
        h = separating_hyperplane(img_mu, np.vstack([pts[:2], imgs]), margin=SEP_MARGIN)
    except NoStrictSeparation:
        return None
    rho_hi = PosteriorDistribution(np.vstack([x1, x2, mu]), [0.25, 0.25, 0.5])
    rho_lo = PosteriorDistribution(np.vstack([x3, x4]), [0.5, 0.5])
    return _try_pair(d, mu, sel, mode, rho_hi, rho_lo, hyperplane_problem(h), "degenerate-prior", seed)


# ---------------------------------------------------------------------------
# Contractive recipes
# ---------------------------------------------------------------------------


def _threshold_problem(direction: float, cutoff: float) -> DecisionProblem:
    """Two-state threshold problem max(0, dir * (x - cutoff)) in the scalar coordinate."""
    normal = np.array([direction, 0.0])
    return hyperplane_problem(Hyperplane(normal, direction * cutoff))


def _audit_contractive_two_state(
    d: Distortion,
    mu: np.ndarray,
    x0: np.ndarray,
    budget: _Budget,
    sel: Selector,
    mode: WelfareMode,
    tol: float,
    seed: int,
) -> Optional[ViolationCertificate]:
    m = float(mu[0])
    z = float(x0[0])
    direction = 1.0 if z > m else -1.0
    far = 0.0 if direction > 0 else 1.0  # scalar coordinate of the opposite vertex

    def belief(t: float) -> np.ndarray:
        return np.array([t, 1.0 - t])

    def phi(t: float) -> float:
        return float(evaluate_batch(d, mu, belief(t)[None, :])[0][0])

    zhat = phi(z)
    for k in range(1, 9):
        zp = zhat + (z - zhat) * k / 9.0
        zp_hat = phi(zp)
        if direction * (zp_hat - zhat) > tol:
            # A less extreme posterior lands on a more extreme belief.
            cutoff = 0.5 * (zp_hat + zhat)
            rho_hi = _plausible(np.vstack([belief(far), belief(z)]), mu)
            rho_lo = _plausible(np.vstack([belief(far), belief(zp)]), mu)
            if rho_hi is None or rho_lo is None:
                continue
            budget.charge()
            cert = _try_pair(
                d, mu, sel, mode, rho_hi, rho_lo,
                _threshold_problem(direction, cutoff), "lemma3-threshold", seed,
            )
            if cert is not None:
                return cert
            continue
        for j in range(1, 6):
            zpp = zp_hat + (zp - zp_hat) * j / 6.0
            zpp_hat = phi(zpp)
            if direction * (zp_hat - zpp_hat) <= tol:
                continue
            # Ternary comparison: {far, zpp, z} against the binary {far, zp}.
            cutoff = 0.5 * (zp_hat + zpp_hat)
            rho_lo = _plausible(np.vstack([belief(far), belief(zp)]), mu)
            if rho_lo is None:
                continue
            p = float(rho_lo.probs[1])
            if abs(z - zpp) < 1e-12:
                continue
            q_z = p * (zp - zpp) / (z - zpp)
            q_zpp = p - q_z
            if min(q_z, q_zpp) < 1e-9:
                continue
            try:
                rho_hi = PosteriorDistribution(
                    np.vstack([belief(far), belief(zpp), belief(z)]), [1.0 - p, q_zpp, q_z]
                )
            except ValueError:
                continue
            budget.charge()
            cert = _try_pair(
                d, mu, sel, mode, rho_hi, rho_lo,
                _threshold_problem(direction, cutoff), "lemma3-ternary", seed,
            )
            if cert is not None:
                return cert
    return None


def _audit_contractive_many_states(
    d: Distortion,
    mu: np.ndarray,
    x0: np.ndarray,
    budget: _Budget,
    sel: Selector,
    mode: WelfareMode,
    tol: float,
    seed: int,
) -> Optional[ViolationCertificate]:
    img0 = evaluate_batch(d, mu, x0[None, :])[0]
    for pull in (0.25, 0.45):
        rho = _vertex_pulled_scaffold(mu, x0, pull)
        if rho is None:
            continue
        for s in range(1, rho.size):
            xs = rho.support[s]
            for frac in (0.8, 0.6):
                rho_p, x0p = _moved_point(rho, x0, frac, xs)
                if rho_p is None:
                    continue
                img0p = evaluate_batch(d, mu, x0p[None, :])[0]
                if np.max(np.abs(img0p - mu)) <= tol:
                    continue  # edge point mapped to the prior: consistent
                if np.max(np.abs(img0p - img0)) <= tol:
                    continue  # shared destination would sit on both sides
                budget.charge()
                try:
                    h = separating_hyperplane_sets(
                        [img0p, x0p, x0], [img0, mu], margin=SEP_MARGIN
                    )
                except NoStrictSeparation:
                    continue
                cert = _try_pair(
                    d, mu, sel, mode, rho, rho_p, hyperplane_problem(h),
                    "contagion1-separation", seed,
                )
                if cert is not None:
                    return cert
    return None


def audit_expansive(
    d: Distortion,
    mu,
    x0,
    budget: int = 200,
    sel: Optional[Selector] = None,
    mode: WelfareMode = WelfareMode.SINGLE,
    tol: float = TOL_GEO,
    seed: int = 0,
) -> ViolationCertificate:
    """Certificate synthesis from one expansive error; raises BudgetExhausted."""
    mua = _coerce(mu)
    x0a = _coerce(x0)
    sel = sel or Selector()
    mode = WelfareMode(mode)
    if classify_error(d, mua, x0a, tol).kind != "expansive":
        raise ValueError("x0 must carry an expansive error")
    tracker = _Budget(budget)
    try:
        cert = _audit_expansive(d, mua, x0a, tracker, sel, mode, tol, seed)
    except BudgetExhausted:
        cert = None
    if cert is None:
        raise BudgetExhausted("no construction produced a verified certificate")
    return cert


def audit_contractive(
    d: Distortion,
    mu,
    x0,
    budget: int = 200,
    sel: Optional[Selector] = None,
    mode: WelfareMode = WelfareMode.SINGLE,
    tol: float = TOL_GEO,
    seed: int = 0,
) -> ViolationCertificate:
    """Certificate synthesis from one contractive error; raises BudgetExhausted."""
    mua = _coerce(mu)
    x0a = _coerce(x0)
    sel = sel or Selector()
    mode = WelfareMode(mode)
    if classify_error(d, mua, x0a, tol).kind != "contractive":
        raise ValueError("x0 must carry a contractive error")
    tracker = _Budget(budget)
    try:
        if mua.shape[0] == 2:
            cert = _audit_contractive_two_state(d, mua, x0a, tracker, sel, mode, tol, seed)
        else:
            cert = _audit_contractive_many_states(d, mua, x0a, tracker, sel, mode, tol, seed)
    except BudgetExhausted:
        cert = None
    if cert is None:
        raise BudgetExhausted("no construction produced a verified certificate")
    return cert


# ---------------------------------------------------------------------------
# Full audit
# ---------------------------------------------------------------------------


@dataclass
class AuditReport:
    verdict: str  # "pass" or "violation"
    certificate: Optional[ViolationCertificate]
    checker_verdicts: dict
    error_census: dict
    budget_used: int
    grid_points: int
    states: int
    prior: Belief
    mode: WelfareMode
    seed: int

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "certificate": self.certificate.to_json() if self.certificate else None,
            "checker_verdicts": self.checker_verdicts,
            "error_census": self.error_census,
            "budget_used": self.budget_used,
            "grid_points": self.grid_points,
            "states": self.states,
            "prior": self.prior.to_json(),
            "mode": self.mode.value,
            "seed": self.seed,
        }


def _vertex_condition_certificate(
    d: Distortion,
    mu: np.ndarray,
    x_star: np.ndarray,
    budget: _Budget,
    sel: Selector,
    mode: WelfareMode,
    tol: float,
    seed: int,
) -> Optional[ViolationCertificate]:
    """Erring vertex whose image leaves the segment toward the collapse point."""
    n = mu.shape[0]
    verts = np.eye(n)
    vert_imgs = evaluate_batch(d, mu, verts)
    for i in range(n):
        e = verts[i]
        img = vert_imgs[i]
        if np.max(np.abs(img - e)) <= tol:
            continue
        if on_segment(x_star, e, img, tol=max(tol, 1e-9)).on:
            continue
        budget.charge()
        try:
            h = separating_hyperplane(
                img, np.vstack([e[None, :], x_star[None, :], mu[None, :]]), margin=SEP_MARGIN
            )
        except NoStrictSeparation:
            continue
        # Reveal-state-i experiment versus a slightly blurred contraction of it.
        for p in (0.5 * float(mu[i]), 0.25 * float(mu[i])):
            y = (mu - p * e) / (1.0 - p)
            if np.min(y) <= 1e-9:
                continue
            rho_hi = PosteriorDistribution(np.vstack([e, y]), [p, 1.0 - p])
            z = 0.9 * e + 0.1 * y
            rho_lo = _plausible(np.vstack([z, y]), mu)
            if rho_lo is None:
                continue
            cert = _try_pair(
                d, mu, sel, mode, rho_hi, rho_lo, hyperplane_problem(h),
                "vertexprop-separation", seed,
            )
            if cert is not None:
                return cert
    return None


def _lean_expected_welfare(
    d: Distortion,
    mu: np.ndarray,
    payoff: np.ndarray,
    mode: WelfareMode,
    lik: np.ndarray,
) -> float:
    """Fast lex-first welfare of a raw likelihood matrix (trial screening only)."""
    marginal = mu @ lik
    keep = marginal > 1e-15
    posts = ((mu[:, None] * lik[:, keep]) / marginal[keep][None, :]).T
    imgs = d.apply_batch(mu, posts)
    scores = imgs @ payoff.T
    if mode is WelfareMode.DOUBLE:
        w = scores.max(axis=1)
    else:
        choice = (scores >= scores.max(axis=1, keepdims=True) - 1e-10).argmax(axis=1)
        w = np.einsum("ij,ij->i", payoff[choice], posts)
    return float(marginal[keep] @ w)


def _random_search(
    d: Distortion,
    mu: np.ndarray,
    budget: _Budget,
    sel: Selector,
    mode: WelfareMode,
    seed: int,
) -> Optional[ViolationCertificate]:
    """Randomized fallback: random garbled pairs against threshold problems."""
    n = mu.shape[0]
    rng = np.random.default_rng(seed)
    fast = sel.policy.value == "lex-first" and not sel.pins
    while budget.remaining > 0:
        budget.charge()
        k = int(rng.integers(2, 5))
        lik = rng.dirichlet(np.ones(k), size=n)
        kp = int(rng.integers(1, k + 1))
        channel = rng.dirichlet(np.ones(kp), size=k)
        lik_p = lik @ channel
        point = rng.dirichlet(np.ones(n))
        normal = rng.normal(size=n)
        normal -= normal.mean()
        scale = float(np.max(np.abs(normal)))
        if scale < 1e-9:
            continue
        normal /= scale
        problem = hyperplane_problem(Hyperplane(normal, float(normal @ point)))
        try:
            if fast:
                gap = _lean_expected_welfare(d, mu, problem.payoff, mode, lik) - _lean_expected_welfare(
                    d, mu, problem.payoff, mode, lik_p
                )
            else:
                gap = expected_payoff(problem, d, mu, sel, mode, bayes(mu, Experiment(lik))) - expected_payoff(
                    problem, d, mu, sel, mode, bayes(mu, Experiment(lik_p))
                )
        except (ValueError, BarycenterMismatch):
            continue
        if gap > -GAP_TOL:
            continue
        # Candidate: rebuild through the standard objects and re-verify.
        pi = Experiment(lik)
        pi_p = garble(pi, GarblingMatrix(channel))
        gap = expected_payoff(problem, d, mu, sel, mode, bayes(mu, pi)) - expected_payoff(
            problem, d, mu, sel, mode, bayes(mu, pi_p)
        )
        if gap > -GAP_TOL:
            continue
        cert = ViolationCertificate(
            prior=Belief(mu), rule=d, pi=pi, pi_prime=pi_p, problem=problem,
            selector=sel, mode=mode, gap=float(gap), recipe="random-search", seed=seed,
        )
        ok, _ = verify_certificate(cert)
        if ok:
            return cert
    return None


def audit(
    d: Distortion,
    mu,
    grid_size: int = 101,
    budget: int = 5000,
    mode: WelfareMode = WelfareMode.SINGLE,
    seed: int = 0,
    sel: Optional[Selector] = None,
    tol: float = TOL_GEO,
    samples_per_face: int = 24,
    max_dispatch: int = 16,
) -> AuditReport:
    """Scan a rule for order violations at one prior.

    Classifies every lattice belief, dispatches detected errors to the
    constructive recipes (largest error first), checks erring vertices
    against the collapse-point segment condition, and spends any
    budget on randomized search.  Absence of a certificate is a pass
    (with structural checker verdicts attached), never an error.
    """
    mua = _coerce(mu)
    n = mua.shape[0]
    if np.min(mua) <= 0.0:
        raise ValueError("audit requires a full-support prior")
    sel = sel or Selector()
    mode = WelfareMode(mode)

    grid = simplex_lattice(n, grid_size)
    kinds_all = np.empty(grid.shape[0], dtype=np.int8)
    mags_all = np.empty(grid.shape[0])
    chunk = 500_000
    for lo in range(0, grid.shape[0], chunk):
        part = grid[lo : lo + chunk]
        kinds, imgs, _ = classify_batch(d, mua, part, tol)
        kinds_all[lo : lo + chunk] = kinds
        mags_all[lo : lo + chunk] = np.max(np.abs(imgs - part), axis=1)
    census = {
        "none": int(np.sum(kinds_all == 0)),
        "expansive": int(np.sum(kinds_all == 1)),
        "contractive": int(np.sum(kinds_all == 2)),
    }

    checker_verdicts: dict = {}
    if n == 2:
        checker_verdicts["occasionally_coarse"] = is_occasionally_coarse(
            d, mua, grid_size=max(grid_size, 100), tol=max(tol, 1e-9)
        ).to_json()
    else:
        checker_verdicts["occasionally_stubborn"] = is_occasionally_stubborn(
            d, mua, samples_per_face=samples_per_face, tol=max(tol, 1e-9)
        ).to_json()
    checker_verdicts["trivial_on_interior"] = is_trivial_on_interior(d, mua, tol=max(tol, 1e-9))
    checker_verdicts["affine"] = is_affine(d, mua)

    tracker = _Budget(budget)
    certificate: Optional[ViolationCertificate] = None

    def report(cert: Optional[ViolationCertificate]) -> AuditReport:
        return AuditReport(
            verdict="violation" if cert else "pass",
            certificate=cert,
            checker_verdicts=checker_verdicts,
            error_census=census,
            budget_used=tracker.used,
            grid_points=grid.shape[0],
            states=n,
            prior=Belief(mua),
            mode=mode,
            seed=seed,
        )

    try:
        # A misread prior is the degenerate starting point.
        if classify_error(d, mua, mua, tol).kind != "none":
            certificate = _audit_prior_error(d, mua, tracker, sel, mode, tol, seed)
            if certificate is not None:
                return report(certificate)

        handlers = (
            (1, _audit_expansive),
            (2, _audit_contractive_two_state if n == 2 else _audit_contractive_many_states),
        )
        for kind_code, handler in handlers:
            idx = np.nonzero(kinds_all == kind_code)[0]
            if idx.size == 0:
                continue
            order = idx[np.lexsort((idx, -mags_all[idx]))][:max_dispatch]
            for gi in order:
                certificate = handler(d, mua, grid[gi], tracker, sel, mode, tol, seed)
                if certificate is not None:
                    return report(certificate)

        # Vertex images must stay on the segment toward the collapse point.
        star = None
        sv = checker_verdicts.get("occasionally_stubborn")
        if sv and sv.get("x_star") is not None:
            star = np.asarray(sv["x_star"], dtype=np.float64)
        elif checker_verdicts["trivial_on_interior"] and n >= 3:
            star = evaluate_batch(d, mua, mua[None, :])[0]
        if star is not None and n >= 3:
            certificate = _vertex_condition_certificate(d, mua, star, tracker, sel, mode, tol, seed)
            if certificate is not None:
                return report(certificate)

        certificate = _random_search(d, mua, tracker, sel, mode, seed)
    except BudgetExhausted:
        certificate = None
    return report(certificate)
