"""End-to-end perturbation experiments on commuting Hermitian pairs.

Given a commuting pair (A1, A2) and a commuting perturbation (B1, B2),
the central identity represents f(B1, B2) - f(A1, A2) as the sum of two
double operator integrals whose arguments are the weighted difference
quotients of f and the relative perturbations (B_j - A_j)(A_j + iI)^{-1}.
This module verifies that identity, measures how the deviation norm
compares to the product of Besov weights and relative-bound factors,
tracks Schatten-norm ratios, reproduces the bounded-versus-real-part
counterexample, and runs seeded ensembles of all of the above.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .besov import GridSpec, besov_norm_estimate, build_w
from .doi import doi_evaluate
from .errors import (
    ConfigError,
    DimensionMismatch,
    DoilabError,
    InvalidP,
    ZeroPerturbation,
)
from .spectral import (
    CommutingPair,
    functional_calculus,
    haar_unitary,
    joint_diagonalize,
    random_commuting_pair,
    require_hermitian,
)
from .symbols import (
    Function2,
    divided_diff_symbol_var1,
    divided_diff_symbol_var2,
    function_from_config,
    multiply,
    poly,
)

__all__ = [
    "BoundReport",
    "EnsembleReport",
    "EnsembleSpec",
    "IdentityReport",
    "SchattenReport",
    "TrialRow",
    "TruncationRow",
    "bound_ratio",
    "counterexample_scan",
    "ensemble_csv_rows",
    "perturbed_pair",
    "relative_bound_factor",
    "run_ensemble",
    "schatten_norm",
    "schatten_ratio",
    "schatten_report",
    "truncation_convergence",
    "verify_identity",
]

CSV_COLUMNS = (
    "trial",
    "n",
    "seed",
    "relResidual",
    "factor1",
    "factor2",
    "deviationNorm",
    "besovG1",
    "besovG2",
    "ratio",
    "p",
    "schattenRatio",
)


def _opnorm(x) -> float:
    return float(np.linalg.norm(x, 2)) if np.asarray(x).size else 0.0


def _resolvent_product(X, Y) -> np.ndarray:
    """(Y - X)(X + iI)^{-1}; the imaginary shift keeps X + iI invertible."""
    n = X.shape[0]
    c = X + 1j * np.eye(n)
    return np.linalg.solve(c.T, (Y - X).T).T


def relative_bound_factor(Aj, Bj) -> float:
    """Relative-bound factor ||(Bj - Aj)(Aj + iI)^{-1}||."""
    a = require_hermitian(Aj)
    b = require_hermitian(Bj)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes differ: {a.shape} vs {b.shape}")
    return _opnorm(_resolvent_product(a, b))


def schatten_norm(X, p) -> float:
    """Schatten p-norm (sum of sigma^p)^(1/p); p = inf gives the largest sigma."""
    X = np.asarray(X, dtype=complex)
    if X.ndim != 2:
        raise DimensionMismatch(f"expected a matrix, got ndim {X.ndim}")
    p = float(p)
    if math.isnan(p) or p < 1.0:
        raise InvalidP(f"Schatten index must satisfy p >= 1, got {p}")
    if X.size == 0:
        return 0.0
    sv = np.linalg.svd(X, compute_uv=False)
    if math.isinf(p):
        return float(sv[0])
    return float(np.sum(sv**p) ** (1.0 / p))


# ---------------------------------------------------------------------------
# the identity


@dataclass(frozen=True)
class IdentityReport:
    """Residual of the two-term representation of f(B1,B2) - f(A1,A2).

    term_norms holds the operator norms of the second-variable and
    first-variable integral terms, in that order.
    """

    lhs_norm: float
    rhs_norm: float
    abs_residual: float
    rel_residual: float
    term_norms: tuple
    tol: float
    passed: bool


def _identity_parts(pairA: CommutingPair, pairB: CommutingPair, f: Function2):
    specA = joint_diagonalize(pairA)
    specB = joint_diagonalize(pairB)
    lhs = functional_calculus(specB, f) - functional_calculus(specA, f)
    q2 = _resolvent_product(pairA.A2, pairB.A2)
    q1 = _resolvent_product(pairA.A1, pairB.A1)
    term2 = doi_evaluate(specB, specA, divided_diff_symbol_var2(f), q2)
    term1 = doi_evaluate(specB, specA, divided_diff_symbol_var1(f), q1)
    return specA, specB, lhs, term2, term1


def verify_identity(pairA, pairB, f: Function2, tol: float = 1e-9) -> IdentityReport:
    """Check f(B1,B2) - f(A1,A2) against its double-integral representation.

    The relative residual divides by max(lhs norm, 1e-300), so an exactly
    zero left side with an exactly zero right side reports 0.
    """
    tol = float(tol)
    _, _, lhs, term2, term1 = _identity_parts(pairA, pairB, f)
    rhs = term2 + term1
    lhs_norm = _opnorm(lhs)
    abs_residual = _opnorm(lhs - rhs)
    rel_residual = abs_residual / max(lhs_norm, 1e-300)
    return IdentityReport(
        lhs_norm=lhs_norm,
        rhs_norm=_opnorm(rhs),
        abs_residual=abs_residual,
        rel_residual=rel_residual,
        term_norms=(_opnorm(term2), _opnorm(term1)),
        tol=float(tol),
        passed=bool(rel_residual <= tol),
    )


# ---------------------------------------------------------------------------
# bound and Schatten ratios


@dataclass(frozen=True)
class BoundReport:
    """Deviation norm against Besov weights times relative-bound factors.

    ratio normalizes by the SUM of the two weight norms, ratio_max_g by
    their max; both denominators carry max(factors).  The grid spec is
    embedded because ratios are only comparable at equal configuration.
    """

    deviation_norm: float
    factors: tuple
    besov_g1: float
    besov_g2: float
    ratio: float
    ratio_max_g: float
    grid_spec: GridSpec


def besov_weights(f: Function2, grid=None, w=None, n_range=None):
    """Besov totals of g1(s,t) = f(s,t)(s+i) and g2(s,t) = f(s,t)(t+i)."""
    grid = GridSpec() if grid is None else grid
    w = build_w() if w is None else w
    g1 = multiply(f, poly([[1j], [1.0]]))
    g2 = multiply(f, poly([[1j, 1.0]]))
    e1 = besov_norm_estimate(g1, grid, w, n_range)
    e2 = besov_norm_estimate(g2, grid, w, n_range)
    return e1.total, e2.total, grid


def _safe_ratio(num: float, den: float) -> float:
    if den > 1e-300:
        return num / den
    return 0.0 if num == 0.0 else math.inf


def _bound_report(pairA, pairB, bg1, bg2, grid, f) -> BoundReport:
    f1 = relative_bound_factor(pairA.A1, pairB.A1)
    f2 = relative_bound_factor(pairA.A2, pairB.A2)
    specA = joint_diagonalize(pairA)
    specB = joint_diagonalize(pairB)
    dev = _opnorm(functional_calculus(specB, f) - functional_calculus(specA, f))
    fmax = max(f1, f2)
    return BoundReport(
        deviation_norm=dev,
        factors=(f1, f2),
        besov_g1=bg1,
        besov_g2=bg2,
        ratio=_safe_ratio(dev, (bg1 + bg2) * fmax),
        ratio_max_g=_safe_ratio(dev, max(bg1, bg2) * fmax),
        grid_spec=grid,
    )


def bound_ratio(pairA, pairB, f: Function2, besov_config=None) -> BoundReport:
    """Empirical constant candidate for the deviation bound.

    besov_config may carry L, N, n_range, sharpness; defaults come from
    the grid module.
    """
    cfg = dict(besov_config or {})
    grid = GridSpec(L=cfg.pop("L", GridSpec.L), N=cfg.pop("N", GridSpec.N))
    n_range = cfg.pop("n_range", None)
    w = build_w(cfg.pop("sharpness", 1.0))
    if cfg:
        raise ConfigError(f"unknown besov config keys: {sorted(cfg)}")
    bg1, bg2, grid = besov_weights(f, grid, w, n_range)
    return _bound_report(pairA, pairB, bg1, bg2, grid, f)


@dataclass(frozen=True)
class SchattenReport:
    """Schatten-p deviation ratio plus the resolvent-product hypotheses.

    hyp_factors holds ||(Bj - Aj)(Aj + iI)^{-1}||_p for j = 1, 2; the
    denominator of ratio is max_j ||Bj - Aj||_p.
    """

    p: float
    numerator: float
    denominator: float
    ratio: float
    hyp_factors: tuple


def schatten_report(pairA, pairB, f: Function2, p) -> SchattenReport:
    p = float(p)
    specA = joint_diagonalize(pairA)
    specB = joint_diagonalize(pairB)
    num = schatten_norm(functional_calculus(specB, f) - functional_calculus(specA, f), p)
    den = max(
        schatten_norm(pairB.A1 - pairA.A1, p),
        schatten_norm(pairB.A2 - pairA.A2, p),
    )
    hyp = (
        schatten_norm(_resolvent_product(pairA.A1, pairB.A1), p),
        schatten_norm(_resolvent_product(pairA.A2, pairB.A2), p),
    )
    if den == 0.0:
        if num > 1e-12:
            raise ZeroPerturbation(
                f"zero perturbation produced a nonzero deviation ({num:.3e})"
            )
        ratio = 0.0
    else:
        ratio = num / den
    return SchattenReport(p=p, numerator=num, denominator=den, ratio=ratio, hyp_factors=hyp)


def schatten_ratio(pairA, pairB, f: Function2, p) -> float:
    """||f(B1,B2) - f(A1,A2)||_p / max_j ||Bj - Aj||_p."""
    return schatten_report(pairA, pairB, f, p).ratio


# ---------------------------------------------------------------------------
# counterexample and truncation


@dataclass(frozen=True)
class CounterexampleRow:
    n: int
    full_factor: float
    re_factor: float


def counterexample_scan(n_list) -> list:
    """Bounded full perturbation whose real part has diverging factor.

    For A = diag(1..n), N = iA, M = A + iA the full relative-bound factor
    ||(M - N)(N + iI)^{-1}|| stays below 1 (value n/(n+1)) while the real
    parts give ||(Re M - Re N)(Re N + iI)^{-1}|| = n.
    """
    n_list = [int(n) for n in n_list]
    if not n_list:
        raise ConfigError("need at least one dimension to scan")
    rows = []
    for n in n_list:
        if n < 1:
            raise ConfigError(f"dimension must be >= 1, got {n}")
        a = np.diag(np.arange(1, n + 1).astype(complex))
        nn = 1j * a
        m = a + 1j * a
        full = _opnorm(_resolvent_product(nn, m))
        re_n = (nn + nn.conj().T) / 2.0
        re_m = (m + m.conj().T) / 2.0
        re = _opnorm(_resolvent_product(re_n, re_m))
        rows.append(CounterexampleRow(n=n, full_factor=full, re_factor=re))
    return rows


@dataclass(frozen=True)
class TruncationRow:
    cutoff: float
    residual: float


def truncation_convergence(pairA, pairB, f: Function2, cutoffs) -> list:
    """Residual of the identity compressed by spectral cutoff projections.

    For each cutoff M the B-side projection keeps joint eigenvalue pairs
    with both |y1|, |y2| <= M and the A-side analog; the row reports the
    operator norm of projection * (rhs - lhs) * projection.  Once M
    exceeds both spectral radii the projections are the identity and the
    residual equals the plain identity residual.
    """
    specA, specB, lhs, term2, term1 = _identity_parts(pairA, pairB, f)
    diff = (term2 + term1) - lhs
    rows = []
    for m in cutoffs:
        m = float(m)
        bmask = (np.abs(specB.x1) <= m) & (np.abs(specB.x2) <= m)
        amask = (np.abs(specA.x1) <= m) & (np.abs(specA.x2) <= m)
        compressed = diff
        if not bmask.all():
            p = (specB.basis * bmask) @ specB.basis.conj().T
            compressed = p @ compressed
        if not amask.all():
            q = (specA.basis * amask) @ specA.basis.conj().T
            compressed = compressed @ q
        rows.append(TruncationRow(cutoff=m, residual=_opnorm(compressed)))
    return rows


# ---------------------------------------------------------------------------
# ensembles


def perturbed_pair(pairA: CommutingPair, perturb_scale: float, seed: int) -> CommutingPair:
    """Commuting perturbation of pairA with tunable size.

    Rotates the joint eigenbasis by exp(i * scale * H) for a unit-norm
    Gaussian Hermitian H and shifts each eigenvalue list by uniform draws
    in [-scale, scale]; the result commutes exactly by construction.
    Scale 0 returns pairA itself so zero perturbation is exact.
    """
    scale = float(perturb_scale)
    if scale < 0.0:
        raise ConfigError(f"perturbation scale must be >= 0, got {scale}")
    if scale == 0.0:
        return pairA
    spec = joint_diagonalize(pairA)
    n = spec.dim
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    h = (g + g.conj().T) / 2.0
    hnorm = _opnorm(h)
    if hnorm > 0.0:
        h = h / hnorm
    lam, e = np.linalg.eigh(h)
    rot = (e * np.exp(1j * scale * lam)) @ e.conj().T
    v = rot @ spec.basis
    d1 = rng.uniform(-scale, scale, size=n)
    d2 = rng.uniform(-scale, scale, size=n)
    b1 = (v * (spec.x1 + d1)) @ v.conj().T
    b2 = (v * (spec.x2 + d2)) @ v.conj().T
    b1 = (b1 + b1.conj().T) / 2.0
    b2 = (b2 + b2.conj().T) / 2.0
    return CommutingPair(b1, b2)


@dataclass(frozen=True)
class EnsembleSpec:
    """Configuration of one seeded experiment ensemble."""

    n: int
    trials: int
    seed: int = 0
    range1: tuple = (0.0, 1.0)
    range2: tuple = (0.0, 1.0)
    perturb_scale: float = 0.1
    fn: dict = field(default_factory=lambda: {"name": "exp2", "a": 1.0, "b": 2.0})
    p_values: tuple = (1.0, 2.0)

    def __post_init__(self):
        if int(self.trials) < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if int(self.n) < 1:
            raise ConfigError(f"dimension must be >= 1, got {self.n}")
        if float(self.perturb_scale) < 0.0:
            raise ConfigError(f"perturbation scale must be >= 0, got {self.perturb_scale}")
        for p in self.p_values:
            if not float(p) >= 1.0:
                raise InvalidP(f"Schatten index must satisfy p >= 1, got {p}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "trials", int(self.trials))
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "range1", tuple(float(v) for v in self.range1))
        object.__setattr__(self, "range2", tuple(float(v) for v in self.range2))
        object.__setattr__(self, "perturb_scale", float(self.perturb_scale))
        object.__setattr__(self, "fn", dict(self.fn))
        object.__setattr__(self, "p_values", tuple(float(p) for p in self.p_values))
        function_from_config(self.fn)  # fail at construction, not mid-run


@dataclass(frozen=True)
class TrialRow:
    trial: int
    seed: int
    rel_residual: float
    factor1: float
    factor2: float
    deviation_norm: float
    ratio: float
    schatten: dict


@dataclass(frozen=True)
class EnsembleReport:
    spec: EnsembleSpec
    rows: tuple
    besov_g1: float
    besov_g2: float
    grid_spec: GridSpec
    aggregates: dict
    failures: tuple


def _trial_seed(base: int, trial: int, tag: int) -> int:
    return base * 1_000_003 + 2 * trial + tag


def _stats(values) -> dict:
    arr = np.asarray(list(values), dtype=float)
    if arr.size == 0:
        return {}
    return {
        "min": float(arr.min()),
        "median": float(np.median(arr)),
        "max": float(arr.max()),
    }


def run_ensemble(spec: EnsembleSpec, max_workers=None) -> EnsembleReport:
    """Run seeded trials and aggregate identity, bound, and Schatten data.

    Trials are independent; with max_workers > 1 they run on a thread
    pool, and aggregation always reduces in trial order so the report is
    deterministic regardless of scheduling.  A failed trial is recorded
    and skipped instead of aborting the ensemble.
    """
    f = function_from_config(spec.fn)
    bg1, bg2, grid = besov_weights(f)

    def one(trial: int):
        seed_a = _trial_seed(spec.seed, trial, 0)
        try:
            pair_a = random_commuting_pair(spec.n, seed_a, spec.range1, spec.range2)
            pair_b = perturbed_pair(pair_a, spec.perturb_scale, _trial_seed(spec.seed, trial, 1))
            ident = verify_identity(pair_a, pair_b, f)
            bound = _bound_report(pair_a, pair_b, bg1, bg2, grid, f)
            schatten = {p: schatten_report(pair_a, pair_b, f, p).ratio for p in spec.p_values}
        except (DoilabError, np.linalg.LinAlgError) as exc:
            return trial, None, f"{type(exc).__name__}: {exc}"
        row = TrialRow(
            trial=trial,
            seed=seed_a,
            rel_residual=ident.rel_residual,
            factor1=bound.factors[0],
            factor2=bound.factors[1],
            deviation_norm=bound.deviation_norm,
            ratio=bound.ratio,
            schatten=schatten,
        )
        return trial, row, None

    indices = range(spec.trials)
    if max_workers is not None and int(max_workers) > 1:
        with ThreadPoolExecutor(max_workers=int(max_workers)) as pool:
            outcomes = list(pool.map(one, indices))
    else:
        outcomes = [one(t) for t in indices]

    outcomes.sort(key=lambda item: item[0])
    rows = tuple(row for _, row, err in outcomes if err is None)
    failures = tuple((t, err) for t, _, err in outcomes if err is not None)

    aggregates = {}
    if rows:
        aggregates["relResidual"] = _stats(r.rel_residual for r in rows)
        aggregates["ratio"] = _stats(r.ratio for r in rows)
        aggregates["deviationNorm"] = _stats(r.deviation_norm for r in rows)
        aggregates["schattenRatio"] = {
            repr(p): _stats(r.schatten[p] for r in rows) for p in spec.p_values
        }
    return EnsembleReport(
        spec=spec,
        rows=rows,
        besov_g1=bg1,
        besov_g2=bg2,
        grid_spec=grid,
        aggregates=aggregates,
        failures=failures,
    )


def ensemble_csv_rows(report: EnsembleReport) -> list:
    """Flatten a report to dict rows under the fixed CSV column names.

    One row per (trial, p).
    """
    out = []
    for row in report.rows:
        for p in report.spec.p_values:
            out.append(
                {
                    "trial": row.trial,
                    "n": report.spec.n,
                    "seed": row.seed,
                    "relResidual": row.rel_residual,
                    "factor1": row.factor1,
                    "factor2": row.factor2,
                    "deviationNorm": row.deviation_norm,
                    "besovG1": report.besov_g1,
                    "besovG2": report.besov_g2,
                    "ratio": row.ratio,
                    "p": p,
                    "schattenRatio": row.schatten[p],
                }
            )
    return out
