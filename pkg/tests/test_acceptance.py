"""Acceptance gate: one test per shipped criterion, one verdict line each.

Run with `pytest -s tests/test_acceptance.py` to see the verdict lines;
each test also fails loudly if its criterion does not hold.
"""

from __future__ import annotations

import json
import time

import numpy as np

from doilab import (
    EnsembleSpec,
    GridSpec,
    besov_norm_estimate,
    besov_norm_exponential,
    bracket,
    build_w,
    counterexample_scan,
    doi_evaluate,
    hs_inequality_slack,
    joint_diagonalize,
    multiplier_norm_upper,
    perturbed_pair,
    random_commuting_pair,
    run_ensemble,
    sample_on_spectra,
    truncation_convergence,
    verify_identity,
)
from doilab.cli import main as cli_main
from doilab.perturb import CSV_COLUMNS
from doilab.symbols import (
    Symbol,
    divided_diff_symbol_var1,
    divided_diff_symbol_var2,
    exp2,
    gauss,
    poly,
    split_symbol_var1,
)


def _report(num, name, ok, detail):
    line = f"[criterion {num}] {name}: {'PASS' if ok else 'FAIL'} ({detail})"
    print(line)
    assert ok, line


def _pairs(n, seed, scale=0.1):
    pair_a = random_commuting_pair(n, seed)
    pair_b = perturbed_pair(pair_a, scale, 10_000 * (seed + 1) + n)
    return pair_a, pair_b


def _random_q(shape, seed):
    rng = np.random.default_rng(seed)
    q = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return q / np.linalg.norm(q)


def test_criterion_1_identity_residuals():
    functions = [
        poly([[0.5, 2.0], [1.0, 0.0]]),                       # degree 1
        poly([[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]]),  # degree 2
        poly([[0.0, 0.0, 0.0, 1.0], [0.0, 0.0, 2.0, 0.0], [0.0, 1.0, 0.0, 0.0], [3.0, 0.0, 0.0, 0.0]]),
        exp2(1.0, 2.0),
        gauss(1.0),
    ]
    start = time.perf_counter()
    worst = 0.0
    checks = 0
    for n in (2, 4, 8, 16, 32):
        for seed in range(100):
            pair_a, pair_b = _pairs(n, seed)
            for f in functions:
                rep = verify_identity(pair_a, pair_b, f)
                worst = max(worst, rep.rel_residual)
                checks += 1
    elapsed = time.perf_counter() - start
    _report(
        1,
        "two-term identity",
        worst <= 1e-9,
        f"{checks} checks, max relResidual {worst:.3e}, {elapsed:.1f}s",
    )


def test_criterion_2_measure_algebra():
    sizes = [2, 3, 4, 5, 8, 12, 16]
    worst = 0.0
    for k in range(50):
        n = sizes[k % len(sizes)]
        pair_a, pair_b = _pairs(n, 500 + k)
        spec_a = joint_diagonalize(pair_a)
        spec_b = joint_diagonalize(pair_b)
        base = divided_diff_symbol_var2(gauss(1.0) if k % 2 else exp2(1.0, 2.0))
        shifted = Symbol(
            "gap*" + base.label,
            lambda x1, x2, y1, y2, c=base._core: (y2 - x2) * c(x1, x2, y1, y2),
        )
        q = _random_q((n, n), 900 + k)
        lhs = doi_evaluate(spec_b, spec_a, shifted, q)
        rhs = doi_evaluate(spec_b, spec_a, base, pair_b.A2 @ q - q @ pair_a.A2)
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    _report(2, "measure algebra", worst <= 1e-10, f"50 instances, max deviation {worst:.3e}")


def test_criterion_3_hilbert_schmidt_inequality():
    worst_slack = np.inf
    for k in range(100):
        n = 2 + (k % 7)
        pair_a, pair_b = _pairs(n, 2000 + k)
        spec_a = joint_diagonalize(pair_a)
        spec_b = joint_diagonalize(pair_b)
        f = [gauss(1.0), exp2(1.0, 2.0), poly([[0.0, 1.0], [1.0, 0.0]])][k % 3]
        phi = (divided_diff_symbol_var2 if k % 2 else divided_diff_symbol_var1)(f)
        q = _random_q((n, n), 3000 + k)
        slack = hs_inequality_slack(spec_b, spec_a, phi, q)
        worst_slack = min(worst_slack, slack / np.linalg.norm(q))
    # constant symbols must be tight
    worst_const = 0.0
    flat = Symbol("flat", lambda x1, x2, y1, y2: np.broadcast_to(1.5 + 0j, np.broadcast(x1, y1).shape))
    for k in range(20):
        n = 2 + (k % 5)
        pair_a, pair_b = _pairs(n, 4000 + k)
        q = _random_q((n, n), 5000 + k)
        slack = hs_inequality_slack(joint_diagonalize(pair_b), joint_diagonalize(pair_a), flat, q)
        worst_const = max(worst_const, abs(slack))
    ok = worst_slack >= -1e-10 and worst_const <= 1e-12
    _report(
        3,
        "S2 inequality",
        ok,
        f"min slack {worst_slack:.3e}, constant-symbol deviation {worst_const:.3e}",
    )


def test_criterion_4_besov_oracle():
    w = build_w()
    closed = besov_norm_exponential(3.0, 4.0, w)
    direct = sum(2.0**n * w(5.0 / 2.0**n) for n in range(-10, 11))
    est = besov_norm_estimate(exp2(3.0, 4.0), GridSpec(), w)
    fft_dev = abs(est.total - closed) / closed

    t = np.logspace(-6, 6, 1000)
    partition = sum(w(t / 2.0**n) for n in range(-30, 31))
    partition_residual = float(np.max(np.abs(partition - 1.0)))

    ok = (
        abs(closed - direct) <= 1e-12 * closed
        and fft_dev <= 0.05
        and partition_residual <= 1e-10
    )
    _report(
        4,
        "dyadic norm oracle",
        ok,
        f"closed {closed:.6f}, fft dev {fft_dev:.2e}, partition residual {partition_residual:.2e}",
    )


def test_criterion_5_multiplier_bracket_and_transfer():
    # exact-value cases
    ones = bracket(np.ones((6, 9)))
    rng = np.random.default_rng(7)
    psi = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    phi_vec = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    rank_one_exact = float(np.max(np.abs(psi)) * np.max(np.abs(phi_vec)))
    rank_one = bracket(np.outer(psi, phi_vec.conj()))
    hadamard = bracket(np.array([[1.0, 1.0], [1.0, -1.0]]))
    sqrt2 = float(np.sqrt(2.0))
    exact_ok = (
        ones.gap <= 1e-6
        and ones.lower - 1e-9 <= 1.0 <= ones.upper + 1e-9
        and rank_one.gap <= 1e-6 * rank_one_exact
        and rank_one.lower - 1e-9 <= rank_one_exact <= rank_one.upper + 1e-9
        and hadamard.lower - 1e-3 <= sqrt2 <= hadamard.upper + 1e-3
        and hadamard.gap <= 1e-3
    )

    # transfer inequalities through the full integral pipeline
    pair_a, pair_b = _pairs(8, 77)
    spec_a = joint_diagonalize(pair_a)
    spec_b = joint_diagonalize(pair_b)
    symbols = [
        divided_diff_symbol_var2(gauss(1.0)),
        divided_diff_symbol_var1(exp2(1.0, 2.0)),
        split_symbol_var1(gauss(1.0)),
    ]
    worst_op = -np.inf
    worst_tr = -np.inf
    for phi in symbols:
        m = sample_on_spectra(phi, spec_a, spec_b)
        value = multiplier_norm_upper(m).value
        for k in range(50):
            q = _random_q((8, 8), 7000 + k)
            r = doi_evaluate(spec_b, spec_a, phi, q)
            op_excess = np.linalg.norm(r, 2) - value * np.linalg.norm(q, 2)
            tr_excess = np.linalg.svd(r, compute_uv=False).sum() - value * np.linalg.svd(
                q, compute_uv=False
            ).sum()
            worst_op = max(worst_op, op_excess)
            worst_tr = max(worst_tr, tr_excess)
    transfer_ok = worst_op <= 1e-9 and worst_tr <= 1e-9
    _report(
        5,
        "multiplier bracket",
        exact_ok and transfer_ok,
        f"gaps {ones.gap:.1e}/{rank_one.gap:.1e}/{hadamard.gap:.1e}, "
        f"transfer excess op {worst_op:.2e}, trace {worst_tr:.2e}",
    )


def test_criterion_6_counterexample_scan():
    rows = counterexample_scan([1, 10, 100, 1000])
    ok = all(
        np.isclose(row.full_factor, row.n / (row.n + 1.0), rtol=1e-12, atol=1e-12)
        and np.isclose(row.re_factor, float(row.n), rtol=1e-12, atol=1e-12)
        for row in rows
    )
    worst = max(
        max(
            abs(row.full_factor - row.n / (row.n + 1.0)),
            abs(row.re_factor - row.n) / row.n,
        )
        for row in rows
    )
    _report(6, "bounded vs real-part factors", ok, f"n up to 1000, worst deviation {worst:.2e}")


def test_criterion_7_ratio_ensembles():
    reports = {}
    for scale in (0.01, 0.1):
        spec = EnsembleSpec(n=8, trials=100, seed=11, perturb_scale=scale, p_values=(1.0, 2.0))
        reports[scale] = run_ensemble(spec)

    finite = all(
        np.isfinite([row.ratio, row.schatten[1.0], row.schatten[2.0]]).all()
        and not rep.failures
        for rep in reports.values()
        for row in rep.rows
    )
    max_small = reports[0.01].aggregates["ratio"]["max"]
    max_large = reports[0.1].aggregates["ratio"]["max"]
    stable = 0.1 <= max_small / max_large <= 10.0
    schatten_stable = all(
        0.1
        <= reports[0.01].aggregates["schattenRatio"][key]["max"]
        / reports[0.1].aggregates["schattenRatio"][key]["max"]
        <= 10.0
        for key in ("1.0", "2.0")
    )

    zero = run_ensemble(EnsembleSpec(n=8, trials=20, seed=11, perturb_scale=0.0))
    all_zero = all(row.deviation_norm == 0.0 and row.ratio == 0.0 for row in zero.rows)

    _report(
        7,
        "ratio ensembles",
        finite and stable and schatten_stable and all_zero,
        f"max ratio {max_small:.3e} @0.01 vs {max_large:.3e} @0.1, zero-scale identically zero",
    )


def test_criterion_8_truncation_convergence():
    pair_a, pair_b = _pairs(8, 123)
    f = exp2(1.0, 2.0)
    radius = max(
        np.linalg.norm(m, 2) for m in (pair_a.A1, pair_a.A2, pair_b.A1, pair_b.A2)
    )
    cutoffs = [radius * (1.0 + step) for step in (0.01, 0.5, 1.0, 10.0, 1000.0)]
    rows = truncation_convergence(pair_a, pair_b, f, cutoffs)
    residuals = [row.residual for row in rows]
    non_increasing = all(a >= b - 1e-15 for a, b in zip(residuals, residuals[1:]))
    full_match = abs(residuals[-1] - verify_identity(pair_a, pair_b, f).abs_residual) <= 1e-12
    _report(
        8,
        "truncation convergence",
        non_increasing and full_match,
        f"residual beyond radius {residuals[-1]:.3e}, matches identity residual",
    )


def test_criterion_9_deterministic_reports(tmp_path, capsys):
    def run(args, out):
        code = cli_main(args + ["--out", str(out)])
        assert code == 0, args
        return out

    checks = []
    # ensemble, json data section
    a = run(["ensemble", "--n", "4", "--trials", "3", "--seed", "2"], tmp_path / "e1.json")
    b = run(["ensemble", "--n", "4", "--trials", "3", "--seed", "2"], tmp_path / "e2.json")
    d1 = json.dumps(json.loads(a.read_text())["data"], sort_keys=True)
    d2 = json.dumps(json.loads(b.read_text())["data"], sort_keys=True)
    checks.append(d1 == d2)
    # ensemble, csv whole file
    c = run(
        ["ensemble", "--n", "4", "--trials", "3", "--seed", "2", "--format", "csv"],
        tmp_path / "e1.csv",
    )
    d = run(
        ["ensemble", "--n", "4", "--trials", "3", "--seed", "2", "--format", "csv"],
        tmp_path / "e2.csv",
    )
    checks.append(c.read_bytes() == d.read_bytes())
    checks.append(c.read_text().splitlines()[0] == ",".join(CSV_COLUMNS))
    # two more commands, json data sections
    for cmd in (["counterexample", "--n", "1,10,100"], ["besov-norm", "--a", "3", "--b", "4"]):
        x = run(list(cmd), tmp_path / "x.json")
        first = json.dumps(json.loads(x.read_text())["data"], sort_keys=True)
        y = run(list(cmd), tmp_path / "y.json")
        second = json.dumps(json.loads(y.read_text())["data"], sort_keys=True)
        checks.append(first == second)
    capsys.readouterr()  # drop CLI stdout; the verdict line follows
    _report(9, "deterministic reports", all(checks), f"{len(checks)} rerun comparisons identical")
