"""Acceptance checks, one test per criterion.

Each test prints a single PASS/FAIL line (also collected into the pytest
terminal summary) and then asserts. Run directly with
``python tests/test_acceptance.py`` to get only the lines.
"""

from __future__ import annotations

import io
import math
import time

import numpy as np

from conftest import ACCEPTANCE_LINES
from oracles import binary_vectors, solve_gated
from qarelay.cli import parse_args, run
from qarelay.linkbudget import capacity_bps
from qarelay.optmodel import NetworkInstance, ObjectiveKind, ProblemSpec, build_program
from qarelay.quality import QualityParams, f_q, gated_objective, hessian_eigenvalues
from qarelay.simulator import Setting, SimulationConfig, outage_sweep, parse_grid, run_trials
from qarelay.solver.bnb import branch_and_bound, enumerate_oracle
from qarelay.solver.relaxation import solve_fixed

# tolerances and sizes pinned from the acceptance criteria
RANGE_RATE_BPS = 1.5e9
ORACLE_TOL = 1e-4
ORACLE_INSTANCES = 100
ORACLE_TIME_LIMIT_S = 60.0
HESSIAN_SAMPLES = 1000
HESSIAN_TOL = 1e-6
EQUIV_INSTANCES = 50
EQUIV_TOL = 1e-8
DOMINANCE_TOL = 1e-9
SIM_TRIALS = 100
SIM_SIZE = 10
QUALITY_TOL = 1e-12
OUTAGE_GRID = "0:1.5:0.1"
SEED = 7


def report(ok: bool, criterion: int, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] AC{criterion}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)


def test_ac1_range_claim():
    c200, c300 = capacity_bps(200) / 1e9, capacity_bps(300) / 1e9
    ok = c200 >= RANGE_RATE_BPS / 1e9 and c300 < RANGE_RATE_BPS / 1e9
    report(ok, 1, f"capacity(200 m) = {c200:.4f} Gbit/s >= 1.5, capacity(300 m) = {c300:.4f} Gbit/s < 1.5")
    assert ok


def _oracle_instance(rng: np.random.Generator, kind: str) -> ProblemSpec:
    S, R = int(rng.integers(1, 4)), int(rng.integers(1, 4))
    inst = NetworkInstance(rng.uniform(0, 3, (S, R)), rng.uniform(0, 3, R), rng.integers(1, 3, S), rng.integers(1, 3, R))
    return ProblemSpec(inst, lower_bounds_gbps=rng.choice([0.0, 0.75], S), objective_kind=kind)


def test_ac2_oracle_equivalence():
    rng = np.random.default_rng(SEED)
    worst, mismatches, leaf_worst = 0.0, 0, 0.0
    t_bnb = t_oracle = 0.0
    for _ in range(ORACLE_INSTANCES):
        state = rng.bit_generator.state
        for kind in ("vqm", "srm", "jrsr"):
            rng.bit_generator.state = state  # same instance for every objective
            spec = _oracle_instance(rng, kind)
            t0 = time.perf_counter()
            b = branch_and_bound(spec)
            t1 = time.perf_counter()
            o = enumerate_oracle(spec)
            t2 = time.perf_counter()
            t_bnb += t1 - t0
            t_oracle += t2 - t1
            if b.status is not o.status:
                mismatches += 1
                continue
            if b.is_optimal:
                worst = max(worst, abs(b.objective_value - o.objective_value))
                # the oracle's winner, re-solved through the gated rows
                _, ref = solve_gated(spec, o.x)
                leaf_worst = max(leaf_worst, abs(ref - o.objective_value))
    ok = worst <= ORACLE_TOL and mismatches == 0 and t_bnb < ORACLE_TIME_LIMIT_S
    report(ok, 2, f"{ORACLE_INSTANCES} instances x 3 objectives: max |bnb - oracle| = {worst:.2e} (tol {ORACLE_TOL:g}), "
                  f"status mismatches = {mismatches}, bnb {t_bnb:.1f} s, oracle {t_oracle:.1f} s, "
                  f"oracle leaf vs gated reference {leaf_worst:.2e}")
    assert ok


def _fd_eigenvalues(a: float, x: float, q: QualityParams, h: float = 1e-4) -> np.ndarray:
    f = lambda xx, aa: gated_objective(aa, xx, q)  # noqa: E731
    fxx = (f(x + h, a) - 2 * f(x, a) + f(x - h, a)) / h**2
    faa = (f(x, a + h) - 2 * f(x, a) + f(x, a - h)) / h**2
    fxa = (f(x + h, a + h) - f(x + h, a - h) - f(x - h, a + h) + f(x - h, a - h)) / (4 * h * h)
    return np.linalg.eigvalsh(np.array([[fxx, fxa], [fxa, faa]]))


def test_ac3_hessian_indefinite():
    rng = np.random.default_rng(SEED)
    q = QualityParams()
    worst, nonneg = 0.0, 0
    for _ in range(HESSIAN_SAMPLES):
        a = rng.uniform(0.0, 1.5)
        x = 1.0 - rng.uniform(0.0, 1.0)  # (0, 1]
        rep = hessian_eigenvalues(a, x, q)
        lam = np.array(sorted(rep.eigenvalues))
        nonneg += lam[0] * lam[1] >= 0
        worst = max(worst, float(np.max(np.abs(lam - _fd_eigenvalues(a, x, q)))))
    ok = nonneg == 0 and worst <= HESSIAN_TOL
    report(ok, 3, f"{HESSIAN_SAMPLES} samples: non-negative eigenvalue products = {nonneg}, "
                  f"max |closed form - finite difference| = {worst:.2e} (tol {HESSIAN_TOL:g})")
    assert ok


def test_ac4_reformulation_equivalence():
    worst, mismatches, compared = 0.0, 0, 0
    for seed in range(EQUIV_INSTANCES):
        rng = np.random.default_rng([SEED, seed])
        inst = NetworkInstance(rng.uniform(0, 3, (2, 2)), rng.uniform(0, 3, 2), 2, 2)
        spec = ProblemSpec(inst, lower_bounds_gbps=rng.choice([0.0, 0.75], 2))
        program = build_program(spec)
        for x in binary_vectors(4):
            fixed = solve_fixed(program, x, eps_gap=1e-11)
            ok_ref, ref = solve_gated(spec, x)
            if fixed.feasible != ok_ref:
                mismatches += 1
            elif ok_ref:
                compared += 1
                worst = max(worst, abs(fixed.value - ref))
    ok = mismatches == 0 and worst <= EQUIV_TOL
    report(ok, 4, f"{EQUIV_INSTANCES} instances x 16 assignments ({compared} feasible): "
                  f"max |reformulated - gated| = {worst:.2e} (tol {EQUIV_TOL:g}), feasibility mismatches = {mismatches}")
    assert ok


def _sim_config(setting: Setting, trials: int) -> SimulationConfig:
    # lower bound 0: at the default 0.75 Gbit/s settings I and III have no feasible trial
    return SimulationConfig(num_sources=SIM_SIZE, num_relays=SIM_SIZE, setting=setting, trials=trials,
                            rng_seed=SEED, lower_bound_gbps=0.0)


def test_ac5_scheme_dominance():
    means = {}
    violations = 0
    for setting in Setting:
        res = run_trials(_sim_config(setting, SIM_TRIALS))
        violations += len(res.dominance_violations(DOMINANCE_TOL))
        means[setting] = {k: res[k].mean_quality for k in ObjectiveKind}
    V, S, J = ObjectiveKind.VQM, ObjectiveKind.SRM, ObjectiveKind.JRSR
    # "strictly greater" has to clear the comparison tolerance, not float noise
    def above(a: float, b: float) -> bool:
        return a > b + DOMINANCE_TOL

    strict = {s: above(means[s][V], means[s][S]) and above(means[s][S], means[s][J]) for s in Setting}
    pattern = {
        k: above(means[Setting.II][k], means[Setting.III][k]) and above(means[Setting.III][k], means[Setting.I][k])
        for k in ObjectiveKind
    }
    margins = "; ".join(
        f"{s.value}: vqm-srm {means[s][V] - means[s][S]:.2e}, srm-jrsr {means[s][S] - means[s][J]:.2e}" for s in Setting
    )
    table = "; ".join(
        f"{s.value}: " + "/".join(f"{means[s][k]:.4f}" for k in ObjectiveKind) for s in Setting
    )
    ok = violations == 0 and all(strict.values()) and all(pattern.values())
    report(ok, 5, f"per-trial violations = {violations}; strict VQM > SRM > JRSR means by setting "
                  f"{ {s.value: v for s, v in strict.items()} }; II > III > I by scheme "
                  f"{ {k.value: v for k, v in pattern.items()} }; means (vqm/srm/jrsr) {table}; margins {margins}")
    assert violations == 0, "per-trial dominance"
    assert all(pattern.values()), "setting pattern"
    assert all(strict.values()), "strict mean ordering"


def test_ac6_outage_sweep():
    grid = parse_grid(OUTAGE_GRID)
    curves = {s: outage_sweep(_sim_config(s, SIM_TRIALS), grid) for s in Setting}
    problems = []
    for s, c in curves.items():
        for k in ObjectiveKind:
            p = c[k]
            if np.any(np.diff(p) < 0):
                problems.append(f"{s.value}/{k.value} not monotone")
            if p[0] != 0.0:
                problems.append(f"{s.value}/{k.value} outage at L=0 is {p[0]}")
        if not np.array_equal(c["vqm"], c["srm"]):
            problems.append(f"{s.value}: vqm and srm curves differ")
        if np.any(c["jrsr"] < c["vqm"]) or np.any(c["jrsr"] < c["srm"]):
            problems.append(f"{s.value}: jrsr below vqm/srm")
    end_i, end_iii = curves[Setting.I]["vqm"][-1], curves[Setting.III]["vqm"][-1]
    if end_iii < end_i:
        problems.append(f"outage at 1.5: III {end_iii} < I {end_i}")
    ok = not problems
    summary = "; ".join(
        f"{s.value}: vqm=srm reaches 1 at L={c.grid[np.argmax(c['vqm'] >= 1.0)]:.1f}, "
        f"jrsr at L={c.grid[np.argmax(c['jrsr'] >= 1.0)]:.1f}"
        for s, c in curves.items()
    )
    report(ok, 6, f"grid {OUTAGE_GRID} ({len(grid)} points), {SIM_TRIALS} trials per setting: "
                  + ("all properties hold" if ok else ", ".join(problems)) + f"; {summary}")
    assert ok


def test_ac7_quality_function():
    checks = {
        "f_q(0) = 0": f_q(0.0) == 0.0,
        "f_q(1.5) = 1": f_q(1.5) == 1.0,
        "f_q(0.75)": abs(f_q(0.75) - math.log(1.75) / math.log(2.5)) <= QUALITY_TOL,
    }
    grid = np.linspace(0.0, 1.5, 151)
    spread = max(
        max(f_q(a, QualityParams(log_base=b)) for b in (2.0, math.e, 10.0))
        - min(f_q(a, QualityParams(log_base=b)) for b in (2.0, math.e, 10.0))
        for a in grid
    )
    checks["base invariance"] = spread <= QUALITY_TOL
    ok = all(checks.values())
    report(ok, 7, ", ".join(f"{k}: {'ok' if v else 'FAILED'}" for k, v in checks.items())
           + f" (max spread across bases {spread:.1e})")
    assert ok


def test_ac8_determinism(tmp_path):
    blobs = []
    for name in ("run1", "run2"):
        argv = ["simulate", "--sources", "10", "--relays", "10", "--setting", "II", "--trials", "20",
                "--seed", str(SEED), "-o", str(tmp_path / name)]
        code = run(parse_args(argv), io.StringIO(), io.StringIO())
        assert code == 0
        blobs.append([(tmp_path / name / f).read_bytes() for f in ("cdf.csv", "summary.csv")])
    ok = blobs[0] == blobs[1]
    report(ok, 8, f"two simulate runs (seed {SEED}) wrote byte-identical cdf.csv and summary.csv: {ok}")
    assert ok


if __name__ == "__main__":
    import tempfile
    from pathlib import Path

    for name, fn in list(globals().items()):
        if name.startswith("test_ac"):
            try:
                if "tmp_path" in fn.__code__.co_varnames[: fn.__code__.co_argcount]:
                    with tempfile.TemporaryDirectory() as d:
                        fn(Path(d))
                else:
                    fn()
            except AssertionError:
                pass
