"""Acceptance gate: one test per criterion, each printing a PASS/FAIL summary line.

Run ``pytest tests/test_acceptance.py -s`` to see the lines inline; a plain
``pytest`` run repeats them in the terminal summary.
"""

import filecmp
import math
import time
import warnings
from functools import lru_cache
from pathlib import Path

import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

from ringwalk import NetworkSpec, cli
from ringwalk.evolve import (
    integrate_master,
    perturbative_trajectory,
    quantum_probability,
    sample_times,
)
from ringwalk.mixing import (
    average_lower_bound,
    average_mixing_time,
    cycle_instantaneous_bound,
    instantaneous_bound,
    instantaneous_mixing_time,
    mixing_report,
    tv_envelope,
    tv_to_uniform,
)
from ringwalk.network import preset_hamiltonian
from ringwalk.spectral import (
    bloch_system,
    classify_degeneracies,
    l1_partner,
    liouvillian_dense,
    liouville_spectrum,
)

from acceptance_log import note, record
from oracles import degenerate_pairs

GOLDEN = Path(__file__).parent / "golden"
GAMMAS_5 = (4e-3, 2e-3, 1e-3)
CHECKPOINTS_5 = np.linspace(200, 2000, 10)


def _quiet(fn, *args, **kwargs):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return fn(*args, **kwargs)


def _multiset_deviation(a, b):
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max())


@lru_cache(maxsize=None)
def _coherent_run():
    spec = NetworkSpec(8, 3)
    times = sample_times(10.0, 0.1)
    return integrate_master(spec, 0.0, t_end=10.0, times=times, checkpoints=np.linspace(1, 10, 10))


@lru_cache(maxsize=None)
def _exact_run(gamma):
    times = sample_times(2000.0, 1.0)
    return integrate_master(NetworkSpec(10, 2), gamma, t_end=2000.0, times=times,
                            checkpoints=CHECKPOINTS_5)


def test_criterion_01_bloch_spectrum():
    start = time.perf_counter()
    worst = 0.0
    cases = 0
    for N in range(4, 65):
        for l in range(1, 6):
            if 2 * l >= N:
                continue
            E = np.sort(bloch_system(NetworkSpec(N, l)).energies)
            dense = np.linalg.eigvalsh(preset_hamiltonian(N, l, "section2"))
            worst = max(worst, float(np.max(np.abs(E - dense))))
            cases += 1
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-10 and elapsed < 10
    assert record(1, ok, f"{cases} rings, max |E - eig| = {worst:.2e}, {elapsed:.2f} s")


def test_criterion_02_liouvillian_oracle():
    start = time.perf_counter()
    worst_ratio = 0.0
    details = []
    for N in range(4, 13):
        for l in (1, 2, 3):
            if 2 * l >= N:
                continue
            spec = NetworkSpec(N, l)
            for gamma in (0.0, 0.01):
                ev = np.linalg.eigvals(liouvillian_dense(spec, gamma))
                pred = liouville_spectrum(spec, gamma, rule="block").eigenvalues()
                tol = max(1e-9, 5 * gamma**2 * N)
                dev = _multiset_deviation(ev, pred)
                worst_ratio = max(worst_ratio, dev / tol)
                if dev > tol:
                    details.append(f"N={N} l={l} gamma={gamma}: {dev:.2e} > {tol:.2e}")
    elapsed = time.perf_counter() - start
    ok = not details and elapsed < 60
    msg = f"worst deviation/tolerance = {worst_ratio:.3f}, {elapsed:.2f} s"
    if details:
        msg += "; " + "; ".join(details[:5])
    assert record(2, ok, msg)


def test_criterion_03_degeneracy_classification():
    start = time.perf_counter()
    rule_failures = []
    for N in (4, 6, 8, 10):
        brute = degenerate_pairs(N, 1)
        for m in range(N):
            for n in range(N):
                p = l1_partner(N, m, n)
                if p != (m, n) and (min((m, n), p), max((m, n), p)) not in brute:
                    rule_failures.append((N, m, n))
    scan_mismatch = []
    counterexamples = []
    for l in (2, 3):
        for N in range(5, 17):
            if 2 * l >= N:
                continue
            report = classify_degeneracies(NetworkSpec(N, l))
            found = {(a, b) for c in report.classes for a in c.members for b in c.members if a < b}
            if found != degenerate_pairs(N, l):
                scan_mismatch.append((N, l))
            if report.unexpected:
                sizes = sorted({c.size for c in report.unexpected})
                counterexamples.append(f"({N},{l}):{len(report.unexpected)} classes, sizes {sizes}")
    elapsed = time.perf_counter() - start
    note(3, f"no-degeneracy claim for l>=2 contradicted at {len(counterexamples)} rings: "
            + ", ".join(counterexamples))
    ok = not rule_failures and not scan_mismatch and elapsed < 10
    assert record(3, ok, f"cycle pairing rules confirmed (failures={len(rule_failures)}), "
                         f"scan vs enumeration mismatches={len(scan_mismatch)}, {elapsed:.2f} s")


def test_criterion_04_coherent_limit():
    res = _coherent_run()
    traj = res.trajectory
    spec = NetworkSpec(8, 3)
    expected = np.array([[quantum_probability(spec, k, 0, traj.time_scale * t) for k in range(8)]
                         for t in traj.times])
    err = float(np.max(np.abs(traj.distributions - expected)))
    purity = max(abs(rho.purity() - 1) for _, rho in res.checkpoints + [(10.0, res.final)])
    ok = err <= 1e-8 and purity <= 1e-8
    assert record(4, ok, f"max |P_exact - P_spectral(t/4)| = {err:.2e}, purity drift = {purity:.2e}")


def test_criterion_05_perturbation_convergence():
    spec = NetworkSpec(10, 2)
    times = sample_times(2000.0, 1.0)
    errors = {"classes": [], "printed": []}
    for gamma in GAMMAS_5:
        exact = _exact_run(gamma).trajectory.distributions
        for rule in errors:
            approx = perturbative_trajectory(spec, gamma, times, rule).distributions
            errors[rule].append(float(np.max(np.abs(exact - approx))))
    ratios = {r: [b / a for a, b in zip(e, e[1:])] for r, e in errors.items()}
    note(5, "uniform printed correction -gamma(N-1)/N: errors "
            + ", ".join(f"{e:.3e}" for e in errors["printed"])
            + ", ratios " + ", ".join(f"{q:.3f}" for q in ratios["printed"]))
    ok = all(0.3 <= q <= 0.7 for q in ratios["classes"])
    assert record(5, ok, "class-aware closed form: errors "
                         + ", ".join(f"{e:.3e}" for e in errors["classes"])
                         + ", ratios " + ", ".join(f"{q:.3f}" for q in ratios["classes"]))


def test_criterion_06_envelope_bound():
    gamma = 1e-3
    times = sample_times(20000.0, 1.0)
    env = {N: tv_envelope(N, gamma, times) for N in (8, 16)}
    counts = {"printed": 0, "classes": 0}
    worst = 0.0
    for N in (8, 16):
        for l in (2, 3):
            for rule in counts:
                tv = tv_to_uniform(perturbative_trajectory(NetworkSpec(N, l), gamma, times, rule).distributions)
                counts[rule] += int(np.count_nonzero(tv > env[N] + 1e-9))
                if rule == "printed":
                    worst = max(worst, float(np.max(tv / env[N])))
    note(6, f"class-aware closed form exceeds the envelope at {counts['classes']} samples")
    ok = counts["printed"] == 0
    assert record(6, ok, f"closed form with uniform correction: {counts['printed']} violations "
                         f"over {4 * times.size} samples, max tv/envelope = {worst:.3f}")


def test_criterion_07_instantaneous_bound():
    gamma = 1e-3
    failures = []
    info = []
    margin = 0.0
    for N in (8, 16, 32):
        horizon = math.ceil(1.2 * instantaneous_bound(N, gamma, 0.05))
        times = sample_times(horizon, 1.0)
        for l in (2, 3):
            trajs = {rule: perturbative_trajectory(NetworkSpec(N, l), gamma, times, rule)
                     for rule in ("printed", "classes")}
            for eps in (0.05, 0.1, 0.3):
                bound = instantaneous_bound(N, gamma, eps)
                m = instantaneous_mixing_time(trajs["printed"], eps)
                if not m.reached or m.value > bound:
                    failures.append(f"N={N} l={l} eps={eps}: {m.value} > {bound:.1f}")
                else:
                    margin = max(margin, m.value / bound)
                c = instantaneous_mixing_time(trajs["classes"], eps)
                if not c.reached or c.value > bound:
                    info.append(f"N={N} l={l} eps={eps}")
    value = instantaneous_bound(100, 0.001, 0.1)
    note(7, f"class-aware closed form above the bound at {len(info)} points "
            + (", ".join(info) if info else ""))
    ok = not failures and abs(value - 6977.6) <= 0.1
    msg = f"max M_inst/bound = {margin:.3f}, bound(100, 0.001, 0.1) = {value:.4f}"
    if failures:
        msg += "; " + "; ".join(failures)
    assert record(7, ok, msg)


def test_criterion_08_bound_comparison():
    bad = [N for N in range(4, 101) for eps in (0.01, 0.1, 0.5)
           if not cycle_instantaneous_bound(N, 0.001, eps) > instantaneous_bound(N, 0.001, eps)]
    times = sample_times(50.0, 1.0)
    bounds = set()
    for l in (2, 3, 4, 5):
        traj = perturbative_trajectory(NetworkSpec(12, l), 0.002, times)
        rep = mixing_report(traj, l, 0.002, 0.1, max_dt=None)
        bounds.add(rep.m_inst_bound)
    ok = not bad and len(bounds) == 1
    assert record(8, ok, f"cycle > regular for N=4..100 (exceptions: {bad}), "
                         f"distinct bounds over l=2..5: {len(bounds)} ({bounds.pop():.4f})")


def test_criterion_09_average_mixing():
    exact_value = average_lower_bound(100, 0.001, 0.01)
    N, gamma, eps = 8, 0.0125, 0.3
    horizon = 4 * N / (gamma * eps)
    start = time.perf_counter()
    traj = _quiet(perturbative_trajectory, NetworkSpec(N, 2), gamma, sample_times(horizon, 1.0))
    m = average_mixing_time(traj, eps)
    formula = average_lower_bound(N, gamma, eps)
    elapsed = time.perf_counter() - start
    shown = f"{m.value:.2f}" if m.reached else f"not reached (tv at horizon {m.final_tv:.3g})"
    ok = exact_value == 1e7 and math.isfinite(formula)
    assert record(9, ok, f"bound(100, 0.001, 0.01) = {exact_value!r}; N=8: empirical M_ave = {shown} "
                         f"(resolution {m.resolution:.3g}), N/(gamma eps) = {formula:.2f}, "
                         f"horizon {horizon:.1f}, {elapsed:.2f} s")


def test_criterion_10_conservation():
    runs = [("crit4", _coherent_run())] + [(f"crit5 gamma={g}", _exact_run(g)) for g in GAMMAS_5]
    worst = {"trace": 0.0, "herm": 0.0, "eig": 0.0}
    bad = []
    for name, res in runs:
        if len(res.checkpoints) != 10:
            bad.append(f"{name}: {len(res.checkpoints)} checkpoints")
        for t, rho in res.checkpoints:
            tr, he, ev = rho.trace_error(), rho.hermiticity_error(), rho.min_eigenvalue()
            worst["trace"] = max(worst["trace"], tr)
            worst["herm"] = max(worst["herm"], he)
            worst["eig"] = min(worst["eig"], ev)
            if tr > 1e-9 or he > 1e-10 or ev < -1e-9:
                bad.append(f"{name} t={t}")
        worst["trace"] = max(worst["trace"], res.max_trace_drift)
        worst["herm"] = max(worst["herm"], res.max_hermiticity_drift)
    # diagnostic only: the same coherent run at ten times tighter tolerances
    tight = integrate_master(NetworkSpec(8, 3), 0.0, t_end=10.0, checkpoints=np.linspace(1, 10, 10),
                             rtol=1e-10, atol=1e-11)
    note(10, "coherent run at rtol=1e-10, atol=1e-11: min eigenvalue = "
             f"{min(rho.min_eigenvalue() for _, rho in tight.checkpoints):.2e}")
    ok = not bad and worst["trace"] <= 1e-9 and worst["herm"] <= 1e-10
    assert record(10, ok, f"{len(runs)} exact runs x 10 checkpoints: max |Tr-1| = {worst['trace']:.2e}, "
                          f"max Hermiticity drift = {worst['herm']:.2e}, min eigenvalue = {worst['eig']:.2e}"
                          + ("; " + ", ".join(bad) if bad else ""))


@pytest.mark.parametrize("name,command,suffix", [
    ("evolve_exact", "evolve", ".csv"),
    ("spectrum_json", "spectrum", ".json"),
    ("sweep_perturbative", "sweep", ".csv"),
])
def test_criterion_11_cli_determinism(tmp_path, name, command, suffix):
    outputs = []
    for run in range(2):
        (tmp_path / str(run)).mkdir()
        out = tmp_path / str(run) / f"{name}{suffix}"
        status = cli.main([command, "--config", str(GOLDEN / f"{name}.cfg"), "--output", str(out)])
        assert status == 0
        outputs.append(out)
    same = filecmp.cmp(*outputs, shallow=False)
    if command == "sweep":
        same = same and filecmp.cmp(*(Path(str(o) + ".manifest.json") for o in outputs), shallow=False)
    size = outputs[0].stat().st_size
    assert record(11, same, f"{name}: two runs byte-identical ({size} bytes)" if same
                  else f"{name}: outputs differ")
