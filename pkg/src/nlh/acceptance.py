"""The acceptance battery: every criterion as a named, runnable check.

Each criterion function takes an output directory and a shared context (so
the calibration feeding the evolution and estimate checks runs once), writes
its CSV/JSON artifacts, and returns a CriterionResult with the measured
numbers.  Tolerances are pinned here, not in the tests.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dualclass, estimates, evolution, nonlinear, operator, presets, solver
from .grid import Grid, GridFunction, from_callable
from .io import write_csv, write_json
from .kernels import SamplingPlan, check_conditions
from .operator import OperatorFactory


@dataclass
class CriterionResult:
    name: str
    passed: bool
    details: dict
    files: list = field(default_factory=list)
    seconds: float = 0.0

    def summary_line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] {self.name} ({self.seconds:.1f}s)"


def _result(name, passed, details, files, t0):
    return CriterionResult(name=name, passed=bool(passed), details=details,
                           files=[str(f) for f in files], seconds=time.perf_counter() - t0)


# -- criterion 1: operator symbol oracle ------------------------------------


def criterion_symbol_oracle(outdir: Path, ctx: dict) -> CriterionResult:
    t0 = time.perf_counter()
    grid = Grid(1, 16.0 * math.pi, 2048)
    interior = np.abs(grid.axis) <= grid.box_radius / 2.0
    rows = []
    worst = 0.0
    slowest = 0.0
    for alpha in (0.5, 1.0, 1.5):
        ker = presets.fractional_heat(alpha)
        for xi in (1.0, 2.0):
            t1 = time.perf_counter()
            f = from_callable(grid, lambda x: np.cos(xi * x))
            out = operator.apply(ker, f)
            target = xi**alpha * np.cos(xi * grid.axis)
            err = float(np.abs(out.values - target)[interior].max() / xi**alpha)
            sec = time.perf_counter() - t1
            rows.append({"alpha": alpha, "xi": xi, "amp_rel_error": err, "seconds": sec})
            worst = max(worst, err)
            slowest = max(slowest, sec)
    files = [write_json(outdir / "c01_symbol_oracle.json", rows)]
    passed = worst <= 0.02 and slowest < 120.0
    return _result("1 operator symbol oracle (<=2% amplitude-relative)", passed,
                   {"worst_error": worst, "slowest_case_s": slowest, "cases": rows}, files, t0)


# -- criterion 2: power-law profile bound ------------------------------------


def criterion_gamma_profile(outdir: Path, ctx: dict) -> CriterionResult:
    t0 = time.perf_counter()
    xs = np.linspace(0.5, 4.0, 12)
    kernels = [presets.fractional_heat(0.5), presets.cosine_kernel(1.5), presets.xdep_kernel(0.5)]
    rows = []
    ok = True
    for ker in kernels:
        prof = operator.gamma_bound_profile(ker, xs, box_radius=8.0, n_points=1024)
        finite = np.all(np.isfinite(prof.ratio))
        ok &= bool(finite and prof.drift < 0.10)
        rows.append({"kernel": ker.label, "max_ratio": prof.max_ratio,
                     "drift": prof.drift, "finite": bool(finite)})
    files = [write_json(outdir / "c02_gamma_profile.json", rows)]
    return _result("2 power-law profile max ratio finite, drift < 10%", ok,
                   {"kernels": rows}, files, t0)


# -- criterion 3: duality and mean zero ---------------------------------------


def _random_decaying_pair(grid: Grid, rng) -> tuple[GridFunction, GridFunction]:
    x = grid.axis
    envelope = np.exp(-((x / 2.5) ** 2))

    def smooth():
        coef = rng.normal(size=6)
        vals = sum(c * np.cos((j + 1) * 0.7 * x + rng.uniform(0, 2 * math.pi))
                   for j, c in enumerate(coef))
        return GridFunction(grid, vals * envelope)

    return smooth(), smooth()


def criterion_duality_mean_zero(outdir: Path, ctx: dict) -> CriterionResult:
    t0 = time.perf_counter()
    grid = Grid(1, 12.0, 512)
    kernels = [presets.fractional_heat(0.5), presets.fractional_heat(1.5),
               presets.cosine_kernel(1.5)]
    rng = np.random.Generator(np.random.PCG64(20240501))
    rows = []
    worst_dual = worst_mz = 0.0
    for ker in kernels:
        fac = OperatorFactory(ker, grid, exterior="zero")
        for i in range(10):
            f, g = _random_decaying_pair(grid, rng)
            dual = operator.verify_duality(ker, f, g, factory=fac)
            mz = max(operator.verify_mean_zero(ker, f, factory=fac),
                     operator.verify_mean_zero(ker, g, factory=fac))
            worst_dual = max(worst_dual, dual.residual)
            worst_mz = max(worst_mz, mz)
            rows.append({"kernel": ker.label, "pair": i, "duality": dual.residual,
                         "mean_zero": mz, "warning": dual.warning})
    passed = worst_dual <= 1e-6 and worst_mz <= 1e-6
    files = [write_json(outdir / "c03_duality_mean_zero.json", rows)]
    return _result("3 duality & mean-zero residuals <= 1e-6", passed,
                   {"worst_duality": worst_dual, "worst_mean_zero": worst_mz}, files, t0)


# -- criterion 4: maximum principle and Lp monotonicity ------------------------


def criterion_max_principle(outdir: Path, ctx: dict) -> CriterionResult:
    t0 = time.perf_counter()
    ker = presets.fractional_heat(0.5)
    grid = Grid(1, 12.0, 384)
    w0 = presets.gaussian_bump(grid, height=1.0, width=1.0)
    traj = solver.solve(ker, w0, 0.5, snapshot_stride=8)
    reports = {p: solver.verify_lp_monotone(traj, p) for p in (1, 2, np.inf)}
    maxp = solver.verify_max_principle(traj, rtol=1e-12)
    bound = solver.stability_bound(ker, grid)
    bad = solver.solve(ker, w0, 40 * 4 * bound, dt=4 * bound, allow_unstable=True,
                       snapshot_stride=8)
    neg = solver.verify_lp_monotone(bad, np.inf)
    passed = (maxp and all(r.passed for r in reports.values()) and not neg.passed)
    details = {
        "max_principle_1e-12": maxp,
        "monotone": {str(p): {"defect": r.defect, "threshold": r.threshold, "passed": r.passed}
                     for p, r in reports.items()},
        "negative_control_defect": neg.defect,
        "negative_control_failed_as_expected": not neg.passed,
    }
    files = [write_json(outdir / "c04_max_principle.json", details)]
    return _result("4 discrete maximum principle + Lp monotonicity + CFL control",
                   passed, details, files, t0)


# -- criterion 5: decay exponents ---------------------------------------------


def criterion_decay_exponent(outdir: Path, ctx: dict) -> CriterionResult:
    t0 = time.perf_counter()
    cases = [
        # (alpha, R, n, width, height, horizon)
        (0.5, 96.0, 1536, 0.25, 120.0, 16.0),
        (1.5, 32.0, 768, 0.5, 40.0, 60.0),
    ]
    rows, files = [], []
    ok = True
    for alpha, R, n, width, height, horizon in cases:
        ker = presets.fractional_heat(alpha)
        grid = Grid(1, R, n)
        w0 = presets.gaussian_bump(grid, height=height, width=width)
        fit, traj = solver.linf_decay_fit(ker, w0, horizon=horizon)
        expected = -1.0 / alpha
        tol = 0.15 * abs(expected)
        good = fit.conclusive and abs(fit.slope - expected) <= tol
        ok &= bool(good)
        rows.append({"alpha": alpha, "slope": fit.slope, "half_width": fit.half_width,
                     "expected": expected, "tolerance": tol, "passed": bool(good)})
        csv = write_csv(outdir / f"c05_decay_alpha{alpha}.csv",
                        {"t": traj.series.t, "linf": traj.series.linf})
        files.append(csv)
        files.append(write_json(outdir / f"c05_decay_alpha{alpha}.json",
                                {"alpha": alpha, "N": 1, "slope": fit.slope,
                                 "half_width": fit.half_width, "guide_slope": expected}))
    return _result("5 L-inf decay slope within 15% of -N/alpha", ok, {"cases": rows}, files, t0)


# -- criteria 6/7: calibration, held-out tracking, and the ladder --------------


def _calibration(ctx: dict):
    if "constants" in ctx:
        return ctx["constants"], ctx["cal_kernel"], ctx["cal_grid"]
    ker = presets.fractional_heat(0.5, gamma=0.4)
    grid = Grid(1, 6.0, 512)
    members = evolution.generate_ensemble(grid, [0.25, 0.5, 1.0], 20, seed=12345, gamma=0.4)
    consts = evolution.calibrate(ker, members, gamma=0.4, horizon_fraction=0.4)
    ctx.update(constants=consts, cal_kernel=ker, cal_grid=grid)
    return consts, ker, grid


def criterion_short_time_evolution(outdir: Path, ctx: dict) -> CriterionResult:
    t0 = time.perf_counter()
    consts, ker, grid = _calibration(ctx)
    step5 = consts.verify_step5()
    algebra_ok = (step5["A_inequality_slack"] >= -1e-12
                  and step5["beta_inequality_slack"] >= -1e-12
                  and step5["L_identity_residual"] <= 1e-12 * (1 + consts.L)
                  and step5["beta_in_range"] == 1.0 and step5["A_at_least_one"] == 1.0)
    held = evolution.generate_ensemble(grid, [0.25, 0.5, 1.0], 10, seed=999, gamma=0.4)
    rows, files = [], []
    all_pass = True
    for i, (phi0, r) in enumerate(held):
        rep = evolution.track_short_time(ker, phi0, r, consts, slack=0.05)
        all_pass &= rep.passed
        rows.append({"member": i, "r": r, "passed": rep.passed,
                     "worst_ratio": float((rep.factor / rep.envelope).max())})
        files.append(write_csv(outdir / f"c06_member{i:02d}.csv", rep.columns()))
    files.append(write_json(outdir / "c06_constants.json", consts.to_dict()))
    files.append(write_json(outdir / "c06_step5.json", step5))
    passed = algebra_ok and all_pass
    return _result("6 short-time class evolution on held-out ensemble (5% slack) + Step-5 algebra",
                   passed, {"step5": step5, "members": rows}, files, t0)


def criterion_schedule(outdir: Path, ctx: dict) -> CriterionResult:
    t0 = time.perf_counter()
    consts, ker, grid = _calibration(ctx)
    details = {}
    ok = True
    for r in (0.25, 0.5, 1.0):
        s = evolution.schedule(r, consts)
        a = consts.alpha
        tele = np.concatenate([[0.0], np.cumsum(consts.delta * s.z_levels[:-1] ** a)])[: s.k]
        tele_err = float(np.max(np.abs(s.t_knots[: s.k] - tele) / (1.0 + np.abs(tele))))
        ok &= tele_err <= 1e-12
        if s.t_top > 0:
            ts = np.linspace(0, s.t_top * (1 - 1e-9), 4001)[1:]
            zs = s.z_of(ts)
            bound = (s.eta**a - 1.0) / (s.eta * consts.delta)
            margin = float(np.min(zs**a / ts) - bound)
            ok &= margin >= -1e-12
        else:
            margin = math.inf
        details[f"r={r}"] = {"k": s.k, "t_top": s.t_top, "t_tilde": s.t_tilde,
                             "telescoping_err": tele_err, "careful_repetition_margin": margin}
    # composition of two short-time steps (factors multiply across a restart)
    phi0, r = evolution.generate_ensemble(grid, [0.5], 1, seed=777, gamma=0.4)[0]
    L, beta, A, delta, a = consts.L, consts.beta, consts.A, consts.delta, consts.alpha
    s1 = delta * r**a
    z1 = r * (1 + L * s1 / r**a)
    s2 = delta * z1**a
    z2 = z1 * (1 + L * s2 / z1**a)
    traj = solver.solve(ker, phi0, s1 + s2, snapshot_stride=10**9, series_stride=10**9,
                        gamma=0.4)
    rep = dualclass.membership(traj.frames[-1], z2, A=A, gamma=0.4)
    env = (r / z2) ** beta
    comp_ratio = rep.factor / env
    ok &= comp_ratio <= 1.10
    details["composition"] = {"r": r, "z1": z1, "z2": z2, "factor": rep.factor,
                              "envelope": env, "ratio": comp_ratio}
    files = [write_json(outdir / "c07_schedule.json", details)]
    return _result("7 ladder telescoping 1e-12, careful-repetition bound, composition law <=10%",
                   ok, details, files, t0)


# -- criterion 8: persistence and smoothing envelopes --------------------------


def criterion_persistence(outdir: Path, ctx: dict) -> CriterionResult:
    t0 = time.perf_counter()
    consts, _, _ = _calibration(ctx)
    beta = consts.beta
    rows, files = [], []
    ok = True
    kernels = [presets.fractional_heat(0.5), presets.cosine_kernel(1.5), presets.xdep_kernel(0.5)]
    grid = Grid(1, 16.0, 512)
    w0 = from_callable(grid, lambda x: np.minimum(np.abs(x) ** beta, 1.0) * np.exp(-((x / 10.0) ** 4)))
    for ker in kernels:
        rep = estimates.persistence_experiment(ker, w0, beta, horizons=(1.0, 4.0, 16.0))
        vals = list(rep.horizon_ratios.values())
        flat = max(vals) <= min(vals) * 1.10
        ok &= bool(flat)
        rows.append({"kernel": ker.label, "ratios": rep.horizon_ratios, "flat_10pct": bool(flat)})
        safe = ker.label.replace("(", "_").replace(")", "").replace("=", "")
        files.append(write_csv(outdir / f"c08_persistence_{safe}.csv", rep.series))

    sm_grid = Grid(1, 16.0, 512)
    step = from_callable(sm_grid, lambda x: np.tanh(x / (2 * sm_grid.h)) * np.exp(-((x / 10.0) ** 4)))
    rep_s = estimates.smoothing_experiment(presets.fractional_heat(0.5), step, beta,
                                           t_range=(0.02, 4.0))
    ok &= rep_s.passed
    files.append(write_csv(outdir / "c08_smoothing_sup.csv", rep_s.series))

    spike_grid = Grid(1, 12.0, 512)
    spike = presets.gaussian_bump(spike_grid, height=1.0, width=3 * spike_grid.h)
    rep_l = estimates.l1_smoothing_experiment(presets.fractional_heat(1.5), spike, beta,
                                              t_range=(0.005, 2.0))
    degr = float(rep_l.note.split("by ")[1].rstrip("x")) if "by" in rep_l.note else math.inf
    ok &= rep_l.passed and degr > 2.0
    files.append(write_csv(outdir / "c08_smoothing_l1.csv", rep_l.series))
    details = {"persistence": rows,
               "sup_smoothing": {"constant": rep_s.measured_constant,
                                 "drift": rep_s.refinement_drift, "passed": rep_s.passed},
               "l1_smoothing": {"constant": rep_l.measured_constant,
                                "drift": rep_l.refinement_drift,
                                "wrong_exponent_degradation": degr, "passed": rep_l.passed}}
    files.append(write_json(outdir / "c08_estimates.json", details))
    return _result("8 persistence flat across horizons; smoothing envelopes stable; control > 2x",
                   ok, details, files, t0)


# -- criterion 9: transport duality under a time-dependent kernel --------------


def criterion_transport_duality(outdir: Path, ctx: dict) -> CriterionResult:
    t0 = time.perf_counter()
    ker = presets.tdep_kernel(0.5)
    results = []
    for n in (256, 512):
        grid = Grid(1, 10.0, n)
        w0 = presets.gaussian_bump(grid, width=1.0)
        phi0 = evolution.make_double_bump(grid, 1.0, sig=0.45, sep=0.5)
        dt = 0.01 * 256 / n
        rep = dualclass.verify_transport_duality(ker, w0, phi0, t_bar=0.5, dt=dt)
        results.append({"n": n, "dt": rep.dt, "h": grid.h, "residual": rep.residual,
                        "C": rep.residual / (rep.dt + grid.h)})
    c1, c2 = results[0]["C"], results[1]["C"]
    stable = (max(c1, c2) / max(min(c1, c2), 1e-300)) <= 3.0
    res_drops = results[1]["residual"] <= results[0]["residual"]
    passed = stable and res_drops
    details = {"runs": results, "C_ratio": max(c1, c2) / max(min(c1, c2), 1e-300)}
    files = [write_json(outdir / "c09_transport_duality.json", details)]
    return _result("9 transport duality residual <= C(dt+h), C stable under halving",
                   passed, details, files, t0)


# -- criterion 10: nonlinear reduction ------------------------------------------


def criterion_nonlinear(outdir: Path, ctx: dict) -> CriterionResult:
    t0 = time.perf_counter()
    details = {}
    ok = True

    # phi'' = 1 reduction matches the linear solver to 1e-12
    grid = Grid(1, 8.0, 256)
    probl = nonlinear.NonlinearProblem(presets.linear_nonlinearity(),
                                       presets.fractional_heat(0.5),
                                       presets.gaussian_bump(grid, exterior="constant"),
                                       Lambda=1.0)
    tr = nonlinear.solve_nonlinear(probl, 0.5, snapshot_stride=10**9)
    lin = solver.solve(presets.fractional_heat(0.5), probl.theta0, 0.5, dt=tr.dt,
                       snapshot_stride=10**9)
    red = float(np.abs(tr.frames[-1].values - lin.frames[-1].values).max())
    details["linear_reduction_sup"] = red
    ok &= red <= 1e-12

    # alpha = 1.5 problem: symmetry, conditions, cancellation, consistency
    prob = presets.nonlinear_problem(1.5, grid)
    traj = nonlinear.solve_nonlinear(prob, 0.1, snapshot_stride=4)
    ik = nonlinear.induced_kernel(traj)
    xs = np.linspace(-3, 3, 13)[:, None]
    zs = np.linspace(0.05, 2.0, 9)[None, :]
    sym = float(np.abs(ik(0.05, xs, zs) - ik(0.05, xs + zs, -zs)).max())
    details["induced_symmetry_defect"] = sym
    ok &= sym <= 1e-12

    plan = SamplingPlan(box_radius=4.0, n_times=4, time_span=(0.0, traj.t_end),
                        n_space=8, n_radii=16, radius_min=0.05, radius_max=6.0)
    report = check_conditions(ik, plan)
    details["conditions"] = {k: v.passed for k, v in report.verdicts.items()}
    ok &= report.verdicts["symmetry"].passed and report.verdicts["lower_bound"].passed \
        and report.verdicts["upper_bound"].passed and report.verdicts["cancellation"].passed

    prof = nonlinear.verify_induced_cancellation(traj)
    details["cancellation"] = {"C": prof.bound_constant, "drift": prof.refinement_drift,
                               "large_s_margin": prof.large_s_margin}
    ok &= prof.refinement_drift < 0.15 and prof.large_s_margin >= -1e-9

    cons = []
    for n, dt_scale in ((256, 1.0), (512, 0.5 ** 1.5)):
        g = Grid(1, 8.0, n)
        p = presets.nonlinear_problem(1.5, g)
        trj = nonlinear.solve_nonlinear(p, 0.1, snapshot_stride=2)
        err = nonlinear.derivative_consistency(trj)
        cons.append({"n": n, "dt": trj.dt, "h": g.h, "err": err,
                     "C": err / (trj.dt + g.h)})
    details["derivative_consistency"] = cons
    c_vals = [c["C"] for c in cons]
    ok &= (max(c_vals) / max(min(c_vals), 1e-300)) <= 3.0

    files = [write_json(outdir / "c10_nonlinear.json", details)]
    return _result("10 induced kernel exact symmetry, certified bounds/cancellation, "
                   "derivative consistency, linear reduction 1e-12", ok, details, files, t0)


CRITERIA = {
    "c01_symbol_oracle": criterion_symbol_oracle,
    "c02_gamma_profile": criterion_gamma_profile,
    "c03_duality_mean_zero": criterion_duality_mean_zero,
    "c04_max_principle": criterion_max_principle,
    "c05_decay_exponent": criterion_decay_exponent,
    "c06_short_time_evolution": criterion_short_time_evolution,
    "c07_schedule": criterion_schedule,
    "c08_persistence_smoothing": criterion_persistence,
    "c09_transport_duality": criterion_transport_duality,
    "c10_nonlinear": criterion_nonlinear,
}


def run_all(outdir, names=None) -> list[CriterionResult]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    ctx: dict = {}
    results = []
    for name, fn in CRITERIA.items():
        if names and name not in names:
            continue
        res = fn(outdir, ctx)
        results.append(res)
        print(res.summary_line(), flush=True)
    write_json(outdir / "acceptance_summary.json",
               [{"name": r.name, "passed": r.passed, "seconds": r.seconds} for r in results])
    return results
