"""Ensemble experiments: law of large numbers, martingale decay, tail
frequencies of the stochastic convolution, compensator audits and the
deterministic inequality probes.

Every experiment is a pure function of its inputs and a master seed; replica
seeds come from :func:`mesoscale.ssa.replica_seed` and results are reduced in
replica order, so reports do not depend on scheduling.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import lattice as L
from .limit import DEFAULT_MREF, solve_limit
from .reactions import ReactionNetwork, load_network
from .ssa import (SimConfig, SimulationError, compensator_audit, martingale_arrays,
                  replica_seed, round_counts, simulate, stochastic_convolution)
from .stats import bootstrap_ci, bootstrap_slope, fit_slope

METRICS = ("u_sup", "u_beta", "v_neg_alpha")


# ---------------------------------------------------------------------------
# initial data
# ---------------------------------------------------------------------------

def _modes_from_json(d) -> dict:
    return {int(k): float(v) for k, v in (d or {}).items()}


@dataclass(frozen=True)
class InitialData:
    """Band-limited initial profiles given by their cosine/sine coefficients in
    the ``sqrt(2) cos(2 pi m x)`` basis (mode 0 is the mean)."""
    u_cos: dict = field(default_factory=lambda: {0: 0.5})
    u_sin: dict = field(default_factory=dict)
    v_cos: dict = field(default_factory=lambda: {0: 1.0})
    v_sin: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d) -> "InitialData":
        return cls(_modes_from_json(d.get("u_cos", {"0": 0.5})), _modes_from_json(d.get("u_sin")),
                   _modes_from_json(d.get("v_cos", {"0": 1.0})), _modes_from_json(d.get("v_sin")))

    def to_dict(self) -> dict:
        return {k: {str(m): c for m, c in sorted(getattr(self, k).items())}
                for k in ("u_cos", "u_sin", "v_cos", "v_sin")}

    def u_coeffs(self, m_ref) -> L.SpectralCoeffs:
        return L.SpectralCoeffs.from_modes(m_ref, self.u_cos, self.u_sin)

    def v_coeffs(self, m_ref) -> L.SpectralCoeffs:
        return L.SpectralCoeffs.from_modes(m_ref, self.v_cos, self.v_sin)

    def v_collocation(self, m_ref) -> np.ndarray:
        return L.synthesize(self.v_coeffs(m_ref)).values

    def lattice(self, n, m_ref=DEFAULT_MREF):
        """``(P_N u0, round(P_N v0))``: cell averages, with ``v`` rounded to counts."""
        u = L.project_reference(self.u_coeffs(m_ref), n).values
        v = L.project_reference(self.v_coeffs(m_ref), n).values
        return np.clip(u, 0.0, None), round_counts(np.clip(v, 0.0, None)).astype(float)


# ---------------------------------------------------------------------------
# plans and reports
# ---------------------------------------------------------------------------

def scaled_population(n, c, beta, delta) -> int:
    """``l(n) = ceil(c n^{2 beta} log(n)^{1 + delta})``."""
    return int(math.ceil(c * n ** (2 * beta) * math.log(n) ** (1 + delta)))


@dataclass(frozen=True)
class ExperimentPlan:
    network: str
    grid: tuple
    alpha: float
    beta: float
    T: float
    samples: int
    seed: int
    m_ref: int = DEFAULT_MREF
    dt: float = 1e-4
    initial: InitialData = field(default_factory=InitialData)
    scaling: tuple | None = None

    def __post_init__(self):
        grid = tuple((int(n), float(l), int(r)) for n, l, r in self.grid)
        object.__setattr__(self, "grid", grid)
        for n, l, r in grid:
            L.check_odd(n)
            if r < 1:
                raise ValueError("every grid point needs at least one replica")
        if not 0 < self.alpha < self.beta < 0.5:
            raise ValueError("norm indices must satisfy 0 < alpha < beta < 1/2")
        kappa = [l * n ** (-2 * self.beta) / math.log(n) for n, l, _ in grid]
        if any(b <= a for a, b in zip(kappa, kappa[1:])):
            raise ValueError("l n^{-2 beta} / log n must increase along the grid")
        if self.samples < 2:
            raise ValueError("need at least two sample times")

    @classmethod
    def from_rule(cls, network, ns, replicas, c, beta, delta, alpha, T, samples, seed, **kw):
        grid = tuple((n, scaled_population(n, c, beta, delta), replicas) for n in ns)
        return cls(network, grid, alpha, beta, T, samples, seed,
                   scaling=(float(c), float(beta), float(delta)), **kw)

    @classmethod
    def from_dict(cls, d) -> "ExperimentPlan":
        d = dict(d)
        initial = InitialData.from_dict(d.pop("initial", {}))
        rule = d.pop("scaling", None)
        if rule is not None and "grid" in d:
            d["scaling"] = tuple(float(x) for x in (
                rule if not isinstance(rule, dict) else (rule["c"], d["beta"], rule["delta"])))
        elif rule is not None:
            ns = d.pop("n")
            reps = d.pop("replicas")
            return cls.from_rule(d.pop("network"), ns, reps, rule["c"], d.pop("beta"),
                                 rule["delta"], d.pop("alpha"), d.pop("T"), d.pop("samples"),
                                 d.pop("seed"), initial=initial, **d)
        return cls(initial=initial, **d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["initial"] = self.initial.to_dict()
        d["grid"] = [list(g) for g in self.grid]
        return d

    @property
    def sample_times(self) -> tuple:
        return tuple(float(t) for t in np.linspace(0.0, self.T, self.samples))

    def steps_per_sample(self) -> int:
        k = self.T / (self.samples - 1) / self.dt
        if abs(k - round(k)) > 1e-6:
            raise ValueError("the sample spacing must be a multiple of the reference dt")
        return int(round(k))


def _summary(x, seed):
    x = np.asarray(x, dtype=float)
    lo, hi = bootstrap_ci(x, stat=np.median, seed=seed)
    return {"median": float(np.median(x)), "mean": float(np.mean(x)),
            "p90": float(np.quantile(x, 0.9)), "lo": lo, "hi": hi}


@dataclass
class ErrorReport:
    plan: dict
    rows: list
    slopes: dict
    checks: dict
    errors: dict = field(repr=False, default_factory=dict)
    label: str = ("monotone decrease of the median errors is the operational form of "
                  "convergence in probability; no rate is asserted")

    @property
    def passed(self) -> bool:
        return all(c["strictly_decreasing"] and c["halved"] for c in self.checks.values())

    def to_dict(self) -> dict:
        return {"plan": self.plan, "rows": self.rows, "slopes": self.slopes,
                "checks": self.checks, "passed": self.passed, "label": self.label}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        head = ["n", "l", "replicas", "aborted", "truncations"]
        for m in METRICS:
            head += [f"{m}_{s}" for s in ("median", "mean", "p90", "lo", "hi")]
        w.writerow(head)
        for r in self.rows:
            line = [r["n"], r["l"], r["replicas"], r["aborted"], r["truncations"]]
            for m in METRICS:
                line += [repr(r[m][s]) for s in ("median", "mean", "p90", "lo", "hi")]
            w.writerow(line)
        return buf.getvalue()

    def plot_tables(self) -> dict:
        return {m: plot_csv([(r["n"], r["l"], m, r[m]["median"], r[m]["lo"], r[m]["hi"])
                             for r in self.rows]) for m in METRICS}


def plot_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "l", "metric", "median", "lo", "hi"])
    for r in rows:
        w.writerow([r[0], r[1], r[2]] + [repr(float(x)) for x in r[3:]])
    return buf.getvalue()


def lattice_errors(u_path, v_path, ref_u, ref_v, alpha, beta) -> dict:
    """Sup-in-time errors of one lattice path against projected references."""
    du = np.asarray(u_path) - ref_u
    dv = np.asarray(v_path) - ref_v
    return {"u_sup": float(np.max(np.abs(du))),
            "u_beta": float(np.max(L.sobolev_norm_array(du, beta))),
            "v_neg_alpha": float(np.max(L.sobolev_norm_array(dv, -alpha)))}


def _map(fn, items, jobs):
    if jobs <= 1:
        return [fn(i) for i in items]
    from concurrent.futures import ThreadPoolExecutor
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def run_lln(plan: ExperimentPlan, jobs: int = 1, sampler=None, reference=None) -> ErrorReport:
    """Law-of-large-numbers experiment over the plan's ``(n, l)`` grid.

    ``sampler(n, l, seed)`` may replace the jump process; it must return
    ``(u_path, v_path, truncated)`` at the plan's sample times.  ``reference(n)``
    may replace the projected limit solution and returns ``(ref_u, ref_v)``.
    """
    network = load_network(plan.network)
    times = plan.sample_times
    if reference is None:
        sol = solve_limit(network, plan.initial.u_coeffs(plan.m_ref),
                          plan.initial.v_collocation(plan.m_ref), plan.T, plan.dt,
                          plan.m_ref, save_every=plan.steps_per_sample())
        if len(sol.times) != len(times):
            raise RuntimeError("reference solve did not land on the sample times")

        def reference(n):
            return sol.project_u(n), sol.project_v(n)

    rows, errors = [], {}
    for gi, (n, l, reps) in enumerate(plan.grid):
        ref_u, ref_v = reference(n)
        u0, v0 = plan.initial.lattice(n, plan.m_ref)
        cfg = SimConfig(n=n, l=l, T=plan.T, sample_times=times, seed=0)

        def one(i, n=n, l=l, ref_u=ref_u, ref_v=ref_v, u0=u0, v0=v0, cfg=cfg, gi=gi):
            seed = replica_seed(plan.seed, gi * 1_000_003 + i)
            try:
                if sampler is None:
                    tr = simulate(network, u0, v0, replace(cfg, seed=seed))
                    up, vp, trunc = tr.u, tr.v, tr.truncated_at is not None
                else:
                    up, vp, trunc = sampler(n, l, seed)
            except SimulationError:
                return None
            return lattice_errors(up, vp, ref_u, ref_v, plan.alpha, plan.beta), trunc

        results = _map(one, range(reps), jobs)
        ok = [r for r in results if r is not None]
        if not ok:
            raise RuntimeError(f"every replica aborted at n={n}")
        errs = {m: np.array([r[0][m] for r in ok]) for m in METRICS}
        errors[(n, l)] = errs
        row = {"n": n, "l": l, "replicas": len(ok), "aborted": reps - len(ok),
               "truncations": int(sum(r[1] for r in ok))}
        for k, m in enumerate(METRICS):
            row[m] = _summary(errs[m], seed=plan.seed + k)
        rows.append(row)

    slopes, checks = {}, {}
    ns = [r["n"] for r in rows]
    for m in METRICS:
        med = [r[m]["median"] for r in rows]
        if len(rows) >= 3 and min(med) > 0:
            slopes[m] = bootstrap_slope(ns, [errors[(r["n"], r["l"])][m] for r in rows],
                                        stat=np.median, seed=plan.seed).to_dict()
        checks[m] = {"medians": med,
                     "strictly_decreasing": bool(all(b < a for a, b in zip(med, med[1:]))),
                     "halved": bool(med[-1] <= 0.5 * med[0]),
                     "ratio_final_initial": float(med[-1] / med[0]) if med[0] > 0 else 0.0}
    return ErrorReport(plan.to_dict(), rows, slopes, checks, errors)


# ---------------------------------------------------------------------------
# martingale decay of the discrete species
# ---------------------------------------------------------------------------

@dataclass
class SlopeReport:
    alpha: float
    ns: list
    means: list
    fit: dict | None
    passed: bool
    degenerate: bool
    values: dict = field(repr=False, default_factory=dict)

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "n": self.ns, "mean_sup_sq": self.means,
                "fit": self.fit, "passed": self.passed, "degenerate": self.degenerate,
                "bound_slope": -2 * self.alpha}


def zd_decay_study(network, ns, replicas, alpha, l=50.0, T=1.0, samples=41,
                   initial=None, seed=0, jobs=1, tolerance=0.5) -> SlopeReport:
    """``E sup_t ||Z_D(t)||^2_{H_N^{-alpha}}`` against ``n`` (sup over samples).

    Passes when the fitted log-log slope is at most ``-2 alpha + tolerance``
    and its interval excludes 0.
    """
    if not 0 < alpha <= 0.5:
        raise ValueError("alpha must lie in (0, 1/2]")
    if len(ns) < 3:
        raise ValueError("a slope fit needs at least three values of n")
    network = load_network(network)
    initial = initial or InitialData({0: 0.0}, {}, {0: 0.0}, {})
    times = tuple(np.linspace(0.0, T, samples))
    values = {}
    for gi, n in enumerate(ns):
        u0, v0 = initial.lattice(n)
        cfg = SimConfig(n=n, l=l, T=T, sample_times=times, seed=0)

        def one(i, n=n, u0=u0, v0=v0, cfg=cfg, gi=gi):
            tr = simulate(network, u0, v0, replace(cfg, seed=replica_seed(seed, gi * 1_000_003 + i)))
            _, zd = martingale_arrays(tr)
            return float(np.max(L.sobolev_norm_array(zd, -alpha) ** 2))

        values[n] = np.array(_map(one, range(replicas), jobs))
    means = [float(values[n].mean()) for n in ns]
    if max(means) == 0.0:
        return SlopeReport(alpha, list(ns), means, None, True, True, values)
    fit = bootstrap_slope(ns, [values[n] for n in ns], seed=seed)
    passed = fit.slope <= -2 * alpha + tolerance and fit.hi < 0
    return SlopeReport(alpha, list(ns), means, fit.to_dict(), bool(passed), False, values)


# ---------------------------------------------------------------------------
# tails of the stochastic convolution
# ---------------------------------------------------------------------------

@dataclass
class TailReport:
    n: int
    ls: list
    eps: list
    beta: float
    freq_sup: dict
    freq_beta: dict
    checks: dict
    sups: dict = field(repr=False, default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_dict(self) -> dict:
        key = lambda d: {f"{e:g}": v for e, v in d.items()}
        return {"n": self.n, "l": self.ls, "beta": self.beta,
                "freq_sup": key(self.freq_sup), "freq_beta": key(self.freq_beta),
                "checks": self.checks, "passed": self.passed}


def _tail_checks(freqs, ls, replicas):
    """``(non-increasing, log-slope negative)``; the slope uses continuity-corrected
    frequencies ``(k + 1/2) / (R + 1)`` so that zero counts stay finite.  A row
    saturated at a single value carries no slope information and passes."""
    nonincreasing = all(b <= a for a, b in zip(freqs, freqs[1:]))
    if len(set(freqs)) == 1:
        return bool(nonincreasing), True
    smoothed = (np.asarray(freqs) * replicas + 0.5) / (replicas + 1)
    slope = np.polyfit(np.asarray(ls, dtype=float), np.log(smoothed), 1)[0]
    return bool(nonincreasing), bool(slope < 0)


def yn_tail_study(network, n, ls, eps, replicas, T=0.05, samples=21, beta=0.2,
                  initial=None, seed=0, jobs=1) -> TailReport:
    """Exceedance frequencies of ``sup_t ||Y_t||`` in the sup and ``H_N^beta``
    norms, per ``(l, eps)``, at a fixed cell count."""
    network = load_network(network)
    initial = initial or InitialData()
    times = tuple(np.linspace(0.0, T, samples))
    u0, v0 = initial.lattice(n)
    sups = {}
    for gi, l in enumerate(ls):
        cfg = SimConfig(n=n, l=l, T=T, sample_times=times, seed=0, log_events=True)

        def one(i, cfg=cfg, gi=gi):
            tr = simulate(network, u0, v0, replace(cfg, seed=replica_seed(seed, gi * 1_000_003 + i)))
            y = stochastic_convolution(tr, network)
            return float(np.max(y.sup_norms())), float(np.max(y.sobolev_norms(beta)))

        sups[l] = np.array(_map(one, range(replicas), jobs))
    freq_sup = {e: [float(np.mean(sups[l][:, 0] > e)) for l in ls] for e in eps}
    freq_beta = {e: [float(np.mean(sups[l][:, 1] > e)) for l in ls] for e in eps}
    checks = {}
    for e in eps:
        a, b = _tail_checks(freq_sup[e], ls, replicas)
        c, d = _tail_checks(freq_beta[e], ls, replicas)
        checks[f"sup_nonincreasing_eps{e:g}"] = a
        checks[f"sup_log_slope_negative_eps{e:g}"] = b
        checks[f"beta_nonincreasing_eps{e:g}"] = c
        checks[f"beta_log_slope_negative_eps{e:g}"] = d
    return TailReport(n, list(ls), list(eps), beta, freq_sup, freq_beta, checks, sups)


# ---------------------------------------------------------------------------
# compensator audits
# ---------------------------------------------------------------------------

def standard_probes(n) -> dict:
    """Constant, first cosine mode and a unit-mass spike on cell 0."""
    return {"one": np.ones(n), "phi1": L.basis_vector(n, 1, "cos"),
            "spike": n * L.GridFunction.indicator(n, 0).values}


def compensator_study(network, n, l, replicas, T=0.05, initial=None, probes=None,
                      seed=0, jobs=1) -> dict:
    """Audit ``S(T) - G(T)`` over an ensemble for each probe function."""
    network = load_network(network)
    initial = initial or InitialData()
    probes = probes or standard_probes(n)
    u0, v0 = initial.lattice(n)
    cfg = SimConfig(n=n, l=l, T=T, sample_times=(0.0, T), seed=0, log_events=True)

    def one(i):
        return simulate(network, u0, v0, replace(cfg, seed=replica_seed(seed, i)))

    trajs = _map(one, range(replicas), jobs)
    return {name: compensator_audit(trajs, network, phi, seed=seed)
            for name, phi in probes.items()}


# ---------------------------------------------------------------------------
# deterministic inequality probes
# ---------------------------------------------------------------------------

PRODUCT_RULES = {
    # name: (sign of the target index, alpha, beta, gamma)
    "product_positive_large": (+1, 0.3, 0.8, 0.2),
    "product_positive_small": (+1, 0.3, 0.3, 0.05),
    "product_dual_large": (-1, 0.2, 0.7, 0.6),
    "product_dual_small": (-1, 0.1, 0.4, 0.3),
}
INDICATOR_BAND = 1.35
INDICATOR_GAMMAS = (-0.4, 0.0, 0.4)
PROBE_NS = (31, 63, 127, 255, 501)


def probe_family(n, count, rng) -> np.ndarray:
    """Random test functions: white noise, power-law spectra and cell spikes."""
    H = (n + 1) // 2
    out = np.empty((count, n))
    kinds = rng.integers(0, 3, size=count)
    for i, k in enumerate(kinds):
        if k == 0:
            out[i] = rng.standard_normal(n)
        elif k == 1:
            s = rng.uniform(0.5, 2.0)
            w = (1.0 + np.arange(H)) ** (-s)
            a = rng.standard_normal(H) * w
            b = rng.standard_normal(H) * w
            b[0] = 0.0
            out[i] = L.synthesize_array(a, b, n)
        else:
            out[i] = 0.0
            out[i, rng.integers(0, n, size=rng.integers(1, 4))] = 1.0
    return out


def product_ratios(f, g, sign, alpha, beta, gamma) -> np.ndarray:
    """``||fg||_{sign gamma} / (||f||_{sign alpha} ||g||_beta)`` row-wise."""
    num = L.sobolev_norm_array(f * g, sign * gamma)
    den = L.sobolev_norm_array(f, sign * alpha) * L.sobolev_norm_array(g, beta)
    return num / den


def _continuum_neg_norm(f, alpha, fold=64):
    """``H^{-alpha}`` norm of the step function with cell values ``f`` (Fourier
    series truncated at ``fold * n`` frequencies)."""
    n = f.shape[-1]
    F = np.fft.fft(f, axis=-1) / n
    k = np.arange(-fold * n, fold * n + 1)
    coef = F[..., k % n] * np.sinc(k / n)
    w = (1.0 + (2 * np.pi * k) ** 2) ** (-alpha)
    return np.sqrt(np.sum(w * np.abs(coef) ** 2, axis=-1))


@dataclass
class ProbeReport:
    ns: list
    entries: dict

    @property
    def passed(self) -> bool:
        return all(e["passed"] for e in self.entries.values())

    def to_dict(self) -> dict:
        return {"n": self.ns, "entries": self.entries, "passed": self.passed}


def _slope_entry(ns, ratios, limit=0.1):
    fit = fit_slope(ns, ratios)
    return {"max_ratio": [float(r) for r in ratios], "slope": fit.slope, "r2": fit.r2,
            "passed": bool(fit.slope < limit)}


def inequality_probes(ns=PROBE_NS, trials=1000, seed=0) -> ProbeReport:
    """Empirical constants of the lattice inequalities and their growth in n."""
    rng = np.random.default_rng(seed)
    ns = [L.check_odd(n) for n in ns]
    entries = {}

    lo = min(float(np.min(L.eigenvalues(n)[1:] / L.continuum_eigenvalues(n)[1:])) for n in ns)
    hi = max(float(np.max(L.eigenvalues(n)[1:] / L.continuum_eigenvalues(n)[1:])) for n in ns)
    entries["eigenvalue_ratio"] = {"min": lo, "max": hi,
                                   "passed": bool(lo >= 4 / np.pi**2 and hi <= 1.0)}

    for gamma in INDICATOR_GAMMAS:
        r = [L.sobolev_norm(L.GridFunction.indicator(n, j), gamma) / n ** (gamma - 0.5)
             for n in ns for j in (0, n // 2)]
        ok = min(r) >= 1 / INDICATOR_BAND and max(r) <= INDICATOR_BAND
        if gamma == 0.0:
            ok = ok and bool(np.allclose(r, 1.0, rtol=1e-12, atol=0))
        entries[f"indicator_gamma{gamma:g}"] = {"min": min(r), "max": max(r), "passed": bool(ok)}

    for name, (sign, a, b, g) in PRODUCT_RULES.items():
        mx = []
        for n in ns:
            f = probe_family(n, trials, rng)
            h = probe_family(n, trials, rng)
            # always include the aligned single-spike pair, the extremal case
            f[0] = L.GridFunction.indicator(n, 0).values
            h[0] = f[0]
            mx.append(float(np.max(product_ratios(f, h, sign, a, b, g))))
        entries[name] = _slope_entry(ns, mx)

    a, b, T = 0.0, 0.4, 1.0
    mx = []
    for n in ns:
        f = probe_family(n, trials, rng)
        ts = np.exp(rng.uniform(np.log(1e-6), np.log(T), size=trials))
        Tf = np.array([L.heat_semigroup_array(fi, t) for fi, t in zip(f, ts)])
        r = ts ** ((b - a) / 2) * L.sobolev_norm_array(Tf, b) / L.sobolev_norm_array(f, a)
        # single modes at the maximizing time t = (b - a) / (2 lambda_m)
        lam = L.eigenvalues(n)[1:]
        tm = (b - a) / (2 * lam)
        rm = tm ** ((b - a) / 2) * np.exp(-lam * tm) * ((1 + lam) ** ((b - a) / 2))
        mx.append(float(max(r.max(), rm.max())))
    entries["heat_regularization"] = _slope_entry(ns, mx)

    worst = 0.0
    for n in ns:
        f = probe_family(n, min(trials, 200), rng)
        for eps in (0.05, 0.1, 0.25):
            rho = L.mollifier(eps, n).values
            mf = np.array([L.convolve_array(rho, fi) for fi in f])
            for al in (-1.0, -0.5, 0.0, 0.5, 1.0):
                worst = max(worst, float(np.max(L.sobolev_norm_array(mf, al)
                                                / L.sobolev_norm_array(f, al))))
    entries["mollifier_contraction"] = {"max_ratio": worst, "passed": bool(worst <= 1 + 1e-12)}

    mx = []
    for n in ns:
        f = probe_family(n, min(trials, 200), rng)
        fd = L.sobolev_norm_array(f, -0.25)
        fc = _continuum_neg_norm(f, 0.25)
        mx.append(float(max(np.max(fd / fc), np.max(fc / fd))))
    entries["negative_norm_equivalence"] = _slope_entry(ns, mx)
    return ProbeReport(ns, entries)
