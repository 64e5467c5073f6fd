"""Deterministic solvers: the continuum limit system, its lattice analogue and
the closed-form (memory) representation of the discrete species.

The limit system on the unit circle is

    u_t = u_xx + R_C(u, v),    v_t = R_D(u, v) = d_D v + b_D(u).

It is integrated pseudo-spectrally at ``m_ref`` collocation points
``x_j = j / m_ref`` with Strang splitting: half a pointwise reaction step
(classical RK4 on ``(u, v)``), an exact diffusion step ``exp(-(2 pi m)^2 dt)``
per Fourier mode, and another reaction half step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .lattice import (GridFunction, SpectralCoeffs, analyze_array, check_odd,
                      continuum_eigenvalues, eigenvalues, project_reference_array,
                      synthesize_array)
from .reactions import ReactionNetwork
from .ssa import reaction_table

OVERSHOOT = 1e-8
DEFAULT_MREF = 511


class SolverError(RuntimeError):
    """The reaction step left the admissible range ``[-1e-8, M + 2]``."""


def _drifts(tab, u, v):
    rc = np.empty_like(u)
    rd = np.empty_like(u)
    K.drift_field(u, v, tab, rc, rd)
    return rc, rd


def _reaction_rk4(tab, u, v, h, v_frozen=False):
    """One RK4 step of ``u' = R_C(u, v)``, ``v' = R_D(u, v)`` (``v`` held fixed
    when ``v_frozen``)."""
    k1u, k1v = _drifts(tab, u, v)
    if v_frozen:
        k1v = np.zeros_like(v)
    k2u, k2v = _drifts(tab, u + 0.5 * h * k1u, v + 0.5 * h * k1v)
    if v_frozen:
        k2v = k1v
    k3u, k3v = _drifts(tab, u + 0.5 * h * k2u, v + 0.5 * h * k2v)
    if v_frozen:
        k3v = k1v
    k4u, k4v = _drifts(tab, u + h * k3u, v + h * k3v)
    if v_frozen:
        k4v = k1v
    u_new = u + h / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u)
    v_new = v + h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
    return u_new, v_new


def _diffuse(u, decay):
    return np.fft.irfft(np.fft.rfft(u) * decay, n=u.size)


def _check_range(u, M, t, active=True):
    if not active:
        return
    lo, hi = float(u.min()), float(u.max())
    if lo < -OVERSHOOT or hi > M + 2:
        raise SolverError(f"u left [-1e-8, M+2] at t={t:.6g}: range [{lo:.3g}, {hi:.3g}]")


def _steps(T, dt):
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not T > 0:
        raise ValueError("T must be positive")
    nsteps = int(np.ceil(T / dt - 1e-9))
    return nsteps, T / nsteps


@dataclass(frozen=True)
class LimitSolution:
    m_ref: int
    times: np.ndarray
    a: np.ndarray
    b: np.ndarray
    v: np.ndarray
    dt: float
    M: float
    max_sup: float
    method: str = "strang-rk4"
    b_path: np.ndarray | None = field(default=None, repr=False)

    def u_coeffs(self, i) -> SpectralCoeffs:
        return SpectralCoeffs(self.m_ref, self.a[i].copy(), self.b[i].copy())

    def u_values(self) -> np.ndarray:
        """``u`` at the collocation points, one row per stored time."""
        return synthesize_array(self.a, self.b, self.m_ref)

    def project_u(self, n) -> np.ndarray:
        """Cell averages ``P_N u`` on ``n`` cells, one row per stored time."""
        return project_reference_array(self.a, self.b, n)

    def project_v(self, n) -> np.ndarray:
        """Cell averages of the trigonometric interpolant of ``v``."""
        va, vb = analyze_array(self.v)
        return project_reference_array(va, vb, n)

    @property
    def max_principle_margin(self) -> float:
        """``M - sup_t ||u||_inf`` (negative when the bound is exceeded)."""
        return self.M - self.max_sup

    def metadata(self) -> dict:
        return {"method": self.method, "m_ref": self.m_ref, "dt": self.dt,
                "T": float(self.times[-1]), "M": self.M, "max_sup": self.max_sup,
                "max_principle_margin": self.max_principle_margin}


def solve_limit(network: ReactionNetwork, u0: SpectralCoeffs, v0, T, dt,
                m_ref: int = DEFAULT_MREF, save_every: int = 1,
                keep_b_path: bool = False) -> LimitSolution:
    """Strang-split pseudo-spectral solution of the limit system on ``[0, T]``.

    ``u0`` must be band-limited to ``m_ref`` modes; ``v0`` holds values at the
    collocation points.  States are stored every ``save_every`` steps and at T.
    ``keep_b_path`` also stores ``b_D(u)`` at every step for the memory form.
    """
    m_ref = check_odd(m_ref)
    if u0.n > m_ref:
        raise ValueError(f"u0 has {u0.n} cells of resolution, more than m_ref = {m_ref}")
    nsteps, h = _steps(T, dt)
    a0 = np.zeros((m_ref + 1) // 2)
    b0 = np.zeros_like(a0)
    a0[:u0.a.size] = u0.a
    b0[:u0.b.size] = u0.b
    u = synthesize_array(a0, b0, m_ref)
    v = np.array(np.asarray(v0, dtype=float), dtype=float)
    if v.shape != (m_ref,):
        raise ValueError(f"v0 must have {m_ref} collocation values")
    tab = reaction_table(network)
    decay = np.exp(-continuum_eigenvalues(m_ref) * h)
    M = float(network.M)
    # without C reactions the reaction step is the identity and signed data are fine
    guard = bool(network.subset("C"))
    bD = network.R_D.b
    times, us, vs = [0.0], [u.copy()], [v.copy()]
    bpath = [bD(u)] if keep_b_path else None
    sup = float(np.max(np.abs(u)))
    for k in range(1, nsteps + 1):
        u, v = _reaction_rk4(tab, u, v, 0.5 * h)
        _check_range(u, M, (k - 0.5) * h, guard)
        u = _diffuse(u, decay)
        u, v = _reaction_rk4(tab, u, v, 0.5 * h)
        _check_range(u, M, k * h, guard)
        sup = max(sup, float(np.max(np.abs(u))))
        if keep_b_path:
            bpath.append(bD(u))
        if k % save_every == 0 or k == nsteps:
            times.append(k * h)
            us.append(u.copy())
            vs.append(v.copy())
    a, b = analyze_array(np.array(us))
    return LimitSolution(m_ref, np.array(times), a, b, np.array(vs), h, M, sup,
                         b_path=np.array(bpath) if keep_b_path else None)


def memory_form_v(network: ReactionNetwork, solution: LimitSolution, v0) -> np.ndarray:
    """``v(t) = e^{d_D t} v0 + int_0^t e^{d_D (t - s)} b_D(u(s)) ds`` by the
    trapezoidal rule at the solver's step, returned at the stored times."""
    if solution.b_path is None:
        raise ValueError("solve with keep_b_path=True to supply u at every step")
    dD = float(network.R_D.d)
    h = solution.dt
    E = np.exp(dD * h)
    v0 = np.asarray(v0, dtype=float)
    bp = solution.b_path
    stored = set(np.rint(solution.times / h).astype(int).tolist())
    out = []
    integral = np.zeros_like(v0)
    for k in range(bp.shape[0]):
        if k > 0:
            integral = E * integral + 0.5 * h * (E * bp[k - 1] + bp[k])
        if k in stored:
            out.append(np.exp(dD * k * h) * v0 + integral)
    return np.array(out)


@dataclass(frozen=True)
class LatticeSolution:
    n: int
    times: np.ndarray
    w: np.ndarray
    dt: float
    M: float
    max_sup: float

    def at(self, i) -> GridFunction:
        return GridFunction(self.w[i])


def solve_lattice_pde(network: ReactionNetwork, u0, v_times, v_values, T, dt,
                      save_every: int = 1) -> LatticeSolution:
    """Strang scheme for ``w' = Delta_N w + R_C(w, v)`` with a prescribed ``v``.

    ``v`` is piecewise constant in time: on ``[v_times[i], v_times[i+1])`` it
    equals ``v_values[i]``, matching the right-continuous jump paths.
    """
    u = np.array(np.asarray(u0, dtype=float), dtype=float)
    n = check_odd(u.size)
    v_times = np.asarray(v_times, dtype=float)
    v_values = np.asarray(v_values, dtype=float)
    if v_values.ndim != 2 or v_values.shape[1] != n or len(v_times) != len(v_values):
        raise ValueError("v path must be (times, values) with one row of n cells per time")
    if v_times[0] > 0 or v_times[-1] < T - 1e-12:
        raise ValueError(f"v path covers [{v_times[0]:g}, {v_times[-1]:g}], not [0, {T:g}]")
    nsteps, h = _steps(T, dt)
    tab = reaction_table(network)
    decay = np.exp(-eigenvalues(n) * h)
    M = float(network.M)
    # without C reactions the reaction step is the identity and signed data are fine
    guard = bool(network.subset("C"))
    times, ws = [0.0], [u.copy()]
    sup = float(np.max(np.abs(u)))

    def v_at(t):
        i = int(np.searchsorted(v_times, t + 1e-12, side="right")) - 1
        return v_values[max(i, 0)]

    for k in range(1, nsteps + 1):
        t0 = (k - 1) * h
        u, _ = _reaction_rk4(tab, u, v_at(t0), 0.5 * h, v_frozen=True)
        _check_range(u, M, t0 + 0.5 * h, guard)
        u = _diffuse(u, decay)
        u, _ = _reaction_rk4(tab, u, v_at(t0 + 0.5 * h), 0.5 * h, v_frozen=True)
        _check_range(u, M, k * h, guard)
        sup = max(sup, float(np.max(np.abs(u))))
        if k % save_every == 0 or k == nsteps:
            times.append(k * h)
            ws.append(u.copy())
    return LatticeSolution(n, np.array(times), np.array(ws), h, M, sup)


def self_convergence_order(network, u0: SpectralCoeffs, v0, T, dt, m_ref=DEFAULT_MREF):
    """Observed order from the Richardson triplet ``dt, dt/2, dt/4`` at time T."""
    finals = []
    for k in range(3):
        sol = solve_limit(network, u0, v0, T, dt / 2**k, m_ref, save_every=10**9)
        finals.append(np.concatenate([sol.u_values()[-1], sol.v[-1]]))
    e1 = np.max(np.abs(finals[0] - finals[1]))
    e2 = np.max(np.abs(finals[1] - finals[2]))
    return float(np.log2(e1 / e2)), float(e1), float(e2)
