"""Discrete Sobolev structure on the N-cell periodic lattice.

Cells are ``I_j = [j/n, (j+1)/n)`` for an odd cell count ``n``.  The real
orthonormal eigenbasis of the discrete Laplacian is

    phi_0 = 1,  phi_m(j) = sqrt(2) cos(2 pi m j / n),  psi_m(j) = sqrt(2) sin(2 pi m j / n)

for ``m = 1 .. (n-1)/2``, orthonormal for ``<f, g> = (1/n) sum_j f_j g_j``
(the L2 product of step functions).  Everything else in this module is a
mode-wise multiplier in that basis.

Public operations take and return :class:`GridFunction` /
:class:`SpectralCoeffs`.  The underscore-free ``*_array`` helpers work on
plain arrays with a trailing cell axis and are what the simulators and the
harness use in their inner loops.
"""

from __future__ import annotations

import functools
import io
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

SQRT2 = np.sqrt(2.0)
ALPHA_RANGE = (-2.0, 2.0)

# Gauss-Legendre rule used for every cell average of a smooth function.
_GL_POINTS = 32


def check_odd(n) -> int:
    """Validate a cell count and return it as ``int``."""
    if int(n) != n or n < 1 or int(n) % 2 == 0:
        raise ValueError(f"cell count must be an odd positive integer, got {n!r}")
    return int(n)


def check_alpha(alpha) -> float:
    """Validate a Sobolev index (finite, inside ``ALPHA_RANGE``)."""
    alpha = float(alpha)
    if not np.isfinite(alpha) or not ALPHA_RANGE[0] <= alpha <= ALPHA_RANGE[1]:
        raise ValueError(f"Sobolev index must lie in {list(ALPHA_RANGE)}, got {alpha}")
    return alpha


@dataclass(frozen=True)
class GridFunction:
    """Step function on ``n`` periodic cells; ``values[j]`` lives on ``I_j``."""

    values: np.ndarray
    n: int = field(init=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1:
            raise ValueError("GridFunction values must be one-dimensional")
        n = check_odd(values.size)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "n", n)

    @classmethod
    def constant(cls, n, c=1.0):
        return cls(np.full(check_odd(n), float(c)))

    @classmethod
    def indicator(cls, n, j):
        values = np.zeros(check_odd(n))
        values[j % n] = 1.0
        return cls(values)

    @classmethod
    def basis(cls, n, m, kind="cos"):
        """The eigenfunction ``phi_{m,N}`` (``kind="cos"``) or ``psi_{m,N}``."""
        return cls(basis_vector(n, m, kind))

    def __len__(self):
        return self.n

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def __add__(self, other):
        return GridFunction(self.values + _values(other, self.n))

    def __sub__(self, other):
        return GridFunction(self.values - _values(other, self.n))

    def __mul__(self, other):
        if np.isscalar(other):
            return GridFunction(self.values * other)
        return GridFunction(self.values * _values(other, self.n))

    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction(-self.values)

    def inner(self, other) -> float:
        """L2 product of step functions."""
        return float(np.dot(self.values, _values(other, self.n)) / self.n)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    # -- serialization -------------------------------------------------
    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("index,value\n")
        for j, x in enumerate(self.values):
            buf.write(f"{j},{float(x)!r}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "GridFunction":
        rows = [r for r in text.strip().splitlines() if r.strip()]
        if rows and not rows[0][0].lstrip("-").isdigit():
            rows = rows[1:]
        pairs = sorted((int(a), float(b)) for a, b in (r.split(",")[:2] for r in rows))
        idx = [p[0] for p in pairs]
        if idx != list(range(len(idx))):
            raise ValueError("CSV grid indices must be 0..n-1")
        return cls(np.array([p[1] for p in pairs]))

    def to_bytes(self) -> bytes:
        """Little-endian block: ``uint64`` length followed by ``float64`` values."""
        return struct.pack("<Q", self.n) + self.values.astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes, offset: int = 0) -> tuple["GridFunction", int]:
        (n,) = struct.unpack_from("<Q", data, offset)
        offset += 8
        values = np.frombuffer(data, dtype="<f8", count=n, offset=offset)
        return cls(values.astype(float)), offset + 8 * n


def _values(f, n=None) -> np.ndarray:
    if isinstance(f, GridFunction):
        v = f.values
    elif np.isscalar(f):
        return np.full(n, float(f))
    else:
        v = np.asarray(f, dtype=float)
    if n is not None and v.shape[-1] != n:
        raise ValueError(f"cell count mismatch: {v.shape[-1]} != {n}")
    return v


@dataclass(frozen=True)
class SpectralCoeffs:
    """Coefficients in the ``(phi_{m,N}, psi_{m,N})`` basis, ``m = 0..(n-1)/2``."""

    n: int
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        n = check_odd(self.n)
        a = np.array(self.a, dtype=float)
        b = np.array(self.b, dtype=float)
        half = (n + 1) // 2
        if a.shape != (half,) or b.shape != (half,):
            raise ValueError(f"expected {half} cosine and sine coefficients for n={n}")
        if b[0] != 0.0:
            raise ValueError("sine coefficient of mode 0 must vanish")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def modes(self) -> np.ndarray:
        return np.arange(self.a.size)

    def energy(self) -> np.ndarray:
        """``a_m^2 + b_m^2`` per mode."""
        return self.a**2 + self.b**2

    def to_dict(self) -> dict:
        return {"n": self.n, "a": self.a.tolist(), "b": self.b.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "SpectralCoeffs":
        return cls(int(d["n"]), np.asarray(d["a"], float), np.asarray(d["b"], float))

    @classmethod
    def from_modes(cls, n, cos=None, sin=None) -> "SpectralCoeffs":
        """Build from sparse ``{m: coeff}`` mappings; unspecified modes are 0."""
        n = check_odd(n)
        a = np.zeros((n + 1) // 2)
        b = np.zeros((n + 1) // 2)
        for m, c in (cos or {}).items():
            a[int(m)] = c
        for m, c in (sin or {}).items():
            if int(m) == 0:
                raise ValueError("mode 0 has no sine component")
            b[int(m)] = c
        return cls(n, a, b)


# ---------------------------------------------------------------------------
# basis, eigenvalues, weights
# ---------------------------------------------------------------------------

def basis_vector(n, m, kind="cos") -> np.ndarray:
    n = check_odd(n)
    if not 0 <= m <= (n - 1) // 2:
        raise ValueError(f"mode {m} out of range for n={n}")
    j = np.arange(n)
    if kind == "cos":
        return np.ones(n) if m == 0 else SQRT2 * np.cos(2 * np.pi * m * j / n)
    if kind == "sin":
        return np.zeros(n) if m == 0 else SQRT2 * np.sin(2 * np.pi * m * j / n)
    raise ValueError("kind must be 'cos' or 'sin'")


def eigenvalue(m, n) -> float:
    """``lambda_{m,N} = 2 n^2 (1 - cos(2 pi m / n))``, evaluated as ``4 n^2 sin^2(pi m / n)``."""
    n = check_odd(n)
    if int(m) != m or not 0 <= m <= (n - 1) // 2:
        raise ValueError(f"mode {m} out of range for n={n}")
    return float(4.0 * n * n * np.sin(np.pi * m / n) ** 2)


@functools.lru_cache(maxsize=256)
def _eigenvalues_cached(n: int) -> np.ndarray:
    m = np.arange((n + 1) // 2)
    lam = 4.0 * n * n * np.sin(np.pi * m / n) ** 2
    lam.setflags(write=False)
    return lam


def eigenvalues(n) -> np.ndarray:
    """All ``lambda_{m,N}`` for ``m = 0..(n-1)/2``."""
    return _eigenvalues_cached(check_odd(n))


def continuum_eigenvalues(n) -> np.ndarray:
    """``(2 pi m)^2`` for ``m = 0..(n-1)/2`` (periodic Laplacian on [0, 1))."""
    m = np.arange((check_odd(n) + 1) // 2)
    return (2 * np.pi * m) ** 2


def sobolev_weights(n, alpha) -> np.ndarray:
    """Mode weights ``(1 + lambda_{m,N})^alpha``."""
    return (1.0 + eigenvalues(n)) ** check_alpha(alpha)


# ---------------------------------------------------------------------------
# transforms
# ---------------------------------------------------------------------------

def analyze_array(values: np.ndarray):
    """FFT path: returns ``(a, b)`` with a trailing mode axis."""
    values = np.asarray(values, dtype=float)
    n = values.shape[-1]
    F = np.fft.rfft(values, axis=-1) / n
    a = SQRT2 * F.real
    b = -SQRT2 * F.imag
    a[..., 0] = F[..., 0].real
    b[..., 0] = 0.0
    return a, b


def synthesize_array(a: np.ndarray, b: np.ndarray, n: int) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    F = (a - 1j * b) / SQRT2
    F[..., 0] = a[..., 0]
    return np.fft.irfft(F * n, n=n, axis=-1)


@functools.lru_cache(maxsize=64)
def _basis_tables(n: int):
    j = np.arange(n)
    m = np.arange((n + 1) // 2)
    ang = 2 * np.pi * np.outer(m, j) / n
    cos = SQRT2 * np.cos(ang)
    sin = SQRT2 * np.sin(ang)
    cos[0] = 1.0
    sin[0] = 0.0
    cos.setflags(write=False)
    sin.setflags(write=False)
    return cos, sin


def analyze_direct(values: np.ndarray):
    """Reference O(n^2) transform by direct summation against the basis."""
    values = np.asarray(values, dtype=float)
    n = values.shape[-1]
    cos, sin = _basis_tables(n)
    return values @ cos.T / n, values @ sin.T / n


def synthesize_direct(a, b, n):
    cos, sin = _basis_tables(n)
    return np.asarray(a) @ cos + np.asarray(b) @ sin


def analyze(f: GridFunction, method: str = "fft") -> SpectralCoeffs:
    """Coordinates of ``f`` in the ``(phi_{m,N}, psi_{m,N})`` basis.

    ``method="direct"`` uses the O(n^2) reference summation; the FFT path
    agrees with it to rounding.
    """
    v = _values(f)
    check_odd(v.size)
    if method == "fft":
        a, b = analyze_array(v)
    elif method == "direct":
        a, b = analyze_direct(v)
        b = b.copy()
        b[0] = 0.0
    else:
        raise ValueError(f"unknown transform method {method!r}")
    return SpectralCoeffs(v.size, a, b)


def synthesize(c: SpectralCoeffs, method: str = "fft") -> GridFunction:
    if method == "fft":
        return GridFunction(synthesize_array(c.a, c.b, c.n))
    if method == "direct":
        return GridFunction(synthesize_direct(c.a, c.b, c.n))
    raise ValueError(f"unknown transform method {method!r}")


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------

def sobolev_norm_array(values: np.ndarray, alpha) -> np.ndarray:
    """Discrete ``H_N^alpha`` norm along the trailing axis."""
    values = np.asarray(values, dtype=float)
    a, b = analyze_array(values)
    w = sobolev_weights(values.shape[-1], alpha)
    return np.sqrt(np.sum(w * (a * a + b * b), axis=-1))


def coeff_norm(a, b, alpha, n) -> np.ndarray:
    """``H_N^alpha`` norm computed from coefficients directly."""
    w = sobolev_weights(n, alpha)
    return np.sqrt(np.sum(w * (np.asarray(a) ** 2 + np.asarray(b) ** 2), axis=-1))


def sobolev_norm(f, alpha) -> float:
    """``||f||_{H_N^alpha}^2 = sum_m (1 + lambda_{m,N})^alpha (<f,phi_m>^2 + <f,psi_m>^2)``."""
    return float(sobolev_norm_array(_values(f), alpha))


def l2_norm(f) -> float:
    v = _values(f)
    return float(np.sqrt(np.dot(v, v) / v.size))


# ---------------------------------------------------------------------------
# difference operators and semigroup
# ---------------------------------------------------------------------------

def laplacian_array(values: np.ndarray) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    n = v.shape[-1]
    return n * n * (np.roll(v, -1, axis=-1) - 2.0 * v + np.roll(v, 1, axis=-1))


def discrete_laplacian(f) -> GridFunction:
    """``n^2 (f(x + 1/n) - 2 f(x) + f(x - 1/n))`` with periodic wrap."""
    return GridFunction(laplacian_array(_values(f)))


def gradient_array(values: np.ndarray, direction: str = "+") -> np.ndarray:
    v = np.asarray(values, dtype=float)
    n = v.shape[-1]
    if direction == "+":
        return n * (np.roll(v, -1, axis=-1) - v)
    if direction == "-":
        return n * (np.roll(v, 1, axis=-1) - v)
    raise ValueError("direction must be '+' or '-'")


def discrete_gradient(f, direction: str = "+") -> GridFunction:
    """``n (f(x +/- 1/n) - f(x))``."""
    return GridFunction(gradient_array(_values(f), direction))


def heat_semigroup_array(values: np.ndarray, t) -> np.ndarray:
    if t < 0:
        raise ValueError(f"semigroup time must be nonnegative, got {t}")
    values = np.asarray(values, dtype=float)
    n = values.shape[-1]
    a, b = analyze_array(values)
    decay = np.exp(-eigenvalues(n) * t)
    return synthesize_array(a * decay, b * decay, n)


def heat_semigroup(f, t) -> GridFunction:
    """``T_N(t) f``: multiply mode ``m`` by ``exp(-lambda_{m,N} t)``."""
    return GridFunction(heat_semigroup_array(_values(f), t))


# ---------------------------------------------------------------------------
# convolution, mollifier, projections
# ---------------------------------------------------------------------------

def convolve_array(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = a.shape[-1]
    if b.shape[-1] != n:
        raise ValueError(f"cell count mismatch: {n} != {b.shape[-1]}")
    return np.fft.irfft(np.fft.rfft(a, axis=-1) * np.fft.rfft(b, axis=-1) / n, n=n, axis=-1)


def convolve_direct(a, b) -> np.ndarray:
    """O(n^2) periodic convolution ``(1/n) sum_l a_{k-l} b_l``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = a.size
    if b.size != n:
        raise ValueError(f"cell count mismatch: {n} != {b.size}")
    k = np.arange(n)
    return np.array([np.dot(a[(kk - k) % n], b) for kk in k]) / n


def discrete_convolve(a, b) -> GridFunction:
    """Periodic lattice convolution ``(a *_N b)_k = (1/n) sum_l a_{k-l} b_l``."""
    av, bv = _values(a), _values(b)
    if av.size != bv.size:
        raise ValueError(f"cell count mismatch: {av.size} != {bv.size}")
    return GridFunction(convolve_array(av, bv))


@functools.lru_cache(maxsize=1)
def _bump_mass() -> float:
    val, _ = integrate.quad(lambda z: np.exp(-1.0 / (1.0 - z * z)), -1.0, 1.0,
                            epsabs=1e-14, epsrel=1e-12, limit=200)
    return val


def bump(z) -> np.ndarray:
    """Normalized smooth bump ``C exp(-1/(1 - z^2))`` on ``(-1, 1)``, unit mass."""
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    inside = np.abs(z) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - z[inside] ** 2)) / _bump_mass()
    return out


def _gl_integral(f, lo, hi, pieces=1) -> float:
    x, w = np.polynomial.legendre.leggauss(_GL_POINTS)
    edges = np.linspace(lo, hi, pieces + 1)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        half = 0.5 * (b - a)
        total += half * float(np.dot(w, f(half * x + 0.5 * (a + b))))
    return total


def mollifier(epsilon, n) -> GridFunction:
    """Cell averages of ``rho^eps(y) = eps^{-1} rho(y / eps)`` as a convolution kernel.

    The kernel is indexed by lattice offset: entry ``k`` (taken mod ``n``)
    is ``n`` times the integral of ``rho^eps`` over ``[(k - 1/2)/n, (k + 1/2)/n)``,
    so the kernel is even and ``(1/n) sum_k rho_k = 1``.
    """
    n = check_odd(n)
    epsilon = float(epsilon)
    if not 0.0 < epsilon < 0.5:
        raise ValueError(f"mollifier width must lie in (0, 1/2), got {epsilon}")

    def rho_eps(y):
        return bump(y / epsilon) / epsilon

    values = np.zeros(n)
    half = (n - 1) // 2
    for k in range(-half, half + 1):
        lo = max((k - 0.5) / n, -epsilon)
        hi = min((k + 0.5) / n, epsilon)
        if hi <= lo:
            continue
        # composite pieces no wider than eps/4 keep the essential-singularity
        # flanks of the bump resolved
        pieces = max(1, int(np.ceil((hi - lo) / (epsilon / 4.0))))
        values[k % n] = n * _gl_integral(rho_eps, lo, hi, pieces)
    return GridFunction(values)


def mollify(f, epsilon) -> GridFunction:
    """``rho^{eps,N} *_N f``."""
    v = _values(f)
    return GridFunction(convolve_array(mollifier(epsilon, v.size).values, v))


@functools.lru_cache(maxsize=32)
def _projection_matrices(M: int, n: int):
    m = np.arange((M + 1) // 2)
    mid = (np.arange(n) + 0.5) / n
    ang = 2 * np.pi * np.outer(m, mid)
    sinc = np.sinc(m / n)  # numpy sinc is sin(pi x)/(pi x)
    C = SQRT2 * sinc[:, None] * np.cos(ang)
    S = SQRT2 * sinc[:, None] * np.sin(ang)
    C[0] = 1.0
    S[0] = 0.0
    C.setflags(write=False)
    S.setflags(write=False)
    return C, S


def project_reference_array(a: np.ndarray, b: np.ndarray, n: int) -> np.ndarray:
    """Exact cell averages over ``n`` cells of trigonometric polynomials.

    ``a``/``b`` hold continuum coefficients (``sqrt(2) cos(2 pi m x)`` basis) with
    a trailing mode axis of length ``(M + 1)/2``; leading axes are batched.
    """
    a = np.asarray(a, dtype=float)
    M = 2 * a.shape[-1] - 1
    n = check_odd(n)
    if n > M:
        raise ValueError(f"target resolution {n} exceeds reference resolution {M}")
    C, S = _projection_matrices(M, n)
    return a @ C + np.asarray(b, dtype=float) @ S


def project_reference(c: SpectralCoeffs, n) -> GridFunction:
    """``P_N`` of the trigonometric polynomial with coefficients ``c`` (resolution ``M``).

    The average of ``cos(2 pi m x)`` over ``I_j`` equals
    ``sinc(pi m / n) cos(2 pi m (j + 1/2) / n)``, so the projection is exact.
    """
    return GridFunction(project_reference_array(c.a, c.b, n))


def project_function(f, n) -> GridFunction:
    """``P_N f`` for a smooth periodic callable via 32-point Gauss-Legendre per cell."""
    n = check_odd(n)
    x, w = np.polynomial.legendre.leggauss(_GL_POINTS)
    j = np.arange(n)[:, None]
    pts = (j + 0.5 * (x[None, :] + 1.0)) / n
    return GridFunction(0.5 * (np.asarray(f(pts), dtype=float) @ w))


def trig_eval(c: SpectralCoeffs, x) -> np.ndarray:
    """Evaluate the trigonometric polynomial with coefficients ``c`` at points ``x``."""
    x = np.asarray(x, dtype=float)
    m = c.modes
    ang = 2 * np.pi * np.multiply.outer(x, m[1:])
    return c.a[0] + SQRT2 * (np.cos(ang) @ c.a[1:] + np.sin(ang) @ c.b[1:])


def continuum_norm(c: SpectralCoeffs, alpha) -> float:
    """``H^alpha`` norm of a trigonometric polynomial, weights ``(1 + (2 pi m)^2)^alpha``."""
    w = (1.0 + continuum_eigenvalues(c.n)) ** float(alpha)
    return float(np.sqrt(np.sum(w * c.energy())))


def embedding_constant(n, beta) -> float:
    """``(sum_{|k| <= (n-1)/2} (1 + k^2)^{-beta})^{1/2}``: bounds ``||f||_inf / ||f||_{H_N^beta}``."""
    half = (check_odd(n) - 1) // 2
    k = np.arange(-half, half + 1)
    return float(np.sqrt(np.sum((1.0 + k * k) ** (-float(beta)))))
