"""Two-scale on-site reaction networks.

A network holds reactions on the abundant species ``C`` (concentration
``u``) and the rare species ``D`` (integer count ``v``).  Rates follow the
case table

    ==========  =========  ===========================
    species     jump       rate lambda_r(u, v)
    ==========  =========  ===========================
    C           gamma > 0  a u v + b(u) + d v
    C           gamma = -1 a u v + b(u)
    D           gamma > 0  d v + b(u)
    D           gamma = -1 d v
    ==========  =========  ===========================

with ``a, d >= 0`` and ``b`` nonnegative and C^1 (``b(0) = 0`` for
degradation).  The drift aggregates are

    R_C = sum_{r in C} gamma_r lambda_r = a_C u v + b_C(u) + d_C v
    R_D = sum_{r in D} gamma_r lambda_r = b_D(u) + d_D v
    R~_C = sum_{r in C} gamma_r^2 lambda_r
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

SPECIES = ("C", "D")
DRIFTS = ("R_C", "R_D", "R_C_tilde")
_SAMPLES = 10_000


@dataclass(frozen=True)
class SmoothCoefficient:
    """``b(u)``: a polynomial ``sum c_k u^k`` or a Hill term ``v_max u^h / (K^h + u^h)``."""

    kind: str = "polynomial"
    coeffs: tuple = (0.0,)
    v_max: float = 0.0
    K: float = 1.0
    h: float = 1.0

    def __post_init__(self):
        if self.kind not in ("polynomial", "hill"):
            raise ValueError(f"unknown coefficient kind {self.kind!r}")
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs) or (0.0,))

    @classmethod
    def polynomial(cls, *coeffs):
        return cls("polynomial", tuple(coeffs))

    @classmethod
    def hill(cls, v_max, K, h):
        return cls("hill", (0.0,), float(v_max), float(K), float(h))

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "polynomial":
            out = np.zeros_like(u)
            for c in reversed(self.coeffs):
                out = out * u + c
            return out
        uh = np.power(np.maximum(u, 0.0), self.h)
        return self.v_max * uh / (self.K**self.h + uh)

    def is_zero(self) -> bool:
        if self.kind == "polynomial":
            return all(c == 0.0 for c in self.coeffs)
        return self.v_max == 0.0

    def to_dict(self) -> dict:
        if self.kind == "polynomial":
            return {"kind": "polynomial", "coeffs": list(self.coeffs)}
        return {"kind": "hill", "v_max": self.v_max, "K": self.K, "h": self.h}

    @classmethod
    def from_dict(cls, d) -> "SmoothCoefficient":
        if d is None:
            return cls()
        kind = d.get("kind", "polynomial")
        if kind == "polynomial":
            return cls.polynomial(*d.get("coeffs", [0.0]))
        if kind == "hill":
            return cls.hill(d["v_max"], d["K"], d["h"])
        raise ValueError(f"unknown coefficient kind {kind!r}")


ZERO = SmoothCoefficient()


@dataclass(frozen=True)
class Reaction:
    species: str
    gamma: int
    a: float = 0.0
    d: float = 0.0
    b: SmoothCoefficient = ZERO

    def rate(self, u, v):
        """Case-table rate; fields the table excludes are ignored."""
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        if self.species == "C":
            out = self.a * u * v + self.b(u)
            if self.gamma > 0:
                out = out + self.d * v
            return out
        if self.gamma > 0:
            return self.d * v + self.b(u)
        return self.d * v

    def to_dict(self) -> dict:
        return {"species": self.species, "gamma": int(self.gamma), "a": self.a,
                "d": self.d, "b": self.b.to_dict()}

    @classmethod
    def from_dict(cls, d) -> "Reaction":
        return cls(species=str(d["species"]), gamma=int(d["gamma"]),
                   a=float(d.get("a", 0.0)), d=float(d.get("d", 0.0)),
                   b=SmoothCoefficient.from_dict(d.get("b")))


@dataclass(frozen=True)
class BilinearDrift:
    """``a u v + b(u) + d v``."""

    a: float
    d: float
    b_terms: tuple  # ((weight, SmoothCoefficient), ...)

    def b(self, u):
        u = np.asarray(u, dtype=float)
        out = np.zeros_like(u)
        for w, coef in self.b_terms:
            out = out + w * coef(u)
        return out

    def __call__(self, u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        return self.a * u * v + self.b(u) + self.d * v


@dataclass(frozen=True)
class LinearDrift:
    """``b(u) + d v``: the discrete-scale drift carries no ``u v`` term."""

    d: float
    b_terms: tuple

    def b(self, u):
        u = np.asarray(u, dtype=float)
        out = np.zeros_like(u)
        for w, coef in self.b_terms:
            out = out + w * coef(u)
        return out

    def __call__(self, u, v):
        return self.b(u) + self.d * np.asarray(v, dtype=float)


@dataclass(frozen=True)
class ReactionNetwork:
    reactions: tuple
    M: float
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "reactions", tuple(self.reactions))

    @property
    def gamma_max(self) -> int:
        return max((abs(r.gamma) for r in self.reactions), default=0)

    def subset(self, species):
        return [r for r in self.reactions if r.species == species]

    @property
    def R_C(self) -> BilinearDrift:
        return _bilinear(self.subset("C"), power=1)

    @property
    def R_C_tilde(self) -> BilinearDrift:
        return _bilinear(self.subset("C"), power=2)

    @property
    def R_D(self) -> LinearDrift:
        rs = self.subset("D")
        d = sum(r.gamma * r.d for r in rs)
        b_terms = tuple((float(r.gamma), r.b) for r in rs if r.gamma > 0 and not r.b.is_zero())
        return LinearDrift(float(d), b_terms)

    # -- serialization -------------------------------------------------
    def to_dict(self) -> dict:
        return {"name": self.name, "M": self.M,
                "reactions": [r.to_dict() for r in self.reactions]}

    @classmethod
    def from_dict(cls, d) -> "ReactionNetwork":
        return cls(tuple(Reaction.from_dict(r) for r in d["reactions"]),
                   float(d["M"]), str(d.get("name", "")))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ReactionNetwork":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> "ReactionNetwork":
        with open(path) as fh:
            return cls.from_json(fh.read())

    def digest(self) -> bytes:
        """SHA-256 of the canonical JSON form (name excluded)."""
        d = self.to_dict()
        d.pop("name")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).digest()


def _bilinear(rs, power) -> BilinearDrift:
    a = 0.0
    d = 0.0
    b_terms = []
    for r in rs:
        w = float(r.gamma) ** power
        a += w * r.a
        if r.gamma > 0:
            d += w * r.d
        if not r.b.is_zero():
            b_terms.append((w, r.b))
    return BilinearDrift(float(a), float(d), tuple(b_terms))


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

@dataclass
class Violation:
    rule: str
    message: str
    reaction: int | None = None
    u: float | None = None

    def __str__(self):
        where = "" if self.reaction is None else f" [reaction {self.reaction}]"
        at = "" if self.u is None else f" at u={self.u:.6g}"
        return f"{self.rule}{where}: {self.message}{at}"


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def rate_law_ok(self) -> bool:
        """True when every violation concerns confinement only."""
        return all(v.rule == "confinement" for v in self.violations)

    def __str__(self):
        if self.ok:
            return "valid"
        return "\n".join(str(v) for v in self.violations)


def validate(network: ReactionNetwork) -> ValidationReport:
    """Check rate structure and confinement; never raises on a bad network."""
    report = ValidationReport()
    add = report.violations.append
    M = float(network.M)
    if not np.isfinite(M) or M <= 0:
        add(Violation("threshold", f"M must be positive, got {M}"))
        return report
    u_cap = M + 2.0
    grid = np.linspace(0.0, u_cap, _SAMPLES)

    for i, r in enumerate(network.reactions):
        if r.species not in SPECIES:
            add(Violation("species", f"unknown species {r.species!r}", i))
            continue
        if int(r.gamma) != r.gamma or not (r.gamma == -1 or r.gamma >= 1):
            add(Violation("jump", f"gamma must be -1 or a positive integer, got {r.gamma}", i))
        if r.a < 0 or r.d < 0:
            add(Violation("sign", "coefficients a and d must be nonnegative", i))
        b = r.b
        if b.kind == "hill" and (b.K <= 0 or b.h < 1 or b.v_max < 0):
            add(Violation("coefficient", "Hill term needs K > 0, h >= 1, v_max >= 0", i))
        if r.species == "C" and r.gamma == -1 and r.d != 0:
            add(Violation("case-table", "C degradation admits no d v term", i))
        if r.species == "D" and r.a != 0:
            add(Violation("case-table", "D reactions admit no u v term", i))
        if r.species == "D" and r.gamma == -1 and not b.is_zero():
            add(Violation("case-table", "D degradation admits no b(u) term", i))
        if r.gamma == -1 and abs(float(b(0.0))) > 0:
            add(Violation("absorption", f"b(0) must vanish for degradation, got {float(b(0.0)):.6g}", i, 0.0))
        vals = b(grid)
        bad = np.flatnonzero(vals < 0)
        if bad.size:
            add(Violation("nonnegativity", "b(u) negative", i, float(grid[bad[0]])))

    # confinement via the sufficient scalar conditions on (M, M+2]
    rc = network.R_C
    u = np.linspace(M, u_cap, _SAMPLES + 1)[1:]
    slope = rc.a * u + rc.d
    bad = np.flatnonzero(slope > 0)
    if bad.size:
        add(Violation("confinement", "a_C u + d_C > 0 beyond M", None, float(u[bad[0]])))
    bc = rc.b(u)
    bad = np.flatnonzero(bc >= 0)
    if bad.size:
        add(Violation("confinement", "b_C(u) >= 0 beyond M", None, float(u[bad[0]])))
    return report


def eval_rate(reaction: Reaction, u, v):
    """Rate of ``reaction`` at ``(u, v)``; inputs must be nonnegative."""
    if np.any(np.asarray(u) < 0) or np.any(np.asarray(v) < 0):
        raise ValueError("rates are only defined for nonnegative states")
    out = reaction.rate(u, v)
    return float(out) if np.ndim(out) == 0 else out


def drift(network: ReactionNetwork, which: str, u, v):
    """``R_C``, ``R_D`` or ``R~_C`` by per-reaction summation."""
    if which == "R_C":
        species, power = "C", 1
    elif which == "R_D":
        species, power = "D", 1
    elif which == "R_C_tilde":
        species, power = "C", 2
    else:
        raise ValueError(f"unknown drift {which!r}; expected one of {DRIFTS}")
    if np.any(np.asarray(u) < 0) or np.any(np.asarray(v) < 0):
        raise ValueError("drifts are only evaluated at nonnegative states")
    total = np.zeros(np.broadcast(np.asarray(u), np.asarray(v)).shape)
    for r in network.subset(species):
        total = total + float(r.gamma) ** power * r.rate(u, v)
    return float(total) if total.ndim == 0 else total


# ---------------------------------------------------------------------------
# builtins
# ---------------------------------------------------------------------------

def birth_death_c(k0=0.5, k1=1.0, margin=0.5) -> ReactionNetwork:
    """Continuous-scale immigration/death: ``R_C = k0 - k1 u``."""
    return ReactionNetwork(
        (Reaction("C", 1, b=SmoothCoefficient.polynomial(k0)),
         Reaction("C", -1, b=SmoothCoefficient.polynomial(0.0, k1))),
        M=k0 / k1 + margin, name="birth-death-C")


def coupled_gene() -> ReactionNetwork:
    """Gene product ``C`` whose production is boosted by the rare activator ``D``.

    ``R_C = (1 + v)(1 - u)`` and ``R_D = 2 u^2 / (1/4 + u^2) - v``.
    """
    return ReactionNetwork(
        (Reaction("C", 1, d=1.0, b=SmoothCoefficient.polynomial(1.0)),
         Reaction("C", -1, a=1.0, b=SmoothCoefficient.polynomial(0.0, 1.0)),
         Reaction("D", 1, b=SmoothCoefficient.hill(2.0, 0.5, 2.0)),
         Reaction("D", -1, d=1.0)),
        M=2.0, name="coupled-gene")


def birth_death_d(c=2.0, d=1.0) -> ReactionNetwork:
    """Discrete-scale immigration/death; the C decay only supplies confinement."""
    return ReactionNetwork(
        (Reaction("D", 1, b=SmoothCoefficient.polynomial(c)),
         Reaction("D", -1, d=d),
         Reaction("C", -1, b=SmoothCoefficient.polynomial(0.0, 1.0))),
        M=4.0, name="birth-death-D")


def pure_diffusion(M=10.0) -> ReactionNetwork:
    """No reactions: only the random walk of C particles.  Not confined."""
    return ReactionNetwork((), M=M, name="pure-diffusion")


def c_birth(c=2.0, M=10.0) -> ReactionNetwork:
    """Constant-rate C immigration.  Not confined."""
    return ReactionNetwork((Reaction("C", 1, b=SmoothCoefficient.polynomial(c)),),
                           M=M, name="c-birth")


def d_birth(c=2.0, M=10.0) -> ReactionNetwork:
    """Constant-rate D immigration; counts per cell are Poisson(c t)."""
    return ReactionNetwork((Reaction("D", 1, b=SmoothCoefficient.polynomial(c)),),
                           M=M, name="d-birth")


def builtin_networks() -> dict:
    nets = [birth_death_c(), coupled_gene(), birth_death_d(), pure_diffusion(), c_birth(),
            d_birth()]
    return {net.name: net for net in nets}


def load_network(spec) -> ReactionNetwork:
    """Resolve a builtin name or a JSON file path."""
    if isinstance(spec, ReactionNetwork):
        return spec
    builtins = builtin_networks()
    if spec in builtins:
        return builtins[spec]
    return ReactionNetwork.load(spec)


# ---------------------------------------------------------------------------
# flat arrays for the compiled kernels
# ---------------------------------------------------------------------------

def compile_network(network: ReactionNetwork) -> dict:
    """Pack reactions into arrays: species (0 = C, 1 = D), jumps, coefficients."""
    rs = network.reactions
    R = len(rs)
    P = max([len(r.b.coeffs) for r in rs] + [1])
    species = np.array([0 if r.species == "C" else 1 for r in rs], dtype=np.int64)
    gamma = np.array([r.gamma for r in rs], dtype=np.int64)
    a = np.array([r.a for r in rs], dtype=float)
    d = np.array([r.d for r in rs], dtype=float)
    bkind = np.array([0 if r.b.kind == "polynomial" else 1 for r in rs], dtype=np.int64)
    bpoly = np.zeros((R, P))
    bhill = np.zeros((R, 3))
    for i, r in enumerate(rs):
        if r.b.kind == "polynomial":
            bpoly[i, :len(r.b.coeffs)] = r.b.coeffs
        else:
            bhill[i] = (r.b.v_max, r.b.K, r.b.h)
    # case-table masks: which terms enter the rate
    use_a = np.array([1.0 if r.species == "C" else 0.0 for r in rs])
    use_d = np.array([0.0 if (r.species == "C" and r.gamma < 0) else 1.0 for r in rs])
    use_b = np.array([0.0 if (r.species == "D" and r.gamma < 0) else 1.0 for r in rs])
    return dict(species=species, gamma=gamma, a=a * use_a, d=d * use_d, bkind=bkind,
                bpoly=bpoly * use_b[:, None], bhill=bhill * use_b[:, None])
