"""Small statistics helpers: seeded bootstrap intervals and log-log slope fits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats as _st

BOOTSTRAP_RESAMPLES = 1000


def bootstrap_ci(x, stat=np.mean, level=0.95, resamples=BOOTSTRAP_RESAMPLES, seed=0):
    """Percentile bootstrap interval of ``stat`` over the first axis of ``x``."""
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise ValueError("cannot bootstrap an empty sample")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, len(x), size=(resamples, len(x)))
    reps = np.array([stat(x[i]) for i in idx])
    tail = (1.0 - level) / 2.0
    lo, hi = np.quantile(reps, [tail, 1.0 - tail])
    return float(lo), float(hi)


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    r2: float
    lo: float
    hi: float

    def to_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept, "r2": self.r2,
                "lo": self.lo, "hi": self.hi}


def fit_slope(x, y, level=0.95) -> SlopeFit:
    """Least-squares line through ``(log x, log y)`` with a t-interval on the slope."""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    if len(lx) < 3:
        raise ValueError("a slope fit needs at least three points")
    res = _st.linregress(lx, ly)
    q = _st.t.ppf(0.5 + level / 2.0, len(lx) - 2)
    return SlopeFit(float(res.slope), float(res.intercept), float(res.rvalue**2),
                    float(res.slope - q * res.stderr), float(res.slope + q * res.stderr))


def bootstrap_slope(x, samples, stat=np.mean, level=0.95,
                    resamples=BOOTSTRAP_RESAMPLES, seed=0) -> SlopeFit:
    """Log-log slope of ``stat(samples[i])`` against ``x[i]``, with the interval
    taken from resampling replicas within each x independently."""
    x = np.asarray(x, dtype=float)
    samples = [np.asarray(s, dtype=float) for s in samples]
    centre = fit_slope(x, [stat(s) for s in samples])
    rng = np.random.default_rng(seed)
    slopes = np.empty(resamples)
    lx = np.log(x)
    for k in range(resamples):
        ys = [stat(s[rng.integers(0, len(s), len(s))]) for s in samples]
        slopes[k] = np.polyfit(lx, np.log(ys), 1)[0]
    tail = (1.0 - level) / 2.0
    lo, hi = np.quantile(slopes, [tail, 1.0 - tail])
    return SlopeFit(centre.slope, centre.intercept, centre.r2, float(lo), float(hi))
