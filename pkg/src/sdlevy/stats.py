"""Distributional verification toolkit: two-sample KS, empirical
characteristic function distance, transform-correlation independence
diagnostics, and the StatReport container that turns them into verdicts.

Acceptance suites run dozens of KS tests, so the working significance is
0.001 (not 0.05); per-test power is recovered by sample size.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

# c(sig) from the asymptotic Kolmogorov distribution: c = sqrt(-ln(sig/2)/2).
KS_COEFF = {
    0.01: math.sqrt(-0.5 * math.log(0.005)),
    0.001: math.sqrt(-0.5 * math.log(0.0005)),
}


def ks_two_sample(a, b, significance: float = 0.001) -> tuple[float, float, bool]:
    """Two-sample Kolmogorov-Smirnov statistic, threshold, and verdict.

    D = sup |F_a - F_b|; threshold = c(sig) * sqrt((n+m)/(n*m)). Asymptotic
    thresholds only, hence the n, m >= 100 precondition.
    """
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    n, m = a.size, b.size
    if min(n, m) < 100:
        raise ValueError(f"need at least 100 samples per side, got {n}, {m}")
    if significance not in KS_COEFF:
        raise ValueError(f"significance must be one of {sorted(KS_COEFF)}")
    sa = np.sort(a)
    sb = np.sort(b)
    grid = np.concatenate([sa, sb])
    cdf_a = np.searchsorted(sa, grid, side="right") / n
    cdf_b = np.searchsorted(sb, grid, side="right") / m
    d = float(np.max(np.abs(cdf_a - cdf_b)))
    threshold = KS_COEFF[significance] * math.sqrt((n + m) / (n * m))
    return d, threshold, d < threshold


def empirical_cf(samples, grid, chunk: int = 100_000) -> np.ndarray:
    """Mean of exp(i*u*x) over the sample, evaluated on the grid."""
    samples = np.asarray(samples, float)
    grid = np.asarray(grid, float)
    acc = np.zeros(grid.size, complex)
    for start in range(0, samples.size, chunk):
        block = samples[start:start + chunk]
        acc += np.exp(1j * grid[:, None] * block[None, :]).sum(axis=1)
    return acc / samples.size


def ecf_distance(samples, cf, grid) -> float:
    """Max over the grid of |empirical CF - analytic CF|.

    ``cf`` is a callable taking an array of frequencies. Passing suites keep
    this below 5/sqrt(n) on |u| <= 5.
    """
    grid = np.asarray(grid, float)
    if grid.size == 0 or not np.all(np.isfinite(grid)):
        raise ValueError("grid must be nonempty and finite")
    emp = empirical_cf(samples, grid)
    return float(np.max(np.abs(emp - np.asarray(cf(grid), complex))))


def gamma_cf(shape: float, rate: float):
    """Characteristic function u -> (1 - i*u/rate)^(-shape)."""
    return lambda u: (1.0 - 1j * np.asarray(u, float) / rate) ** (-shape)


def normal_cf(mean: float, var: float):
    return lambda u: np.exp(1j * np.asarray(u, float) * mean - 0.5 * var * np.asarray(u, float) ** 2)


def point_mass_cf(x0: float):
    return lambda u: np.exp(1j * np.asarray(u, float) * x0)


def _corr(x: np.ndarray, y: np.ndarray) -> float:
    sx, sy = x.std(), y.std()
    if sx == 0.0 or sy == 0.0:
        return 0.0
    return float(np.mean((x - x.mean()) * (y - y.mean())) / (sx * sy))


def independence_diagnostic(x, y) -> float:
    """Max |corr| over {clipped identity, above-median indicator} transform
    pairs of the two coordinates. Pass band for independent pairs: 3/sqrt(n)."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if x.size != y.size:
        raise ValueError("paired samples must have equal length")
    if x.size < 1000:
        raise ValueError("need at least 1000 paired samples")

    def transforms(v):
        return (np.clip(v, -10.0, 10.0), (v > np.median(v)).astype(float))

    return max(abs(_corr(tx, ty)) for tx in transforms(x) for ty in transforms(y))


def independence_pass_band(n: int) -> float:
    return 3.0 / math.sqrt(n)


def moment_summary(samples) -> dict:
    s = np.asarray(samples, float)
    n = s.size
    mean = float(s.mean())
    var = float(s.var())
    m4 = float(np.mean((s - mean) ** 4))
    return {
        "n": n,
        "mean": mean,
        "se_mean": math.sqrt(var / n),
        "var": var,
        "se_var": math.sqrt(max(m4 - var * var, 0.0) / n),
    }


@dataclass
class StatReport:
    """Result of a distributional comparison; verdict passes iff the KS
    statistic clears its threshold and every enabled auxiliary check holds."""

    name: str
    n: int
    m: int
    ks_stat: float
    ks_threshold: float
    significance: float
    moments: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    verdict: bool = False
    seed: int | None = None
    config_fingerprint: str | None = None

    def to_json_dict(self) -> dict:
        return {
            "name": self.name,
            "n": self.n,
            "m": self.m,
            "ks_stat": self.ks_stat,
            "ks_threshold": self.ks_threshold,
            "significance": self.significance,
            "moments": self.moments,
            "diagnostics": self.diagnostics,
            "verdict": self.verdict,
            "seed": self.seed,
            "config_fingerprint": self.config_fingerprint,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2)

    def to_csv_line(self) -> str:
        return ",".join([
            self.name, str(self.n), str(self.m),
            format(self.ks_stat, ".17g"), format(self.ks_threshold, ".17g"),
            format(self.significance, ".17g"), "pass" if self.verdict else "fail",
        ])


def compare_samples(name: str, a, b, significance: float = 0.001,
                    check_moments: bool = True, extra_checks: dict | None = None,
                    seed: int | None = None,
                    config_fingerprint: str | None = None) -> StatReport:
    """KS plus moment-band comparison of two samples, folded into a verdict."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    d, threshold, ks_pass = ks_two_sample(a, b, significance)
    ma, mb = moment_summary(a), moment_summary(b)
    diagnostics: dict = {"ks_pass": ks_pass}
    verdict = ks_pass
    if check_moments:
        mean_ok = abs(ma["mean"] - mb["mean"]) <= 3.0 * math.hypot(ma["se_mean"], mb["se_mean"])
        var_ok = abs(ma["var"] - mb["var"]) <= 3.0 * math.hypot(ma["se_var"], mb["se_var"])
        diagnostics["mean_within_3se"] = mean_ok
        diagnostics["var_within_3se"] = var_ok
        verdict = verdict and mean_ok and var_ok
    if extra_checks:
        diagnostics.update(extra_checks)
        verdict = verdict and all(bool(v) for v in extra_checks.values())
    return StatReport(
        name=name, n=a.size, m=b.size, ks_stat=d, ks_threshold=threshold,
        significance=significance, moments={"a": ma, "b": mb},
        diagnostics=diagnostics, verdict=verdict, seed=seed,
        config_fingerprint=config_fingerprint,
    )
