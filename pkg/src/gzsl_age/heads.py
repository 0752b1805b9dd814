"""Label encodings, losses and decoders for the nine age-estimation heads.

Everything works on a discrete age grid (0..101 by default) with plain numpy
vectors; there is no network or training loop here. Analytic gradients are
taken with respect to the head's logits, where ``p = softmax(logits)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

PROB_FLOOR = 1e-12
NORM_TOL = 1e-9


@dataclass(frozen=True)
class AgeGrid:
    lo: int = 0
    hi: int = 101

    def __post_init__(self):
        if self.hi <= self.lo:
            raise ValueError(f"empty grid [{self.lo}, {self.hi}]")

    @property
    def ages(self) -> np.ndarray:
        return np.arange(self.lo, self.hi + 1, dtype=float)

    @property
    def K(self) -> int:
        return self.hi - self.lo + 1

    def index(self, age: int) -> int:
        if age != int(age) or not (self.lo <= age <= self.hi):
            raise ValueError(f"age {age} is not on the grid [{self.lo}, {self.hi}]")
        return int(age) - self.lo


DEFAULT_GRID = AgeGrid()


def _check_probs(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if np.any(p < 0) or abs(p.sum() - 1.0) > NORM_TOL:
        raise ValueError("not a probability vector")
    return p


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=float)
    if not np.all(np.isfinite(z)):
        raise ValueError("softmax of non-finite logits")
    e = np.exp(z - z.max())
    return e / e.sum()


def expected_age(p, grid: AgeGrid = DEFAULT_GRID) -> float:
    return float(np.dot(_check_probs(p), grid.ages))


def median_age(p, grid: AgeGrid = DEFAULT_GRID) -> int:
    """Smallest grid age whose cumulative probability reaches 0.5."""
    cdf = np.cumsum(_check_probs(p))
    # slack absorbs rounding in the running sum, e.g. six twelfths
    i = int(np.searchsorted(cdf, 0.5 - 1e-12, side="left"))
    return int(grid.ages[min(i, grid.K - 1)])


def gaussian_label(target: int, sigma: float = 2.0, grid: AgeGrid = DEFAULT_GRID) -> np.ndarray:
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    grid.index(target)
    logq = -((grid.ages - target) ** 2) / (2.0 * sigma**2)
    q = np.exp(logq - logq.max())
    return q / q.sum()


def sord_label(target: int, scale: float = 5.0, grid: AgeGrid = DEFAULT_GRID) -> np.ndarray:
    if scale <= 0:
        raise ValueError(f"scale must be positive, got {scale}")
    grid.index(target)
    return softmax(-((grid.ages - target) ** 2) / scale)


def kl_loss(q, p) -> float:
    q = np.asarray(q, dtype=float)
    p = np.maximum(np.asarray(p, dtype=float), PROB_FLOOR)
    m = q > 0
    return float(np.sum(q[m] * (np.log(q[m]) - np.log(p[m]))))


def dldl_v2_loss(q, p, target: float, lam: float = 1.0, grid: AgeGrid = DEFAULT_GRID) -> float:
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    return kl_loss(q, p) + lam * abs(expected_age(p, grid) - target)


def mean_variance_loss(p, target: float, weights=(0.2, 0.05), grid: AgeGrid = DEFAULT_GRID) -> float:
    w_m, w_v = weights
    if w_m < 0 or w_v < 0:
        raise ValueError("weights must be non-negative")
    p = _check_probs(p)
    mean = float(np.dot(p, grid.ages))
    var = float(np.dot(p, (grid.ages - mean) ** 2))
    return w_m * (mean - target) ** 2 + w_v * var


def squared_error_loss(pred: float, target: float) -> float:
    return (float(pred) - target) ** 2


def rank_encode(target: int, grid: AgeGrid = DEFAULT_GRID) -> np.ndarray:
    """Binary vector of length K-1: entry k is 1 iff target exceeds the k-th grid age."""
    grid.index(target)
    return (target > grid.ages[:-1]).astype(int)


def rank_decode(probs, threshold: float = 0.5, grid: AgeGrid = DEFAULT_GRID) -> int:
    probs = np.asarray(probs, dtype=float)
    if probs.shape != (grid.K - 1,):
        raise ValueError(f"expected {grid.K - 1} rank probabilities, got {probs.shape}")
    return int(grid.ages[int(np.sum(probs > threshold))])


def corn_cumulative(conditionals) -> np.ndarray:
    return np.cumprod(np.asarray(conditionals, dtype=float))


def corn_decode(conditionals, threshold: float = 0.5, grid: AgeGrid = DEFAULT_GRID) -> int:
    c = corn_cumulative(conditionals)
    if c.shape != (grid.K - 1,):
        raise ValueError(f"expected {grid.K - 1} conditionals, got {c.shape}")
    return int(grid.ages[int(np.sum(c > threshold))])


# Gradients with respect to logits.

def kl_loss_grad(q, logits) -> np.ndarray:
    return softmax(logits) - np.asarray(q, dtype=float)


def _mean_grad(p: np.ndarray, ages: np.ndarray) -> tuple[float, np.ndarray]:
    mean = float(np.dot(p, ages))
    return mean, p * (ages - mean)


def dldl_v2_loss_grad(q, logits, target: float, lam: float = 1.0, grid: AgeGrid = DEFAULT_GRID) -> np.ndarray:
    p = softmax(logits)
    mean, dmean = _mean_grad(p, grid.ages)
    return p - np.asarray(q, dtype=float) + lam * np.sign(mean - target) * dmean


def mean_variance_loss_grad(logits, target: float, weights=(0.2, 0.05), grid: AgeGrid = DEFAULT_GRID) -> np.ndarray:
    w_m, w_v = weights
    p = softmax(logits)
    mean, dmean = _mean_grad(p, grid.ages)
    dev2 = (grid.ages - mean) ** 2
    var = float(np.dot(p, dev2))
    return 2.0 * w_m * (mean - target) * dmean + w_v * p * (dev2 - var)


def squared_error_loss_grad(pred: float, target: float) -> float:
    return 2.0 * (float(pred) - target)


def numeric_grad(f: Callable[[np.ndarray], float], x, eps: float = 1e-5) -> np.ndarray:
    x = np.array(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        step = np.zeros_like(x)
        step.flat[i] = eps
        g.flat[i] = (f(x + step) - f(x - step)) / (2 * eps)
    return g


def grad_check(
    loss: Callable[[np.ndarray], float],
    grad: Callable[[np.ndarray], np.ndarray],
    x,
    eps: float = 1e-5,
) -> float:
    """Max deviation between analytic and central-difference gradients.

    Deviations are relative to the larger of the two gradients' max-norms;
    identical zero gradients give 0.
    """
    if not (1e-8 < eps < 1e-2):
        raise ValueError(f"eps must lie in (1e-8, 1e-2), got {eps}")
    analytic = np.atleast_1d(np.asarray(grad(np.asarray(x, dtype=float)), dtype=float))
    numeric = np.atleast_1d(numeric_grad(loss, x, eps))
    if not (np.all(np.isfinite(analytic)) and np.all(np.isfinite(numeric))):
        raise ValueError("non-finite gradient")
    scale = max(np.abs(analytic).max(), np.abs(numeric).max())
    if scale == 0:
        return 0.0
    return float(np.abs(analytic - numeric).max() / scale)


# Prediction rule per evaluated method. Distribution heads use the median,
# DEX the expectation, rank heads count thresholds passed.
METHOD_DECODER = {
    "Regression": "identity",
    "DEX": "expected",
    "DLDL": "median",
    "DLDL-v2": "median",
    "SORD": "median",
    "Mean-Var.": "median",
    "OR-CNN": "rank",
    "CORAL": "rank",
    "CORN": "corn",
}


def predict_age(method: str, output, grid: AgeGrid = DEFAULT_GRID) -> float:
    """Turn a head's raw output into an age using the method's decoding rule.

    Distribution heads take logits; rank heads take per-threshold
    probabilities (CORN: conditional probabilities); Regression takes a scalar.
    """
    rule = METHOD_DECODER[method]
    if rule == "identity":
        return float(np.clip(float(np.asarray(output).ravel()[0]), grid.lo, grid.hi))
    if rule == "expected":
        return expected_age(softmax(output), grid)
    if rule == "median":
        return float(median_age(softmax(output), grid))
    if rule == "rank":
        return float(rank_decode(output, grid=grid))
    return float(corn_decode(output, grid=grid))


def self_test(points: int = 100, seed: int = 0, grid: AgeGrid = DEFAULT_GRID) -> list[tuple[str, bool, str]]:
    """Run the kernel invariants and gradient checks; returns (name, passed, detail) rows."""
    rng = np.random.default_rng(seed)
    ages = [int(a) for a in grid.ages]
    rows: list[tuple[str, bool, str]] = []

    def row(name, ok, detail=""):
        rows.append((name, bool(ok), detail))

    eye = np.eye(grid.K)
    row("rank round trip", all(rank_decode(rank_encode(a, grid), grid=grid) == a for a in ages),
        f"{grid.K} targets")
    row("one-hot median == expectation",
        all(median_age(eye[i], grid) == expected_age(eye[i], grid) == a for i, a in enumerate(ages)))
    rand = rng.random((points, grid.K - 1))
    decoded = [rank_decode(r, grid=grid) for r in rand] + [corn_decode(r, grid=grid) for r in rand]
    decoded += [median_age(softmax(z), grid) for z in rng.normal(size=(points, grid.K))]
    row("decode range", all(grid.lo <= d <= grid.hi for d in decoded), f"{len(decoded)} decodes")
    row("corn cumulative monotone", all(np.all(np.diff(corn_cumulative(r)) <= 0) for r in rand))

    norm_err = max(
        max(abs(gaussian_label(a, 2.0, grid).sum() - 1), abs(sord_label(a, 5.0, grid).sum() - 1)) for a in ages
    )
    row("soft labels normalized", norm_err <= NORM_TOL, f"max |sum-1| = {norm_err:.1e}")
    kl_self = max(kl_loss(gaussian_label(a, 2.0, grid), gaussian_label(a, 2.0, grid)) for a in ages)
    row("kl(p, p) == 0", abs(kl_self) <= 1e-9, f"max {kl_self:.1e}")

    checks = {
        "kl": lambda z, q, t: (lambda x: kl_loss(q, softmax(x)), lambda x: kl_loss_grad(q, x)),
        "dldl_v2": lambda z, q, t: (
            lambda x: dldl_v2_loss(q, softmax(x), t, 1.0, grid),
            lambda x: dldl_v2_loss_grad(q, x, t, 1.0, grid),
        ),
        "mean_variance": lambda z, q, t: (
            lambda x: mean_variance_loss(softmax(x), t, grid=grid),
            lambda x: mean_variance_loss_grad(x, t, grid=grid),
        ),
        "squared_error": lambda z, q, t: (
            lambda x: squared_error_loss(x[0], t),
            lambda x: np.array([squared_error_loss_grad(x[0], t)]),
        ),
    }
    for name, make in checks.items():
        worst = 0.0
        for _ in range(points):
            t = int(rng.integers(grid.lo, grid.hi + 1))
            q = gaussian_label(t, 2.0, grid)
            z = rng.normal(size=grid.K) if name != "squared_error" else rng.uniform(grid.lo, grid.hi, size=1)
            f, g = make(z, q, t)
            worst = max(worst, grad_check(f, g, z, 1e-5))
        row(f"grad check {name}", worst < 1e-4, f"max rel dev {worst:.1e}")
    return rows


KERNELS: dict[str, Callable] = {
    "softmax": softmax,
    "expected_age": expected_age,
    "median_age": median_age,
    "gaussian_label": gaussian_label,
    "sord_label": sord_label,
    "kl_loss": kl_loss,
    "dldl_v2_loss": dldl_v2_loss,
    "mean_variance_loss": mean_variance_loss,
    "rank_encode": rank_encode,
    "rank_decode": rank_decode,
    "corn_decode": corn_decode,
    "predict_age": predict_age,
}


def run_kernel(name: str, args: dict):
    """Call a kernel by name with JSON-style keyword arguments; arrays come back as lists."""
    if name not in KERNELS:
        raise KeyError(f"unknown kernel {name!r}; choose from {sorted(KERNELS)}")
    args = dict(args)
    if "grid" in args:
        args["grid"] = AgeGrid(*args["grid"])
    out = KERNELS[name](**args)
    return out.tolist() if isinstance(out, np.ndarray) else out
