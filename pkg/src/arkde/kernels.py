"""Compact-support product kernels with exact normalization metadata.

Each kernel is a product of one-dimensional polynomial bumps
``k1(t) = c * (1 - t^2)^p`` on ``[-1, 1]``, normalized so that ``k1``
integrates to one.  These are nonnegative, Lipschitz, bounded, and compactly
supported, and their squared L2 norms and Lipschitz constants have closed
forms, frozen at construction and audited by quadrature in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, ParameterError

# family -> (coefficient c, power p, 1-d integral of k1^2, 1-d Lipschitz const, 1-d sup)
_FAMILIES = {
    "epanechnikov": (0.75, 1, 3.0 / 5.0, 1.5, 0.75),
    "quartic": (15.0 / 16.0, 2, 5.0 / 7.0, 5.0 * math.sqrt(3.0) / 6.0, 15.0 / 16.0),
    "triweight": (35.0 / 32.0, 3, 350.0 / 429.0, 21.0 * math.sqrt(5.0) / 25.0, 35.0 / 32.0),
}

#: Integer codes used by the compiled fast paths.
KERNEL_IDS = {"epanechnikov": 0, "triweight": 1, "quartic": 2}


def _canonical_family(name):
    name = name.lower().strip()
    if name.endswith("_product"):
        name = name[: -len("_product")]
    if name not in _FAMILIES:
        raise ParameterError(
            f"unknown kernel family {name!r}; choose one of {sorted(_FAMILIES)}"
        )
    return name


@dataclass(frozen=True)
class KernelSpec:
    """A compact-support product kernel on R^d.

    Immutable after construction; safe to share across threads.
    """

    family: str
    dimension: int
    support_radius: float  # per coordinate, in the scaled argument
    l2_norm_sq: float  # integral of K^2 over R^d
    lipschitz_const: float  # Euclidean-norm Lipschitz constant
    sup_value: float

    @property
    def kernel_id(self):
        return KERNEL_IDS[self.family]

    def eval1(self, t):
        """One-dimensional base kernel, vectorized over ``t``."""
        c, p, _, _, _ = _FAMILIES[self.family]
        t = np.asarray(t, dtype=float)
        u = 1.0 - t * t
        out = np.where(u > 0.0, c * np.maximum(u, 0.0) ** p, 0.0)
        return out if out.ndim else float(out)

    def eval(self, u):
        """Product kernel value at a point ``u`` in R^d (or batch of shape (m, d))."""
        u = np.asarray(u, dtype=float)
        if u.ndim == 0:
            u = u[None]
        if u.ndim == 1:
            if u.shape[0] != self.dimension:
                raise DimensionMismatchError(
                    f"point of dimension {u.shape[0]} passed to kernel of "
                    f"dimension {self.dimension}"
                )
            return float(np.prod(self.eval1(u)))
        if u.ndim == 2:
            if u.shape[1] != self.dimension:
                raise DimensionMismatchError(
                    f"points of dimension {u.shape[1]} passed to kernel of "
                    f"dimension {self.dimension}"
                )
            return np.prod(self.eval1(u), axis=1)
        raise DimensionMismatchError("kernel argument must be a point or a batch of points")


def make_kernel(family, dimension=1):
    """Build a :class:`KernelSpec` with its frozen closed-form constants.

    The L2 norm of a product kernel is the d-th power of the 1-d value; the
    Lipschitz constant uses the gradient bound
    ``sqrt(d) * L1 * sup1^(d-1)`` of the product.
    """
    if dimension < 1:
        raise ParameterError("dimension must be a positive integer")
    family = _canonical_family(family)
    _, _, l2_1d, lip_1d, sup_1d = _FAMILIES[family]
    return KernelSpec(
        family=family,
        dimension=int(dimension),
        support_radius=1.0,
        l2_norm_sq=l2_1d**dimension,
        lipschitz_const=math.sqrt(dimension) * lip_1d * sup_1d ** (dimension - 1),
        sup_value=sup_1d**dimension,
    )


def eval_kernel(kernel, u):
    """Evaluate the product kernel at a point; zero outside the compact support."""
    return kernel.eval(u)


def l2_norm_sq(kernel):
    """Integral of K^2 over R^d (drives the limiting variance of the density estimator)."""
    return kernel.l2_norm_sq


@dataclass
class KernelAuditReport:
    """Numeric audit of the kernel contract (nonnegative, normalized, Lipschitz, compact)."""

    family: str
    dimension: int
    samples: int
    max_negativity: float
    integral_estimate: float
    lipschitz_ratio_max: float  # max |dK| / (L * |du|) over sampled pairs
    sup_violation: float  # max(eval - sup_value, 0)
    support_leak_count: int
    passed: bool


def quadrature_integral(kernel, step=1e-3, squared=False):
    """Trapezoid quadrature of K (or K^2) over the support box; d <= 2 only."""
    d = kernel.dimension
    if d > 2:
        raise ParameterError("grid quadrature supported for d <= 2 only")
    t = np.arange(-1.0, 1.0 + step / 2, step)
    v1 = kernel.eval1(t)
    if squared:
        if d == 1:
            return float(np.trapezoid(v1 * v1, t))
        vals = np.outer(v1, v1) ** 2
    else:
        if d == 1:
            return float(np.trapezoid(v1, t))
        vals = np.outer(v1, v1)
    return float(np.trapezoid(np.trapezoid(vals, t, axis=1), t))


def validate_A5(kernel, sample_count, seed, eval_fn=None):
    """Audit the kernel contract on random samples; failures are flagged, not raised.

    Args:
        kernel: the spec to audit.
        sample_count: number of random probe points (>= 1000).
        seed: RNG seed for the probes.
        eval_fn: optional override of the kernel evaluation, so corrupted
            fixtures can be audited in tests.
    """
    from .rng import make_generator

    if sample_count < 1000:
        raise ParameterError("sample_count must be at least 1000")
    d = kernel.dimension
    rng = make_generator(seed)
    ev = eval_fn if eval_fn is not None else kernel.eval

    pts = rng.uniform(-1.5, 1.5, size=(sample_count, d))
    vals = np.array([ev(p) for p in pts])

    max_neg = float(max(0.0, -vals.min()))
    outside = np.abs(pts).max(axis=1) > kernel.support_radius
    leaks = int(np.count_nonzero(vals[outside] != 0.0))
    sup_violation = float(max(0.0, vals.max() - kernel.sup_value))

    # Lipschitz ratio on jittered pairs around each probe.
    dirs = rng.standard_normal(size=(sample_count, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    h = 1e-4
    vals2 = np.array([ev(p) for p in pts + h * dirs])
    ratios = np.abs(vals2 - vals) / (h * kernel.lipschitz_const)
    lip_max = float(ratios.max())

    integral = quadrature_integral(kernel) if d <= 2 else float("nan")
    passed = (
        max_neg == 0.0
        and leaks == 0
        and sup_violation == 0.0
        and lip_max <= 1.0 + 1e-6
        and (d > 2 or abs(integral - 1.0) <= 1e-6)
    )
    return KernelAuditReport(
        family=kernel.family,
        dimension=d,
        samples=sample_count,
        max_negativity=max_neg,
        integral_estimate=integral,
        lipschitz_ratio_max=lip_max,
        sup_violation=sup_violation,
        support_leak_count=leaks,
        passed=passed,
    )
