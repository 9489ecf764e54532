"""Line-oriented run configuration: ``section.key = value`` per line.

The format is deliberately flat so any tooling can parse it: blank lines and
``#`` comments are ignored, every other line must be ``section.key = value``.
Values are interpreted per key (floats, integer lists, grid triplets
``lo:hi:step``, point lists).  Unset keys fall back to schedule-driven
defaults; every resolved value is echoed into the run manifest.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .density import GridSpec
from .errors import ConfigError, ArkdeError
from .kernels import make_kernel
from .model import (
    gaussian_noise,
    laplace_noise,
    linear_drift,
    sine_drift,
    student_t_noise,
    tanh_drift,
    zero_drift,
)
from .tuning import recommend_schedule

_SECTIONS = ("model", "estimators", "schedule", "experiment", "io")


def parse_config_text(text, source="<config>"):
    """Parse the raw key/value map, reporting the line number of any bad line."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(
                f"{source}:{lineno}: expected 'section.key = value', got {line!r}",
                line=lineno,
            )
        key, value = stripped.split("=", 1)
        key = key.strip()
        value = value.split("#", 1)[0].strip()
        if "." not in key:
            raise ConfigError(
                f"{source}:{lineno}: key {key!r} must be qualified as section.key",
                key=key,
                line=lineno,
            )
        section = key.split(".", 1)[0]
        if section not in _SECTIONS:
            raise ConfigError(
                f"{source}:{lineno}: unknown section {section!r} "
                f"(expected one of {_SECTIONS})",
                key=key,
                line=lineno,
            )
        raw[key] = value
    return raw


def _get_float(raw, key, default=None):
    if key not in raw:
        return default
    try:
        return float(raw[key])
    except ValueError as exc:
        raise ConfigError(f"{key}: not a number: {raw[key]!r}", key=key) from exc


def _get_int(raw, key, default=None):
    if key not in raw:
        return default
    try:
        return int(raw[key])
    except ValueError as exc:
        raise ConfigError(f"{key}: not an integer: {raw[key]!r}", key=key) from exc


def _get_bool(raw, key, default=False):
    if key not in raw:
        return default
    v = raw[key].lower()
    if v in ("true", "1", "yes", "on"):
        return True
    if v in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"{key}: not a boolean: {raw[key]!r}", key=key)


def _get_int_list(raw, key, default=None):
    if key not in raw:
        return default
    try:
        return [int(v) for v in raw[key].replace(";", ",").split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"{key}: not an integer list: {raw[key]!r}", key=key) from exc


def _parse_matrix(text, key):
    try:
        rows = [
            [float(v) for v in row.split(",") if v.strip()]
            for row in text.split(";")
            if row.strip()
        ]
    except ValueError as exc:
        raise ConfigError(f"{key}: not a matrix: {text!r}", key=key) from exc
    if len(rows) == 1 and len(rows[0]) == 1:
        return rows[0][0]
    return np.array(rows)


def _parse_points(text, d, key):
    """Point list: scalars '-1,0,1' for d = 1, or '(a,b);(c,d)' tuples."""
    text = text.strip()
    try:
        if "(" in text:
            pts = []
            for chunk in text.split(";"):
                chunk = chunk.strip().strip("()")
                if chunk:
                    pts.append([float(v) for v in chunk.split(",")])
        else:
            pts = [[float(v)] for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"{key}: not a point list: {text!r}", key=key) from exc
    arr = np.array(pts, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != d:
        raise ConfigError(f"{key}: points must have dimension {d}", key=key)
    return arr


def _parse_grid(text, d, key):
    """Per-axis 'lo:hi:step' triplets separated by ';' (one triplet broadcasts)."""
    try:
        axes = [
            [float(v) for v in chunk.split(":")]
            for chunk in text.split(";")
            if chunk.strip()
        ]
    except ValueError as exc:
        raise ConfigError(f"{key}: not a grid spec: {text!r}", key=key) from exc
    if any(len(a) != 3 for a in axes):
        raise ConfigError(f"{key}: each axis needs lo:hi:step", key=key)
    if len(axes) == 1 and d > 1:
        axes = axes * d
    if len(axes) != d:
        raise ConfigError(f"{key}: expected {d} axes, got {len(axes)}", key=key)
    arr = np.array(axes)
    try:
        return GridSpec.make(arr[:, 0], arr[:, 1], arr[:, 2])
    except ArkdeError as exc:
        raise ConfigError(f"{key}: {exc}", key=key) from exc


@dataclass
class RunConfig:
    """Fully resolved and validated configuration for one CLI run."""

    drift: object
    noise: object
    d: int
    x0: np.ndarray
    kernel_f: object
    kernel_p: object
    beta: float
    alpha: float
    mode: str
    grid: Optional[GridSpec]
    schedule: object
    n: int
    n_grid: list
    replicates: int
    y_points: np.ndarray
    checkpoints: list
    diagnostic: bool
    oracle_residuals: bool
    out_dir: Path
    seed: int
    threads: int
    resolved: dict = field(default_factory=dict)


def parse_config(path=None, overrides=()):
    """Load, merge, default, and validate a run configuration.

    ``overrides`` are ``key=value`` strings applied after the file.  Raises
    :class:`ConfigError` naming the offending key and the violated inequality.
    """
    raw = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        raw.update(parse_config_text(p.read_text(), source=str(p)))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must be key=value, got {item!r}")
        key, value = item.split("=", 1)
        raw.update(parse_config_text(f"{key} = {value}", source="<override>"))
    return resolve_config(raw)


def _wrap(key, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except ArkdeError as exc:
        raise ConfigError(f"{key}: {exc}", key=key) from exc


def resolve_config(raw):
    """Fill defaults from the tail-appropriate schedule and validate everything."""
    d = _get_int(raw, "model.d", 1)
    if d < 1 or d > 3:
        raise ConfigError(f"model.d: must satisfy 1 <= d <= 3, got {d}", key="model.d")

    drift_name = raw.get("model.drift", "tanh")
    if drift_name in ("zero",):
        drift = zero_drift(d)
    elif drift_name in ("linear", "linear_stable"):
        theta = _parse_matrix(raw.get("model.theta", "0.5"), "model.theta")
        if np.isscalar(theta):
            theta = theta * np.eye(d)
        drift = _wrap("model.theta", linear_drift, theta)
    elif drift_name in ("tanh", "tanh_affine"):
        drift = tanh_drift(
            _get_float(raw, "model.tanh_scale", 1.0),
            _get_float(raw, "model.tanh_shift", 0.0),
            d,
        )
    elif drift_name in ("sine", "bounded_sine"):
        drift = sine_drift(_get_float(raw, "model.sine_amplitude", 1.0), d)
    else:
        raise ConfigError(
            f"model.drift: unknown family {drift_name!r} "
            "(zero | linear | tanh | sine)",
            key="model.drift",
        )

    noise_name = raw.get("model.noise", "gaussian")
    if noise_name == "gaussian":
        cov = _parse_matrix(raw.get("model.cov", "1.0"), "model.cov")
        noise = _wrap("model.cov", gaussian_noise, cov, d)
    elif noise_name in ("laplace", "laplace_product"):
        noise = _wrap(
            "model.laplace_rate",
            laplace_noise,
            _get_float(raw, "model.laplace_rate", 1.0),
            d,
        )
    elif noise_name in ("student", "student_t", "student_t_product"):
        noise = _wrap(
            "model.student_dof",
            student_t_noise,
            _get_float(raw, "model.student_dof", 8.0),
            _get_float(raw, "model.student_m", None),
            d,
        )
    else:
        raise ConfigError(
            f"model.noise: unknown family {noise_name!r} "
            "(gaussian | laplace | student)",
            key="model.noise",
        )

    x0 = np.broadcast_to(
        np.atleast_1d(_parse_matrix(raw.get("model.x0", "0"), "model.x0")), (d,)
    ).astype(float)

    kern_f_name = raw.get("estimators.kernel_f", raw.get("estimators.kernel", "epanechnikov"))
    kern_p_name = raw.get("estimators.kernel_p", raw.get("estimators.kernel", "epanechnikov"))
    kernel_f = _wrap("estimators.kernel_f", make_kernel, kern_f_name, d)
    kernel_p = _wrap("estimators.kernel_p", make_kernel, kern_p_name, d)

    beta_raw = _get_float(raw, "estimators.beta", None)
    schedule = _wrap(
        "schedule",
        recommend_schedule,
        noise,
        d,
        beta=_get_float(raw, "schedule.beta", beta_raw),
        r_f=drift.r_f,
        c=_get_float(raw, "schedule.c", 0.9),
        m=_get_float(raw, "schedule.m", None),
        a=_get_float(raw, "schedule.a", None),
        A=_get_float(raw, "schedule.A", 1.0),
        R=_get_float(raw, "schedule.R", 1.0),
        truncated=_get_bool(raw, "schedule.truncated", False),
    )
    beta = beta_raw if beta_raw is not None else schedule.beta
    alpha = _get_float(raw, "estimators.alpha", None)
    if alpha is None:
        lo = schedule.alpha_clt_lower
        hi = schedule.alpha_clt_upper
        alpha = (lo + hi) / 2.0

    mode = raw.get("estimators.mode", "plain")
    if mode not in ("plain", "truncated"):
        raise ConfigError(
            f"estimators.mode: must be plain or truncated, got {mode!r}",
            key="estimators.mode",
        )

    grid = None
    if "estimators.grid" in raw:
        grid = _parse_grid(raw["estimators.grid"], d, "estimators.grid")

    # range validation with the violated inequality in the message
    if not 0.0 < beta < 1.0 / d:
        raise ConfigError(
            f"estimators.beta: beta must satisfy 0 < beta < 1/d = {1.0 / d:.6g}, got {beta}",
            key="estimators.beta",
        )
    if not 0.0 < alpha < 1.0 / d:
        raise ConfigError(
            f"estimators.alpha: alpha must satisfy 0 < alpha < 1/d = {1.0 / d:.6g}, got {alpha}",
            key="estimators.alpha",
        )

    n = _get_int(raw, "experiment.n", 1000)
    if n < 1:
        raise ConfigError("experiment.n: n must be >= 1", key="experiment.n")
    n_grid = _get_int_list(raw, "experiment.n_grid", [2**j for j in range(12, 18)])
    replicates = _get_int(raw, "experiment.M", 400)
    y_points = _parse_points(raw.get("experiment.y_points", "-1,0,1"), d, "experiment.y_points")
    checkpoints = _get_int_list(raw, "experiment.checkpoints", None)
    if checkpoints is None:
        checkpoints = [n]
    bad = [c for c in checkpoints if c < 1 or c > n]
    if bad or any(b <= a for a, b in zip(checkpoints, checkpoints[1:])):
        raise ConfigError(
            "experiment.checkpoints: must be strictly increasing within [1, n]",
            key="experiment.checkpoints",
        )

    seed = _get_int(raw, "io.seed", 12345)
    threads = _get_int(raw, "io.threads", 1)
    out_dir = Path(raw.get("io.out_dir", "runs"))

    resolved = dict(raw)
    resolved.update(
        {
            "model.d": str(d),
            "model.drift": drift.family,
            "model.noise": noise.family,
            "estimators.kernel_f": kernel_f.family,
            "estimators.kernel_p": kernel_p.family,
            "estimators.beta": repr(beta),
            "estimators.alpha": repr(alpha),
            "estimators.mode": mode,
            "schedule.tail": schedule.tail,
            "schedule.eta": repr(schedule.eta),
            "schedule.tau": repr(schedule.tau_predicted),
            "schedule.beta_interval": repr(schedule.beta_interval),
            "schedule.alpha_range_clt": repr(schedule.alpha_range_clt),
            "io.seed": str(seed),
            "io.threads": str(threads),
        }
    )
    return RunConfig(
        drift=drift,
        noise=noise,
        d=d,
        x0=x0,
        kernel_f=kernel_f,
        kernel_p=kernel_p,
        beta=beta,
        alpha=alpha,
        mode=mode,
        grid=grid,
        schedule=schedule,
        n=n,
        n_grid=n_grid,
        replicates=replicates,
        y_points=y_points,
        checkpoints=checkpoints,
        diagnostic=_get_bool(raw, "experiment.diagnostic", True),
        oracle_residuals=_get_bool(raw, "experiment.oracle_residuals", False),
        out_dir=out_dir,
        seed=seed,
        threads=threads,
        resolved=resolved,
    )
