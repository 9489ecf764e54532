import numpy as np
import pytest

from arkde.kernels import make_kernel
from arkde.model import gaussian_noise, simulate, tanh_drift, zero_drift


@pytest.fixture(scope="session")
def epan1():
    return make_kernel("epanechnikov", 1)


@pytest.fixture(scope="session")
def epan2():
    return make_kernel("epanechnikov", 2)


@pytest.fixture(scope="session")
def tanh_gauss_traj():
    """A medium tanh-drift gaussian trajectory shared across tests."""
    return simulate(tanh_drift(1.0, 0.0, 1), gaussian_noise(1.0, 1), 5000,
                    seed=2024, keep_noise=True)


@pytest.fixture(scope="session")
def iid_gauss_noise():
    return gaussian_noise(1.0, 1)


def brute_nw(pred, resp, scale, wt, kernel, x):
    """Test-owned double-loop Nadaraya-Watson oracle."""
    x = np.asarray(x, dtype=float).reshape(-1)
    den = 0.0
    num = np.zeros(resp.shape[1])
    for k in range(pred.shape[0]):
        kv = 1.0
        for j in range(pred.shape[1]):
            kv *= kernel.eval1(scale[k] * (pred[k, j] - x[j]))
        if kv > 0.0:
            den += wt[k] * kv
            num += wt[k] * kv * resp[k]
    if den > 0.0:
        return num / den, den
    return np.zeros(resp.shape[1]), 0.0


def brute_recursive_kde(points, alpha, kernel, ys):
    """Test-owned one-shot recursive kernel density oracle."""
    points = np.atleast_2d(points)
    ys = np.atleast_2d(ys)
    n, d = points.shape
    out = np.zeros(ys.shape[0])
    for q in range(ys.shape[0]):
        acc = 0.0
        for i in range(1, n + 1):
            kv = 1.0
            for j in range(d):
                kv *= kernel.eval1(i**alpha * (points[i - 1, j] - ys[q, j]))
            acc += i ** (alpha * d) * kv
        out[q] = acc / n
    return out
