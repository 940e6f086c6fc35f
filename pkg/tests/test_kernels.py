"""The compiled kernels and the pure-Python fallback must agree."""
import math
import os

import numpy as np
import pytest

from nbilliard import _kernels, _pykernels

try:
    from nbilliard import _ckernels
except ImportError:  # pragma: no cover - extension not built
    _ckernels = None

needs_c = pytest.mark.skipif(_ckernels is None, reason="compiled kernels not built")

C = np.array([[1.0, 0.0], [-1.0, 0.0], [0.2, 1.4]])
M = np.array([1.0, 0.6, 0.3])
A = np.array([1.0, 1.5, 2.0])


def test_backend_reported():
    assert _kernels.BACKEND in ("cython", "python")
    forced = os.environ.get("NBILLIARD_PURE", "") in ("1", "true", "yes")
    if _ckernels is not None and not forced:
        assert _kernels.BACKEND == "cython"


@needs_c
def test_pointwise_parity(rng):
    for x, y in rng.uniform(-4, 4, size=(300, 2)):
        assert _ckernels.potential(C, M, A, x, y) == pytest.approx(
            _pykernels.potential(C, M, A, x, y), rel=1e-14)
        assert np.allclose(_ckernels.gradient(C, M, A, x, y),
                           _pykernels.gradient(C, M, A, x, y), rtol=1e-13, atol=0)
        assert _ckernels.laplacian(C, M, A, x, y) == pytest.approx(
            _pykernels.laplacian(C, M, A, x, y), rel=1e-13)
        assert np.allclose(_ckernels.hessian(C, M, A, x, y),
                           _pykernels.hessian(C, M, A, x, y), rtol=1e-13, atol=1e-300)


@needs_c
def test_vectorised_parity(rng):
    P = rng.uniform(-4, 4, size=(500, 2))
    assert np.allclose(_ckernels.potential_many(C, M, A, P),
                       _pykernels.potential_many(C, M, A, P), rtol=1e-14, atol=0)
    assert np.allclose(_ckernels.gradient_many(C, M, A, P),
                       _pykernels.gradient_many(C, M, A, P), rtol=1e-13, atol=0)
    assert np.allclose(_ckernels.hessian_many(C, M, A, P),
                       _pykernels.hessian_many(C, M, A, P), rtol=1e-13, atol=0)
    assert np.allclose(_ckernels.min_centre_distance(C, P),
                       _pykernels.min_centre_distance(C, P), rtol=1e-15, atol=0)
    assert _ckernels.path_length(C, M, A, 0.7, P) == pytest.approx(
        _pykernels.path_length(C, M, A, 0.7, P), rel=1e-13)


def test_path_length_straight_segment():
    # far from the centres the JM length tends to sqrt(2h) times the euclidean one
    nodes = np.column_stack([np.linspace(-5.0, 5.0, 257), np.full(257, 1e7)])
    L = _kernels.path_length(C, M, A, 0.5, nodes)
    assert L == pytest.approx(10.0, rel=1e-6)
    assert _kernels.path_length(C, M, A, 0.5, nodes[:1]) == 0.0


def _run(mod, y0, wd=-1.0):
    w = (0.0, 1.0)
    d = 3.0 if wd < 0 else wd
    return mod.integrate(C, M, A, np.array(y0), w, d, np.zeros(2), 60.0, math.inf,
                         1e-10, 1e-12, 200000, 1e-6, True)


@needs_c
@pytest.mark.parametrize("y0", [
    [0.5, -3.0, 0.3, 1.8],
    [-2.0, -3.0, 0.9, 1.1],
    [3.0, -3.0, -1.4, 0.6],
])
def test_integrator_parity(y0):
    tc, yc, code_c, nc = _run(_ckernels, y0)
    tp, yp, code_p, npy = _run(_pykernels, y0)
    assert code_c == code_p
    assert nc == npy
    # same step sequence; differences come from floating-point summation order only
    assert np.allclose(tc, tp, rtol=1e-9, atol=1e-12)
    assert np.allclose(yc, yp, rtol=1e-8, atol=1e-10)


def test_wall_event_located():
    tp, yp, code, _ = _run(_kernels, [0.5, -3.0, 0.3, 1.8])
    assert code == _kernels.WALL
    assert abs(yp[-1, 1] + 3.0) < 1e-12
    assert yp[-1, 3] < 0
