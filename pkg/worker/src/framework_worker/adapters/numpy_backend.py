"""Pure-numpy adapter.

Mostly useful for exercising the protocol without pulling in a heavy
framework, but it is a complete backend in its own right.
"""

from __future__ import annotations

import numpy as np

from ..bindings import Adapter, ApiBinding


def _softmax(x, axis=-1):
    x = np.asarray(x)
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


def make_adapter() -> Adapter:
    table = {
        "numpy.argsort": lambda a, axis=-1: np.argsort(a, axis=axis, kind="stable"),
        "numpy.add": np.add,
        "numpy.multiply": np.multiply,
        "numpy.matmul": np.matmul,
        "numpy.relu": lambda x: np.maximum(x, 0),
        "numpy.softmax": _softmax,
        "numpy.mean": lambda a, axis=None: np.mean(a, axis=axis),
        "numpy.sum": lambda a, axis=None: np.sum(a, axis=axis),
        "numpy.angle": np.angle,
        "numpy.clip": lambda a, lo, hi: np.clip(a, lo, hi),
        "numpy.copy": np.copy,
    }
    bindings = {name: ApiBinding(name, fn) for name, fn in table.items()}
    return Adapter(
        name="numpy",
        version=np.__version__,
        to_native=np.asarray,
        to_numpy=np.asarray,
        bindings=bindings,
    )
