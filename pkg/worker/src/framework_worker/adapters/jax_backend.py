"""JAX adapter.

64-bit mode is enabled before any array is built; without it JAX
silently downcasts f64 inputs to f32, which would break bit-exact
round-trips.
"""

from __future__ import annotations

import numpy as np

from ..bindings import Adapter, build_bindings


def make_adapter() -> Adapter:
    import jax

    jax.config.update("jax_enable_x64", True)
    import jax.numpy as jnp

    def to_native(arr: np.ndarray):
        return jnp.asarray(arr)

    def to_numpy(obj) -> np.ndarray:
        return np.asarray(obj)

    table = [
        ("jax.numpy.argsort", "jax.numpy.argsort", None),
        ("jax.numpy.add", "jax.numpy.add", None),
        ("jax.numpy.multiply", "jax.numpy.multiply", None),
        ("jax.numpy.matmul", "jax.numpy.matmul", None),
        ("jax.nn.relu", "jax.nn.relu", None),
        ("jax.nn.softmax", "jax.nn.softmax", None),
        ("jax.numpy.mean", "jax.numpy.mean", None),
        ("jax.numpy.sum", "jax.numpy.sum", None),
        ("jax.numpy.angle", "jax.numpy.angle", None),
        ("jax.numpy.clip", "jax.numpy.clip", None),
        ("jax.numpy.copy", "jax.numpy.copy", None),
    ]
    return Adapter(
        name="jax",
        version=jax.__version__,
        to_native=to_native,
        to_numpy=to_numpy,
        bindings=build_bindings(table),
    )
