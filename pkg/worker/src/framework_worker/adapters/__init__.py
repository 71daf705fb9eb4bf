"""Framework adapter registry.

Adapters are loaded lazily so that serving one framework never imports
the others.
"""

from __future__ import annotations

import importlib

from ..bindings import Adapter

ADAPTERS = {
    "numpy": "framework_worker.adapters.numpy_backend",
    "torch": "framework_worker.adapters.torch_backend",
    "tensorflow": "framework_worker.adapters.tensorflow_backend",
    "jax": "framework_worker.adapters.jax_backend",
}


def load_adapter(name: str) -> Adapter:
    if name not in ADAPTERS:
        raise KeyError(f"unknown framework {name!r} (choose from {sorted(ADAPTERS)})")
    module = importlib.import_module(ADAPTERS[name])
    return module.make_adapter()
