"""PyTorch adapter. CPU tensors only; outputs come back detached."""

from __future__ import annotations

import numpy as np

from ..bindings import Adapter, build_bindings


def make_adapter() -> Adapter:
    import torch

    def to_native(arr: np.ndarray):
        return torch.from_numpy(np.ascontiguousarray(arr))

    def to_numpy(obj) -> np.ndarray:
        if isinstance(obj, torch.Tensor):
            return obj.detach().cpu().numpy()
        return np.asarray(obj)

    table = [
        ("torch.argsort", "torch.argsort", None),
        ("torch.add", "torch.add", None),
        ("torch.mul", "torch.mul", None),
        ("torch.matmul", "torch.matmul", None),
        ("torch.relu", "torch.relu", None),
        ("torch.softmax", "torch.softmax", None),
        ("torch.mean", "torch.mean", None),
        ("torch.sum", "torch.sum", None),
        ("torch.angle", "torch.angle", None),
        ("torch.clamp", "torch.clamp", None),
        ("torch.clone", "torch.clone", None),
    ]
    return Adapter(
        name="torch",
        version=torch.__version__,
        to_native=to_native,
        to_numpy=to_numpy,
        bindings=build_bindings(table),
    )
