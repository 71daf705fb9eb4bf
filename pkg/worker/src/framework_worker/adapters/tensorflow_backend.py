"""TensorFlow adapter.

The import is deferred into make_adapter and the C++ log level is
lowered first, so protocol traffic on stdout stays clean.
"""

from __future__ import annotations

import os

import numpy as np

from ..bindings import Adapter, build_bindings


def make_adapter() -> Adapter:
    os.environ.setdefault("TF_CPP_MIN_LOG_LEVEL", "2")
    import tensorflow as tf

    def to_native(arr: np.ndarray):
        return tf.constant(arr)

    def to_numpy(obj) -> np.ndarray:
        if hasattr(obj, "numpy"):
            return np.asarray(obj.numpy())
        return np.asarray(obj)

    table = [
        ("tf.argsort", "tensorflow.argsort", None),
        ("tf.math.add", "tensorflow.math.add", None),
        ("tf.math.multiply", "tensorflow.math.multiply", None),
        ("tf.linalg.matmul", "tensorflow.linalg.matmul", None),
        ("tf.nn.relu", "tensorflow.nn.relu", None),
        ("tf.nn.softmax", "tensorflow.nn.softmax", None),
        ("tf.math.reduce_mean", "tensorflow.math.reduce_mean", None),
        ("tf.math.reduce_sum", "tensorflow.math.reduce_sum", None),
        ("tf.math.angle", "tensorflow.math.angle", None),
        ("tf.clip_by_value", "tensorflow.clip_by_value", None),
        ("tf.identity", "tensorflow.identity", None),
    ]
    return Adapter(
        name="tensorflow",
        version=tf.__version__,
        to_native=to_native,
        to_numpy=to_numpy,
        bindings=build_bindings(table),
    )
