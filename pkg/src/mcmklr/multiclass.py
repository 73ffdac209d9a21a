"""One-vs-all reduction over the binary solvers.

One binary model per class (y = 1 on the class, 0 elsewhere). The
lattice column is label-independent, so it is built once and shared by
every per-class training job; prediction takes the argmax of the
per-class scores with ties broken toward the lowest class index.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from types import SimpleNamespace

import numpy as np

from . import klr_fast, mcm
from .errors import DimensionError, ValidationError
from .kernel import construct_column
from .klr_fast import TrainConfig, _resolve_grid


@dataclass
class MulticlassModel:
    classes: np.ndarray  # distinct training labels, ascending
    models: list  # one BinaryModel per class, same order
    config: TrainConfig


def train_ova(data, config, jobs=1, solver="mcm", scaler=None):
    """Train one binary model per distinct label.

    jobs > 1 runs per-class trainings in a thread pool; they share the
    read-only matrix but each gets its own FFT workspace.
    """
    y = np.asarray(data.y)
    classes = np.unique(y)
    if len(classes) < 2:
        raise ValidationError(f"one-vs-all needs >= 2 distinct labels, got {classes}")
    X = np.ascontiguousarray(data.X, dtype=np.float64)

    shared = None
    if solver == "mcm":
        grid = _resolve_grid(config, len(X))
        M = mcm.from_first_column(construct_column(config.kernel, grid), grid.order)
        shared = (M, grid)

    def fit_one(c):
        sub = SimpleNamespace(X=X, y=(y == c).astype(np.int64))
        if solver == "mcm":
            return klr_fast.train(sub, config, shared=shared, scaler=scaler)
        from .dense_oracle import train_exact

        return train_exact(sub, config, scaler=scaler)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            models = list(pool.map(fit_one, classes))
    else:
        models = [fit_one(c) for c in classes]
    return MulticlassModel(classes=classes, models=models, config=config)


def ova_scores(model, X_test, block=512):
    """Per-class score matrix, one column per class in model order."""
    cols = [klr_fast.predict(m, X_test, block=block) for m in model.models]
    return np.column_stack(cols)


def predict_ova(model, X_test, block=512):
    """argmax over per-class scores; ties go to the lowest class index."""
    X_test = np.asarray(X_test, dtype=np.float64)
    if X_test.ndim != 2 or X_test.shape[1] != model.models[0].train_X.shape[1]:
        raise DimensionError(
            f"test features have shape {X_test.shape}, "
            f"training dimension is {model.models[0].train_X.shape[1]}"
        )
    scores = ova_scores(model, X_test, block=block)
    return model.classes[np.argmax(scores, axis=1)]
