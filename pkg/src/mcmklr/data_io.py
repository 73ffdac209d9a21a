"""Dataset ingestion, synthetic generators, scaling, and the model file.

Text datasets use the sparse `<label> <idx>:<val> ...` line format with
1-based, strictly increasing indices per line. Labels are parsed as
numbers and remapped to canonical 0..C-1 in ascending original order;
the original values are kept in Dataset.meta["classes"].

Model files (magic "MCMKLR1") hold a UTF-8 key=value header, a blank
line, then little-endian float64 arrays: the lattice column, each
coefficient vector, and the training features row-major. Training
features ride along because scoring a new point needs the full kernel
expansion over them.
"""

import io
from dataclasses import dataclass, field

import numpy as np

from .errors import DataFormatError, ValidationError
from .kernel import GridSpec, RadialKernel
from .klr_fast import BinaryModel, TrainConfig
from .multiclass import MulticlassModel
from .tensor_fft import LevelOrder

MAGIC = b"MCMKLR1\n"

# frozen constants of the two-dimensional band generator
FIG1_AMPLITUDE = 0.25
FIG1_FREQUENCY = 1.5
FIG1_GAP = 0.05
FIG1_FLIP = 0.04


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.ascontiguousarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.ndim != 2:
            raise ValidationError(f"features must be 2-D, got shape {self.X.shape}")
        if len(self.X) != len(self.y):
            raise ValidationError(f"{len(self.X)} rows vs {len(self.y)} labels")
        if len(self.X) < 1:
            raise ValidationError("dataset is empty")
        if not np.isfinite(self.X).all():
            raise ValidationError("features contain NaN or Inf")
        self.meta.setdefault("n", len(self.X))
        self.meta.setdefault("d", self.X.shape[1])

    @property
    def n(self):
        return len(self.X)

    @property
    def d(self):
        return self.X.shape[1]


def parse_sparse_text(stream, source="<stream>"):
    """Parse the sparse text format into a dense Dataset.

    Blank lines and lines starting with '#' are ignored. Any malformed
    token fails with the 1-based line number; indices must be strictly
    increasing within a line. d is the largest index seen anywhere.
    """
    if isinstance(stream, (str, bytes)):
        stream = io.StringIO(stream if isinstance(stream, str) else stream.decode())
    labels, rows, d = [], [], 0
    for ln, line in enumerate(stream, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        try:
            label = float(parts[0])
        except ValueError:
            raise DataFormatError(f"line {ln}: label {parts[0]!r} is not numeric")
        row, prev = {}, 0
        for tok in parts[1:]:
            try:
                idx_s, val_s = tok.split(":", 1)
                idx, val = int(idx_s), float(val_s)
            except ValueError:
                raise DataFormatError(f"line {ln}: malformed feature token {tok!r}")
            if idx < 1:
                raise DataFormatError(f"line {ln}: index {idx} is not 1-based")
            if idx <= prev:
                raise DataFormatError(
                    f"line {ln}: index {idx} not strictly increasing (previous {prev})"
                )
            prev = idx
            row[idx - 1] = val
            d = max(d, idx)
        labels.append(label)
        rows.append(row)
    if not rows:
        raise ValidationError("no samples in input (need n >= 1)")
    X = np.zeros((len(rows), d))
    for i, row in enumerate(rows):
        for j, v in row.items():
            X[i, j] = v
    labels = np.asarray(labels)
    classes = np.unique(labels)
    lookup = {c: i for i, c in enumerate(classes)}
    y = np.asarray([lookup[v] for v in labels], dtype=np.int64)
    return Dataset(X, y, meta={"source": source, "classes": classes.tolist()})


def write_sparse_text(dataset, path):
    """Write a Dataset back out in the sparse text format (zeros omitted)."""
    classes = dataset.meta.get("classes")
    with open(path, "w") as f:
        for i in range(dataset.n):
            label = classes[dataset.y[i]] if classes is not None else dataset.y[i]
            toks = [f"{label:g}"]
            for j in range(dataset.d):
                v = float(dataset.X[i, j])
                if v != 0.0:
                    toks.append(f"{j + 1}:{v!r}")
            f.write(" ".join(toks) + "\n")


def generate_checkerboard(n_points, seed):
    """Uniform points on [0,1]^2 labeled by 4x4 cell parity."""
    if n_points < 1:
        raise ValidationError("need n_points >= 1")
    rng = np.random.default_rng(seed)
    X = rng.random((n_points, 2))
    y = (np.floor(4 * X[:, 0]) + np.floor(4 * X[:, 1])).astype(np.int64) % 2
    return Dataset(X, y, meta={"source": f"checkerboard(seed={seed})", "classes": [0, 1]})


def _band_points(rng, count):
    # rejection-sample uniform points whose margin to the sine boundary
    # is at least FIG1_GAP
    out = np.empty((0, 2))
    while len(out) < count:
        cand = rng.random((2 * count, 2))
        s = cand[:, 1] - 0.5 - FIG1_AMPLITUDE * np.sin(2 * np.pi * FIG1_FREQUENCY * cand[:, 0])
        out = np.vstack([out, cand[np.abs(s) >= FIG1_GAP]])
    return out[:count]


def generate_fig1_synthetic(n_train=3375, n_test=625, seed=0):
    """Two-class smooth-boundary problem on [0,1]^2, split train/test.

    The boundary is x2 = 0.5 + 0.25 sin(2 pi 1.5 x1); points closer
    than 0.05 to it are rejected, labels flip independently with
    probability 0.04. One sample stream is drawn and split, so the two
    sets are disjoint and jointly deterministic under the seed.
    """
    if n_train < 1 or n_test < 1:
        raise ValidationError("need n_train >= 1 and n_test >= 1")
    rng = np.random.default_rng(seed)
    n = n_train + n_test
    X = _band_points(rng, n)
    s = X[:, 1] - 0.5 - FIG1_AMPLITUDE * np.sin(2 * np.pi * FIG1_FREQUENCY * X[:, 0])
    y = (s > 0).astype(np.int64)
    flip = rng.random(n) < FIG1_FLIP
    y = np.where(flip, 1 - y, y)
    meta = {"source": f"fig1(seed={seed})", "classes": [0, 1]}
    return (
        Dataset(X[:n_train], y[:n_train], meta=dict(meta)),
        Dataset(X[n_train:], y[n_train:], meta=dict(meta)),
    )


def generate_blobs(n_points, n_classes=3, seed=0, spread=0.07):
    """Isotropic Gaussian blobs on a circle; linearly separable classes."""
    if n_points < n_classes:
        raise ValidationError("need at least one point per class")
    if n_classes < 2:
        raise ValidationError("need >= 2 classes")
    rng = np.random.default_rng(seed)
    per = [n_points // n_classes + (1 if c < n_points % n_classes else 0) for c in range(n_classes)]
    xs, ys = [], []
    for c, cnt in enumerate(per):
        ang = 2 * np.pi * c / n_classes
        center = np.array([0.5 + 0.33 * np.cos(ang), 0.5 + 0.33 * np.sin(ang)])
        xs.append(center + spread * rng.standard_normal((cnt, 2)))
        ys.append(np.full(cnt, c, dtype=np.int64))
    X = np.vstack(xs)
    y = np.concatenate(ys)
    order = rng.permutation(len(X))
    return Dataset(
        X[order], y[order],
        meta={"source": f"blobs(seed={seed})", "classes": list(range(n_classes))},
    )


def scale_minmax(dataset):
    """Min-max scale features to [0,1] per column; returns (scaled, (mins, spans))."""
    mins = dataset.X.min(axis=0)
    spans = dataset.X.max(axis=0) - mins
    spans = np.where(spans == 0.0, 1.0, spans)
    X = (dataset.X - mins) / spans
    return Dataset(X, dataset.y.copy(), meta=dict(dataset.meta)), (mins, spans)


def _fmt_floats(arr):
    return ",".join(repr(float(v)) for v in np.asarray(arr).ravel())


def _parse_floats(s):
    return np.array([float(v) for v in s.split(",")]) if s else np.zeros(0)


def _header_lines(kind, model_type, classes, cfg, order, n, d, N, scaler):
    dims = ",".join(str(v) for v in order.dims) if order is not None else ""
    h = ""
    if isinstance(cfg.grid, GridSpec):
        h = _fmt_floats(cfg.grid.h)
    elif order is not None:
        h = _fmt_floats((cfg.auto_h,) * order.q)
    lines = [
        "format_version=1",
        f"kind={kind}",
        f"model_type={model_type}",
        f"n={n}",
        f"d={d}",
        f"N={N}",
        f"q={order.q if order is not None else 0}",
        f"dims={dims}",
        f"h={h}",
        f"sigma={cfg.kernel.sigma!r}",
        f"lambda={cfg.lambda_!r}",
        f"t_max={cfg.t_max}",
        f"eps={cfg.eps!r}",
        f"delta={cfg.armijo_delta!r}",
        f"beta={cfg.armijo_beta!r}",
        f"max_backtracks={cfg.max_backtracks}",
        f"seed={cfg.seed}",
        f"classes={_fmt_floats(classes)}",
        f"scaled={0 if scaler is None else 1}",
    ]
    if scaler is not None:
        lines.append(f"scaler_min={_fmt_floats(scaler[0])}")
        lines.append(f"scaler_span={_fmt_floats(scaler[1])}")
    return lines


def save_model(model, path):
    """Serialize a binary or one-vs-all model; see the module docstring."""
    if isinstance(model, MulticlassModel):
        first = model.models[0]
        kind, model_type = first.kind, "ova"
        classes = model.classes
        alphas = [m.alpha for m in model.models]
        cfg, order, column, X, scaler = first.config, first.order, first.column, first.train_X, first.scaler
    else:
        first = model
        kind, model_type = model.kind, "binary"
        classes = np.array([0, 1])
        alphas = [model.alpha]
        cfg, order, column, X, scaler = model.config, model.order, model.column, model.train_X, model.scaler
    N = len(alphas[0])
    lines = _header_lines(kind, model_type, classes, cfg, order, len(X), X.shape[1], N, scaler)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(("\n".join(lines) + "\n\n").encode())
        f.write(np.ascontiguousarray(column, dtype="<f8").tobytes())
        for a in alphas:
            f.write(np.ascontiguousarray(a, dtype="<f8").tobytes())
        f.write(np.ascontiguousarray(X, dtype="<f8").tobytes())


def _read_exact(f, count, what):
    buf = f.read(count * 8)
    if len(buf) != count * 8:
        raise DataFormatError(f"model file truncated while reading {what}")
    return np.frombuffer(buf, dtype="<f8").copy()


def _require(header, key):
    if key not in header:
        raise DataFormatError(f"model header is missing key {key!r}")
    return header[key]


def load_model(path):
    """Inverse of save_model; array payloads round-trip bit-exactly."""
    with open(path, "rb") as f:
        magic = f.read(len(MAGIC))
        if magic != MAGIC:
            raise DataFormatError(f"bad magic {magic!r}; not a model file")
        header = {}
        while True:
            line = f.readline()
            if line in (b"\n", b""):
                break
            try:
                key, val = line.decode().rstrip("\n").split("=", 1)
            except ValueError:
                raise DataFormatError(f"malformed header line {line!r}")
            header[key] = val
        try:
            kind = _require(header, "kind")
            model_type = _require(header, "model_type")
            n = int(_require(header, "n"))
            d = int(_require(header, "d"))
            N = int(_require(header, "N"))
            dims_s = _require(header, "dims")
            sigma = float(_require(header, "sigma"))
            lambda_ = float(_require(header, "lambda"))
            classes = _parse_floats(_require(header, "classes"))
            scaled = int(_require(header, "scaled"))
            t_max = int(_require(header, "t_max"))
            eps = float(_require(header, "eps"))
            delta = float(_require(header, "delta"))
            beta = float(_require(header, "beta"))
            max_backtracks = int(_require(header, "max_backtracks"))
            seed = int(_require(header, "seed"))
            h = _parse_floats(_require(header, "h"))
        except (ValueError, TypeError) as exc:
            raise DataFormatError(f"unparsable model header: {exc}")
        if kind not in ("mcm", "exact"):
            raise DataFormatError(f"unknown model kind {kind!r}")
        if model_type not in ("binary", "ova"):
            raise DataFormatError(f"unknown model type {model_type!r}")

        order = None
        grid = "auto"
        if kind == "mcm":
            if not dims_s:
                raise DataFormatError("mcm model is missing its level order")
            order = LevelOrder([int(v) for v in dims_s.split(",")])
            if order.n != N:
                raise DataFormatError(f"dims product {order.n} != N = {N}")
            if len(h) != order.q:
                raise DataFormatError("h length does not match the level order")
            grid = GridSpec(tuple(h), order)
        scaler = None
        if scaled:
            scaler = (_parse_floats(_require(header, "scaler_min")),
                      _parse_floats(_require(header, "scaler_span")))
            if len(scaler[0]) != d or len(scaler[1]) != d:
                raise DataFormatError("scaler parameter length does not match d")

        cfg = TrainConfig(
            lambda_=lambda_,
            kernel=RadialKernel(sigma=sigma),
            grid=grid,
            t_max=t_max,
            eps=eps,
            armijo_delta=delta,
            armijo_beta=beta,
            max_backtracks=max_backtracks,
            seed=seed,
        )
        column = _read_exact(f, N if kind == "mcm" else 0, "column")
        n_alphas = len(classes) if model_type == "ova" else 1
        alphas = [_read_exact(f, N, f"alpha[{i}]") for i in range(n_alphas)]
        X = _read_exact(f, n * d, "training features").reshape(n, d)
        trailing = f.read(1)
        if trailing:
            raise DataFormatError("model file has trailing bytes after the declared arrays")

    def mk(alpha):
        return BinaryModel(
            alpha=alpha, config=cfg, order=order, column=column.copy(),
            train_X=X, kind=kind, scaler=scaler,
        )

    if model_type == "binary":
        return mk(alphas[0])
    return MulticlassModel(
        classes=classes.astype(np.int64) if np.allclose(classes, np.round(classes)) else classes,
        models=[mk(a) for a in alphas],
        config=cfg,
    )
