"""Graph directories (TSV), binary mode checkpoints and CSV/JSON report writers."""

import csv
import hashlib
import io as _io
import json
import math
import struct
from pathlib import Path

import numpy as np

from .errors import CorruptCheckpointError, GraphParseError
from .gnn import Activation, Metrics, Mode, ModelParams
from .graph import GraphDataset

GRAPH_FILES = ("edges.tsv", "features.tsv", "labels.tsv", "masks.tsv")
MAGIC = b"MCKP"
VERSION = 1
_PREFIX = struct.Struct("<4sII")  # magic, version, header length


def fmt(x):
    """Text form of a number: ints verbatim, floats with 17 significant digits."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".17g")
    if x is None:
        return ""
    return str(x)


# ---------------------------------------------------------------------------
# graphs


def save_graph(g, path):
    """Write the four TSV files of ``g`` into directory ``path``."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    with open(path / "edges.tsv", "w", newline="\n") as f:
        for i, j in g.edges:
            f.write(f"{i}\t{j}\n")
    with open(path / "features.tsv", "w", newline="\n") as f:
        for row in g.X:
            f.write("\t".join(fmt(v) for v in row) + "\n")
    with open(path / "labels.tsv", "w", newline="\n") as f:
        for y in g.Y:
            f.write(f"{y}\n")
    with open(path / "masks.tsv", "w", newline="\n") as f:
        for tr, te in zip(g.train_mask, g.test_mask):
            f.write(("train" if tr else "test" if te else "none") + "\n")
    return path


def _rows(file):
    with open(file) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if line and not line.startswith("#"):
                yield lineno, line.split()


def load_graph(path, num_classes=None, name=None):
    """Read a graph directory written by :func:`save_graph` or by hand.

    ``n`` is the number of feature rows. Edges may be listed in either or both
    directions and repeated; they are symmetrized and deduplicated.
    Self-loop lines are dropped because normalization adds them anyway.
    ``num_classes`` defaults to ``max(label) + 1`` (at least 2).
    """
    path = Path(path)
    for fname in GRAPH_FILES:
        if not (path / fname).is_file():
            raise GraphParseError(path / fname, 0, "file missing")

    feats, width = [], None
    fpath = path / "features.tsv"
    for lineno, parts in _rows(fpath):
        if width is None:
            width = len(parts)
        elif len(parts) != width:
            raise GraphParseError(fpath, lineno, f"expected {width} columns, got {len(parts)}")
        try:
            feats.append([float(v) for v in parts])
        except ValueError:
            raise GraphParseError(fpath, lineno, "non-numeric feature") from None
    n = len(feats)
    if n == 0:
        raise GraphParseError(fpath, 0, "no feature rows")
    X = np.array(feats, dtype=np.float64)
    if not np.all(np.isfinite(X)):
        raise GraphParseError(fpath, 0, "non-finite feature value")

    lpath = path / "labels.tsv"
    labels = []
    for lineno, parts in _rows(lpath):
        if len(parts) != 1:
            raise GraphParseError(lpath, lineno, "expected one label per line")
        try:
            y = int(parts[0])
        except ValueError:
            raise GraphParseError(lpath, lineno, f"label {parts[0]!r} is not an integer") from None
        if y < 0 or (num_classes is not None and y >= num_classes):
            raise GraphParseError(lpath, lineno, f"label {y} outside [0, C)")
        labels.append(y)
    if len(labels) != n:
        raise GraphParseError(lpath, len(labels), f"expected {n} labels, got {len(labels)}")
    C = int(num_classes) if num_classes is not None else max(2, max(labels) + 1)

    mpath = path / "masks.tsv"
    train, test = np.zeros(n, bool), np.zeros(n, bool)
    count = 0
    for lineno, parts in _rows(mpath):
        if len(parts) != 1 or parts[0] not in ("train", "test", "none"):
            raise GraphParseError(mpath, lineno, "mask must be train, test or none")
        if count >= n:
            raise GraphParseError(mpath, lineno, f"more than {n} mask rows")
        train[count] = parts[0] == "train"
        test[count] = parts[0] == "test"
        count += 1
    if count != n:
        raise GraphParseError(mpath, count, f"expected {n} mask rows, got {count}")

    epath = path / "edges.tsv"
    pairs = set()
    for lineno, parts in _rows(epath):
        if len(parts) != 2:
            raise GraphParseError(epath, lineno, f"expected 2 columns, got {len(parts)}")
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError:
            raise GraphParseError(epath, lineno, "edge endpoints must be integers") from None
        if not (0 <= i < n and 0 <= j < n):
            raise GraphParseError(epath, lineno, f"node id outside [0, {n})")
        if i != j:
            pairs.add((min(i, j), max(i, j)))
    edges = np.array(sorted(pairs), dtype=np.int64).reshape(-1, 2)
    return GraphDataset(n, edges, X, np.array(labels), train, test, C, name or path.name)


# ---------------------------------------------------------------------------
# checkpoints


def _sha256(data):
    return hashlib.sha256(data).hexdigest()


def checkpoint_bytes(params):
    header = json.dumps(
        {"arch": params.arch, "layer_dims": list(params.layer_dims), "activation": str(params.activation)},
        sort_keys=True,
    ).encode()
    payload = b"".join(np.ascontiguousarray(W, dtype="<f8").tobytes() for W in params.weights)
    return _PREFIX.pack(MAGIC, VERSION, len(header)) + header + payload


def params_from_bytes(data):
    if len(data) < _PREFIX.size:
        raise CorruptCheckpointError("checkpoint shorter than its prefix")
    magic, version, hlen = _PREFIX.unpack_from(data)
    if magic != MAGIC:
        raise CorruptCheckpointError(f"bad magic {magic!r}")
    if version != VERSION:
        raise CorruptCheckpointError(f"unsupported checkpoint version {version}")
    start = _PREFIX.size
    try:
        header = json.loads(data[start:start + hlen].decode())
        dims = [int(x) for x in header["layer_dims"]]
        arch, act = header["arch"], header["activation"]
    except (ValueError, KeyError, TypeError) as exc:
        raise CorruptCheckpointError(f"unreadable header: {exc}") from None
    payload = data[start + hlen:]
    sizes = [a * b for a, b in zip(dims[:-1], dims[1:])]
    if len(payload) != 8 * sum(sizes):
        raise CorruptCheckpointError(f"payload has {len(payload)} bytes, expected {8 * sum(sizes)}")
    flat = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    ws, k = [], 0
    for (a, b), size in zip(zip(dims[:-1], dims[1:]), sizes):
        ws.append(flat[k:k + size].reshape(a, b))
        k += size
    try:
        return ModelParams(arch, tuple(dims), tuple(ws), Activation.parse(act))
    except ValueError as exc:
        raise CorruptCheckpointError(f"invalid checkpoint content: {exc}") from None


def sidecar_path(path):
    return Path(str(path) + ".json")


def save_mode(mode, path):
    """Write ``path`` (binary weights) and ``path.json`` (metrics, provenance, hash)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = checkpoint_bytes(mode.params)
    path.write_bytes(data)
    side = {
        "sha256": _sha256(data),
        "metrics": mode.metrics.as_dict() if mode.metrics is not None else None,
        "provenance": mode.provenance,
    }
    write_json(sidecar_path(path), side)
    return path


def load_mode(path):
    """Read a checkpoint; the sidecar, when present, must match its hash."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise CorruptCheckpointError(f"cannot read {path}: {exc}") from None
    params = params_from_bytes(data)
    side = sidecar_path(path)
    if not side.is_file():
        return Mode(params, None, {})
    try:
        meta = json.loads(side.read_text())
    except ValueError as exc:
        raise CorruptCheckpointError(f"unreadable sidecar: {exc}") from None
    if meta.get("sha256") != _sha256(data):
        raise CorruptCheckpointError("checkpoint hash does not match its sidecar")
    m = meta.get("metrics")
    metrics = None
    if m is not None:
        metrics = Metrics(m["train_loss"], m["test_loss"], m["train_acc"], m["test_acc"])
    return Mode(params, metrics, meta.get("provenance") or {})


# ---------------------------------------------------------------------------
# reports


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        obj = float(obj)
        return obj if math.isfinite(obj) else None
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dumps_json(obj):
    """Sorted-key JSON; floats use the shortest repr that round-trips exactly.

    Non-finite floats become ``null``.
    """
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_json(obj))
    return path


def csv_text(header, rows):
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows):
    """CSV with a header row; column names carry their units, e.g. ``[nats]``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        f.write(csv_text(header, rows))
    return path


def file_sha256(path):
    return _sha256(Path(path).read_bytes())



PROFILE_HEADER = ["alpha", "train_loss[nats]", "test_loss[nats]", "train_acc[0,1]", "test_acc[0,1]"]


def write_profile(path, profile):
    return write_csv(path, PROFILE_HEADER, profile.rows())


def read_csv_columns(path):
    """Read a CSV written by :func:`write_csv`; unit suffixes are stripped from names."""
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if not rows:
        raise GraphParseError(path, 0, "empty CSV")
    names = [h.split("[", 1)[0] for h in rows[0]]
    return names, rows[1:]


def read_profile(path):
    from .paths import PathProfile

    names, rows = read_csv_columns(path)
    want = [h.split("[", 1)[0] for h in PROFILE_HEADER]
    if names != want:
        raise GraphParseError(path, 1, f"expected columns {want}")
    try:
        cols = np.array([[float(v) for v in r] for r in rows], dtype=np.float64).reshape(-1, len(want))
    except ValueError:
        raise GraphParseError(path, 0, "non-numeric profile value") from None
    return PathProfile(*cols.T)
