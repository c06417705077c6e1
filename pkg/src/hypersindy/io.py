"""Readers and writers for every file the CLI emits.

Floats are written with 17 significant digits so that every file re-parses
to the exact same doubles.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import asdict
from pathlib import Path

import numpy as np

from hypersindy import autodiff as ad
from hypersindy.autodiff import Tensor
from hypersindy.dynamics import Trajectory
from hypersindy.evaluation import CoefficientEnsemble, KmField
from hypersindy.library import LibrarySpec, term_names
from hypersindy.model import MLP, HyperSINDy, ModelConfig, Normalizer, SparseMask
from hypersindy.training import TrainConfig, TrainHistory

FLOAT_FMT = "%.17g"
CHECKPOINT_VERSION = 1


def _fmt(v: float) -> str:
    return FLOAT_FMT % v


# ----------------------------------------------------------------- JSON


def _encode(obj) -> str:
    # json.dumps writes shortest round-trip reprs; the file format asks for 17 digits
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        if not math.isfinite(obj):
            raise ValueError(f"cannot serialise non-finite value {obj}")
        return _fmt(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_encode(v) for v in obj) + "]"
    if isinstance(obj, dict):
        return "{" + ",".join(f"{json.dumps(str(k))}:{_encode(v)}" for k, v in obj.items()) + "}"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dump_json(obj, path) -> None:
    Path(path).write_text(_encode(obj) + "\n")


def load_json(path):
    return json.loads(Path(path).read_text())


# ----------------------------------------------------------- trajectories


def write_trajectory(traj: Trajectory, path) -> None:
    n = traj.state_dim
    header = ["t"] + [f"x{i + 1}" for i in range(n)]
    cols = [traj.times[:, None], traj.states]
    if traj.derivatives is not None:
        header += [f"dx{i + 1}" for i in range(n)]
        cols.append(traj.derivatives)
    np.savetxt(path, np.hstack(cols), fmt=FLOAT_FMT, delimiter=",", header=",".join(header), comments="")


def read_trajectory(path) -> Trajectory:
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().strip().split(",")
    if not header or header[0] != "t":
        raise ad.ContractError(f"{path}: not a trajectory CSV (header {header})")
    n = sum(1 for h in header if h.startswith("x"))
    has_dx = any(h.startswith("dx") for h in header)
    if len(header) != 1 + n * (2 if has_dx else 1):
        raise ad.ContractError(f"{path}: malformed header {header}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)  # an empty body is reported below
        rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if rows.shape[0] == 0:
        raise ad.ContractError(f"{path}: no data rows")
    if rows.shape[0] < 2:
        raise ad.ContractError(f"{path}: a trajectory needs at least 2 rows")
    dt = float(rows[1, 0] - rows[0, 0])
    return Trajectory(dt, rows[:, 1:1 + n], rows[:, 1 + n:] if has_dx else None)


# ------------------------------------------------------------ checkpoints


def _mlp_dict(mlp: MLP) -> dict:
    return {
        "linear_output": mlp.linear_output,
        "weights": [w.data for w in mlp.weights],
        "biases": [b.data for b in mlp.biases],
    }


def _mlp_from(d: dict) -> MLP:
    return MLP(
        [Tensor(np.array(w, dtype=np.float64)) for w in d["weights"]],
        [Tensor(np.array(b, dtype=np.float64)) for b in d["biases"]],
        bool(d["linear_output"]),
    )


def save_checkpoint(model: HyperSINDy, path) -> None:
    cfg = model.config
    train_cfg = model.meta.get("train_config")
    doc = {
        "format": "hypersindy-checkpoint",
        "version": CHECKPOINT_VERSION,
        "library": asdict(cfg.library),
        "model": {k: v for k, v in asdict(cfg).items() if k != "library"},
        "normalizer": {
            "input_shift": model.norm.input_shift,
            "input_scale": model.norm.input_scale,
            "coef_scale": model.norm.coef_scale,
        },
        "encoder": _mlp_dict(model.encoder),
        "head_mu": _mlp_dict(model.head_mu),
        "head_logvar": _mlp_dict(model.head_logvar),
        "hypernet": _mlp_dict(model.hypernet),
        "log_alpha": model.mask.log_alpha.data,
        "permanent_zero": model.mask.permanent_zero,
        "train_config": asdict(train_cfg) if train_cfg is not None else None,
        "seed": train_cfg.seed if train_cfg is not None else None,
    }
    dump_json(doc, path)


def load_checkpoint(path) -> HyperSINDy:
    doc = load_json(path)
    if doc.get("format") != "hypersindy-checkpoint":
        raise ad.ContractError(f"{path}: not a checkpoint")
    library = LibrarySpec(**doc["library"])
    config = ModelConfig(library=library, **doc["model"])
    m = doc["model"]
    log_alpha = np.array(doc["log_alpha"], dtype=np.float64)
    keep = np.array(doc["permanent_zero"], dtype=np.float64)
    if log_alpha.shape != (library.term_count, library.state_dim) or keep.shape != log_alpha.shape:
        raise ad.DimensionError(f"{path}: mask shape does not match library {library}")
    norm = doc["normalizer"]
    model = HyperSINDy(
        config,
        _mlp_from(doc["encoder"]),
        _mlp_from(doc["head_mu"]),
        _mlp_from(doc["head_logvar"]),
        _mlp_from(doc["hypernet"]),
        SparseMask(Tensor(log_alpha), keep, m["beta_l0"], m["gamma"], m["zeta"]),
        Normalizer(
            np.array(norm["input_shift"], dtype=np.float64),
            np.array(norm["input_scale"], dtype=np.float64),
            np.array(norm["coef_scale"], dtype=np.float64),
        ),
    )
    if doc.get("train_config") is not None:
        model.meta["train_config"] = TrainConfig(**doc["train_config"])
    return model


# ---------------------------------------------------------------- history

HISTORY_COLUMNS = ("epoch", "recon", "kl", "l0", "beta", "lambda", "active_terms")


def write_history(history: TrainHistory, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HISTORY_COLUMNS)
        for r in history.records:
            w.writerow([r.epoch, _fmt(r.recon), _fmt(r.kl), _fmt(r.l0), _fmt(r.beta), _fmt(r.lam), r.active_terms])


def read_history(path) -> TrainHistory:
    from hypersindy.training import EpochRecord

    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != HISTORY_COLUMNS:
        raise ad.ContractError(f"{path}: not a history CSV")
    recs = [
        EpochRecord(int(r[0]), float(r[1]), float(r[2]), float(r[3]), float(r[4]), float(r[5]), int(r[6]))
        for r in rows[1:]
    ]
    return TrainHistory(recs)


# --------------------------------------------------------------- ensemble


def write_ensemble(ens: CoefficientEnsemble, library: LibrarySpec, path) -> None:
    n = library.state_dim
    names = term_names(library)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["term"] + [c for i in range(n) for c in (f"mean_x{i + 1}", f"std_x{i + 1}")])
        for k, name in enumerate(names):
            w.writerow([name] + [_fmt(v) for i in range(n) for v in (ens.mean[k, i], ens.std[k, i])])


def read_ensemble(path) -> tuple[list[str], np.ndarray, np.ndarray]:
    """Term names plus the ``(l, n)`` mean and std matrices."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][0] != "term":
        raise ad.ContractError(f"{path}: not an ensemble CSV")
    body = np.array([[float(v) for v in r[1:]] for r in rows[1:]], dtype=np.float64)
    return [r[0] for r in rows[1:]], body[:, 0::2], body[:, 1::2]


# ---------------------------------------------------------- Kramers-Moyal


def write_km(field: KmField, path) -> None:
    n = len(field.edges)
    header = [f"bin_center_{i + 1}" for i in range(n)] + ["count"]
    header += [f"drift_{i + 1}" for i in range(n)] + [f"diff_{i + 1}" for i in range(n)]
    ok = field.valid
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for c, k, d, s in zip(field.centers[ok], field.counts[ok], field.drift[ok], field.diffusion[ok]):
            w.writerow([_fmt(v) for v in c] + [int(k)] + [_fmt(v) for v in d] + [_fmt(v) for v in s])


def read_km(path) -> dict:
    """Columns of a K-M CSV as arrays: ``centers``, ``count``, ``drift``, ``diffusion``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or not rows[0][0].startswith("bin_center"):
        raise ad.ContractError(f"{path}: not a K-M CSV")
    n = sum(1 for h in rows[0] if h.startswith("bin_center"))
    body = np.array([[float(v) for v in r] for r in rows[1:]], dtype=np.float64).reshape(-1, 3 * n + 1)
    return {
        "centers": body[:, :n],
        "count": body[:, n].astype(np.int64),
        "drift": body[:, n + 1:2 * n + 1],
        "diffusion": body[:, 2 * n + 1:],
    }
