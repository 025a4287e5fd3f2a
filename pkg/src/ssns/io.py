"""Binary field snapshots and CSV / JSON-lines helpers.

Snapshot layout (all little-endian):

    4 bytes   magic b"SSNS"
    u32       format version (1)
    u32       kind: 0 vector (P, T coefficients), 1 scalar
    u32       complex flag
    u32       radial order
    f64       map scale
    u32       dimension
    u32       lmax (vector) or channel degree l (scalar)
    u32       n_theta (vector) or 0
    f64       time (physical t, or nan for similarity fields)
    ...       row-major float64 data, real/imag interleaved when complex

Vector data has shape (2, lmax, nr); scalar data has shape (nr,).
"""
from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .fields import ScalarField, SimilarityGrid, VectorField
from .grid import RadialGrid

MAGIC = b"SSNS"
VERSION = 1
_HEAD = struct.Struct("<4sIIIIdIIId")


class SnapshotError(ValueError):
    pass


def write_snapshot(path, field, time: float = float("nan")) -> Path:
    path = Path(path)
    if isinstance(field, VectorField):
        g = field.grid
        rad, kind, extra, ext2 = g.radial, 0, g.lmax, g.n_theta or 0
        data = field.coeffs
    elif isinstance(field, ScalarField):
        rad, kind, extra, ext2 = field.grid, 1, field.l, 0
        data = field.values
    else:
        raise TypeError("expected a VectorField or ScalarField")
    cplx = int(np.iscomplexobj(data))
    head = _HEAD.pack(MAGIC, VERSION, kind, cplx, rad.order, rad.map_scale, rad.dim, extra, ext2, time)
    arr = np.ascontiguousarray(data, dtype=np.complex128 if cplx else np.float64)
    raw = arr.view(np.float64) if cplx else arr
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(raw.astype("<f8").tobytes())
    return path


def read_snapshot(path):
    """Returns (field, time)."""
    blob = Path(path).read_bytes()
    if len(blob) < _HEAD.size:
        raise SnapshotError("truncated header")
    magic, ver, kind, cplx, order, scale, dim, extra, ext2, time = _HEAD.unpack_from(blob)
    if magic != MAGIC:
        raise SnapshotError("bad magic")
    if ver != VERSION:
        raise SnapshotError(f"unsupported version {ver}")
    rad = RadialGrid(order, scale, dim)
    data = np.frombuffer(blob, dtype="<f8", offset=_HEAD.size).astype(np.float64)
    if cplx:
        data = data.view(np.complex128)
    if kind == 0:
        grid = SimilarityGrid(rad, extra, ext2 or None)
        shape = (2, grid.lmax, grid.nr)
        if data.size != np.prod(shape):
            raise SnapshotError("payload size does not match the grid")
        return VectorField(grid, data.reshape(shape).copy()), time
    if kind == 1:
        if data.size != rad.size:
            raise SnapshotError("payload size does not match the grid")
        return ScalarField(rad, data.copy(), extra), time
    raise SnapshotError(f"unknown kind {kind}")


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def append_jsonl(path, record: dict) -> None:
    with open(path, "a") as fh:
        fh.write(json.dumps(record, sort_keys=True) + "\n")


def read_jsonl(path):
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def save_profile(profile, path) -> list:
    """profile.ssns (the correction phi) plus a JSON sidecar with sigma and the datum."""
    path = Path(path)
    snap = write_snapshot(path.with_suffix(".ssns"), profile.phi)
    meta = {"sigma": profile.sigma, "datum": {"p": list(profile.datum.p), "t": list(profile.datum.t),
                                              "label": profile.datum.label},
            "residual_x_norm": float(profile.residual_x_norm), "farfield_slope": float(profile.farfield_slope),
            "converged": bool(profile.converged)}
    side = path.with_suffix(".json")
    side.write_text(json.dumps(meta, sort_keys=True, indent=1))
    return [snap, side]


def load_profile(path):
    from .datum import InitialDatum
    from .profile import Profile

    path = Path(path)
    phi, _ = read_snapshot(path.with_suffix(".ssns"))
    meta = json.loads(path.with_suffix(".json").read_text())
    d = meta["datum"]
    datum = InitialDatum(tuple(d["p"]), tuple(d["t"]), 1.0, d["label"])
    return Profile(meta["sigma"], datum, phi, meta["residual_x_norm"], meta["farfield_slope"], meta["converged"])


def save_trajectory(traj, directory, lam_block) -> list:
    """Fields, unstable basis and the 2x2 unstable block, indexed by traj.json."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for k, (t, f) in enumerate(zip(traj.times, traj.fields)):
        written.append(write_snapshot(directory / f"field_{k:04d}.ssns", f, float(t)))
    grid = traj.fields[0].grid
    for j, col in enumerate(traj.unstable_basis):
        written.append(write_snapshot(directory / f"basis_{j}.ssns", VectorField.from_flat(grid, col)))
    meta = {"sigma": traj.sigma, "beta": traj.beta, "seed_amplitude": traj.seed_amplitude, "method": traj.method,
            "contraction_ratio": traj.contraction_ratio, "iterations": traj.iterations,
            "times": [float(t) for t in traj.times], "lam_block": np.asarray(lam_block).tolist(),
            "count": len(traj.fields)}
    index = directory / "traj.json"
    index.write_text(json.dumps(meta, sort_keys=True, indent=1))
    return written + [index]


def load_trajectory(directory):
    """Returns (AncientTrajectory, V, Lam)."""
    from .ancient import AncientTrajectory

    directory = Path(directory)
    meta = json.loads((directory / "traj.json").read_text())
    fields = [read_snapshot(directory / f"field_{k:04d}.ssns")[0] for k in range(meta["count"])]
    basis = [read_snapshot(directory / f"basis_{j}.ssns")[0].flat for j in range(2)]
    traj = AncientTrajectory(meta["sigma"], np.array(meta["times"]), fields, meta["beta"], meta["seed_amplitude"],
                             tuple(basis), None, meta["method"], meta["contraction_ratio"], meta["iterations"])
    return traj, np.column_stack(basis), np.array(meta["lam_block"])


def load_datum(spec: str):
    """'swirl' or a JSON file {"p": [...], "t": [...], "label": ...} of Legendre amplitudes (l = 1, 2, ...)."""
    from .datum import DatumError, InitialDatum, swirl_datum

    if spec == "swirl":
        return swirl_datum()
    try:
        meta = json.loads(Path(spec).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DatumError(f"cannot read datum {spec!r}: {exc}") from None
    if not isinstance(meta, dict) or not ({"p", "t"} & set(meta)):
        raise DatumError(f"datum {spec!r} needs 'p' and/or 't' amplitude lists")
    return InitialDatum(tuple(float(v) for v in meta.get("p", ())), tuple(float(v) for v in meta.get("t", ())),
                        1.0, str(meta.get("label", Path(spec).stem)))
