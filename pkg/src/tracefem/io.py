"""Output writers: legacy ASCII VTK surface snapshots, CSV diagnostics and
the snapshot manifest.

Every triangle of ``Gamma_h`` is written with its own three points (no
vertex sharing), so the point count is three times the triangle count.
Floats are printed with 17 significant digits, which makes files
bit-reproducible and lossless to re-read.
"""
import csv
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np

from .fespace import TraceSpaces, p1_shape, p2_shape, barycentric
from .observables import CSV_COLUMNS, DiagnosticsRecord


class VTKFormatError(ValueError):
    pass


def _fmt(a):
    return "\n".join(" ".join(f"{v:.17g}" for v in row) for row in np.atleast_2d(a))


def _atomic_write(path, text):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def surface_traces(spaces: TraceSpaces, c=None, mu=None, p=None, u=None):
    """Evaluate discrete fields at the vertices of every patch triangle."""
    surf = spaces.patches
    owner = surf.tri_owner
    pts = surf.tri_points  # (T, 3, 3)
    lam, grads = barycentric(spaces.coords[owner], pts)
    out = {}
    v1, _ = p1_shape(lam, grads)
    for name, vals in (("c", c), ("mu", mu), ("p", p)):
        if vals is not None:
            out[name] = np.einsum("tqk,tk->tq", v1, vals[spaces.p1.cell_nodes[owner]]).ravel()
    if u is not None:
        v2, _ = p2_shape(lam, grads)
        nodal = u.reshape(3, -1)[:, spaces.p2.cell_nodes[owner]]  # (3, T, 10)
        out["u"] = np.einsum("tqk,xtk->tqx", v2, nodal).reshape(-1, 3)
    return pts.reshape(-1, 3), out


def write_vtk_polydata(path, points, triangles, scalars=None, vectors=None, title="tracefem"):
    scalars = scalars or {}
    vectors = vectors or {}
    n = len(points)
    lines = ["# vtk DataFile Version 3.0", title.replace("\n", " ")[:255], "ASCII", "DATASET POLYDATA",
             f"POINTS {n} double", _fmt(points) if n else ""]
    lines.append(f"POLYGONS {len(triangles)} {4 * len(triangles)}")
    if len(triangles):
        lines.append("\n".join(f"3 {a} {b} {c}" for a, b, c in triangles))
    if scalars or vectors:
        lines.append(f"POINT_DATA {n}")
    for name, vals in scalars.items():
        lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default", _fmt(np.asarray(vals)[:, None])]
    for name, vals in vectors.items():
        lines += [f"VECTORS {name} double", _fmt(vals)]
    _atomic_write(path, "\n".join(line for line in lines if line != "") + "\n")


def write_vtk_surface(path, spaces: TraceSpaces, c=None, mu=None, p=None, u=None, title="tracefem"):
    """Snapshot of the discrete surface with P1 scalars and the P2 velocity."""
    points, traces = surface_traces(spaces, c, mu, p, u)
    tris = np.arange(len(points)).reshape(-1, 3)
    vec = {"u": traces.pop("u")} if "u" in traces else {}
    write_vtk_polydata(path, points, tris, traces, vec, title)


@dataclass
class VTKData:
    points: np.ndarray
    triangles: np.ndarray
    scalars: Dict[str, np.ndarray] = field(default_factory=dict)
    vectors: Dict[str, np.ndarray] = field(default_factory=dict)
    title: str = ""

    def triangle_areas(self):
        p = self.points[self.triangles]
        return 0.5 * np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)


def read_vtk_polydata(path) -> VTKData:
    """Parse the subset of legacy VTK written by :func:`write_vtk_polydata`."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if len(lines) < 4 or not lines[0].startswith("# vtk DataFile"):
        raise VTKFormatError("missing legacy VTK header")
    if lines[2].strip() != "ASCII" or lines[3].strip() != "DATASET POLYDATA":
        raise VTKFormatError("expected ASCII POLYDATA")
    tokens = " ".join(lines[4:]).split()
    pos = 0

    def take(k):
        nonlocal pos
        out = tokens[pos:pos + k]
        if len(out) < k:
            raise VTKFormatError("unexpected end of file")
        pos += k
        return out

    out = VTKData(np.zeros((0, 3)), np.zeros((0, 3), dtype=int), title=lines[1])
    npts = 0
    while pos < len(tokens):
        kw = take(1)[0]
        if kw == "POINTS":
            npts, _ = int(take(1)[0]), take(1)
            out.points = np.array(take(3 * npts), dtype=float).reshape(npts, 3)
        elif kw == "POLYGONS":
            ncell, size = int(take(1)[0]), int(take(1)[0])
            raw = np.array(take(size), dtype=int).reshape(ncell, 4) if ncell else np.zeros((0, 4), int)
            if ncell and np.any(raw[:, 0] != 3):
                raise VTKFormatError("only triangles are supported")
            out.triangles = raw[:, 1:]
            if out.triangles.size and out.triangles.max() >= npts:
                raise VTKFormatError("polygon references a missing point")
        elif kw == "POINT_DATA":
            if int(take(1)[0]) != npts:
                raise VTKFormatError("POINT_DATA count does not match POINTS")
        elif kw == "SCALARS":
            name, _, ncomp = take(3)
            if take(2) != ["LOOKUP_TABLE", "default"]:
                raise VTKFormatError("expected LOOKUP_TABLE default")
            out.scalars[name] = np.array(take(npts * int(ncomp)), dtype=float)
        elif kw == "VECTORS":
            name, _ = take(2)
            out.vectors[name] = np.array(take(3 * npts), dtype=float).reshape(npts, 3)
        else:
            raise VTKFormatError(f"unsupported keyword {kw!r}")
    return out


class DiagnosticsWriter:
    """CSV log with a ``# config_hash=...`` first line and fixed columns."""

    def __init__(self, path, config_hash):
        self.path = Path(path)
        self._fh = open(self.path, "w", encoding="utf-8", newline="")
        self._fh.write(f"# config_hash={config_hash}\n")
        self._w = csv.writer(self._fh, lineterminator="\n")
        self._w.writerow(CSV_COLUMNS)

    def write(self, rec: DiagnosticsRecord):
        self._w.writerow([repr(float(getattr(rec, k))) for k in CSV_COLUMNS])
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_diagnostics(path) -> Tuple[str, List[Dict[str, float]]]:
    """Return ``(config_hash, rows)`` from a diagnostics CSV."""
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().strip()
        if not first.startswith("# config_hash="):
            raise ValueError("missing config hash header")
        rows = [{k: float(v) for k, v in r.items()} for r in csv.DictReader(fh)]
    return first.split("=", 1)[1], rows


@dataclass
class SnapshotManifest:
    run_id: str
    config_hash: str
    entries: List[Tuple[float, str]] = field(default_factory=list)

    def add(self, t, filename):
        if any(f == filename for _, f in self.entries):
            raise ValueError(f"duplicate snapshot filename {filename}")
        self.entries.append((float(t), filename))

    def text(self):
        head = [f"run_id = {self.run_id}", f"config_hash = {self.config_hash}"]
        return "\n".join(head + [f"{t!r} {f}" for t, f in self.entries]) + "\n"

    def write(self, directory):
        _atomic_write(Path(directory) / "manifest.txt", self.text())


def read_manifest(path) -> SnapshotManifest:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    meta = dict(line.split(" = ", 1) for line in lines[:2])
    m = SnapshotManifest(meta["run_id"], meta["config_hash"])
    for line in lines[2:]:
        t, f = line.split(" ", 1)
        m.entries.append((float(t), f))
    return m


def snapshot_name(t):
    return f"snap_{t:.6f}.vtk"
