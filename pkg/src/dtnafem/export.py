"""Writers for convergence tables and legacy VTK snapshots."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .adapt import ConvergenceRecord
from .assembly import Solution
from .mesh import FLUID, SOLID

CSV_HEADER = "iter,dof,N,eps_h,eps_N,e_h,wall_ms"


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


def convergence_csv(record: ConvergenceRecord, timing: bool = False) -> str:
    """CSV text for a convergence history; ``wall_ms`` stays blank unless ``timing``."""
    lines = [CSV_HEADER]
    for r in record.iterations:
        wall = repr(round(1e3 * r.wall_time, 3)) if timing else ""
        lines.append(f"{r.iteration},{r.dof},{r.N},{_fmt(r.eps_h)},{_fmt(r.eps_N)},"
                     f"{_fmt(r.e_h)},{wall}")
    lines.append(f"# status={record.status}")
    return "\n".join(lines) + "\n"


def write_convergence_csv(record: ConvergenceRecord, path, timing: bool = False) -> None:
    Path(path).write_text(convergence_csv(record, timing), encoding="utf-8")


def read_convergence_csv(path):
    """Parse a convergence CSV into (rows as dicts, status)."""
    rows, status = [], None
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    keys = lines[0].split(",")
    for line in lines[1:]:
        if line.startswith("# status="):
            status = line.split("=", 1)[1]
            continue
        vals = line.split(",")
        rows.append({k: (float(v) if v else None) for k, v in zip(keys, vals)})
    return rows, status


def vertex_regions(mesh) -> np.ndarray:
    """0 for fluid-only, 1 for solid-only and 2 for interface vertices."""
    out = np.full(mesh.n_vertices, -1, dtype=int)
    out[mesh.region_vertices(FLUID)] = 0
    out[mesh.region_vertices(SOLID)] = 1
    out[mesh.interface_vertices] = 2
    return out


def write_vtk(solution: Solution, path) -> None:
    """Legacy ASCII VTK unstructured grid with nodal real/imaginary fields."""
    mesh = solution.mesh
    V, T = mesh.n_vertices, mesh.n_triangles
    out = ["# vtk DataFile Version 3.0", "coupled grating solution", "ASCII",
           "DATASET UNSTRUCTURED_GRID", f"POINTS {V} double"]
    out += [f"{x!r} {y!r} 0.0" for x, y in mesh.vertices.tolist()]
    out.append(f"CELLS {T} {4 * T}")
    out += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles.tolist()]
    out.append(f"CELL_TYPES {T}")
    out += ["5"] * T
    out.append(f"POINT_DATA {V}")
    fields = [("Re_p", solution.p.real), ("Im_p", solution.p.imag),
              ("Re_u1", solution.u[:, 0].real), ("Im_u1", solution.u[:, 0].imag),
              ("Re_u2", solution.u[:, 1].real), ("Im_u2", solution.u[:, 1].imag)]
    for name, values in fields:
        out += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        out += [repr(v) for v in values.tolist()]
    out += ["SCALARS region int 1", "LOOKUP_TABLE default"]
    out += [str(v) for v in vertex_regions(mesh).tolist()]
    Path(path).write_text("\n".join(out) + "\n", encoding="ascii")


def read_vtk_point_data(path) -> dict:
    """Minimal reader for the files produced by :func:`write_vtk`."""
    lines = Path(path).read_text(encoding="ascii").splitlines()
    if lines[0] != "# vtk DataFile Version 3.0":
        raise ValueError("not a legacy VTK 3.0 file")
    data = {}
    i = 0
    n = None
    while i < len(lines):
        parts = lines[i].split()
        if parts and parts[0] == "POINT_DATA":
            n = int(parts[1])
        elif parts and parts[0] == "SCALARS" and n is not None:
            dtype = float if parts[2] == "double" else int
            data[parts[1]] = np.array([dtype(v) for v in lines[i + 2:i + 2 + n]])
            i += 2 + n
            continue
        i += 1
    return data
