"""Legacy ASCII VTK output of deformed configurations.

Higher-order elements are written as their linear sub-cells through the
Lagrange nodes, so every node of the discretization is a VTK point.
"""

import numpy as np

from .kernel import gather, point_state, sum_per_element

VTK_VERTEX, VTK_LINE, VTK_QUAD = 1, 3, 9


def von_mises(sigma):
    """Von Mises stress of ``(..., d, d)`` Cauchy tensors (padded to 3 x 3)."""
    d = sigma.shape[-1]
    s = np.zeros(sigma.shape[:-2] + (3, 3))
    s[..., :d, :d] = sigma
    dev = s - np.trace(s, axis1=-2, axis2=-1)[..., None, None] * np.eye(3) / 3
    return np.sqrt(1.5 * np.sum(dev * dev, axis=(-2, -1)))


def cauchy_at_points(mat, batch, Ue):
    """Cauchy stress ``F S F^T / Lambda`` at the points of ``batch``."""
    F, _, S = point_state(mat, batch, Ue)
    d = F.shape[-1]
    M = batch.P @ np.swapaxes(F, 1, 2) @ F @ batch.P + np.eye(d) - batch.P
    Lam = np.sqrt(np.linalg.det(M))
    return F @ S @ np.swapaxes(F, 1, 2) / Lam[:, None, None]


def _pad3(A):
    A = np.atleast_2d(A)
    out = np.zeros((A.shape[0], 3))
    out[:, :A.shape[1]] = A
    return out


def linear_subcells(elements, q, p):
    """Split order-``p`` tensor elements into linear lines/quads over their nodes."""
    cells = []
    if q == 1:
        for k in range(p):
            cells.append(elements[:, [k, k + 1]])
        return np.concatenate(cells), VTK_LINE
    n = p + 1
    for j in range(p):
        for i in range(p):
            a = i + n * j
            cells.append(elements[:, [a, a + 1, a + 1 + n, a + n]])
    return np.concatenate(cells), VTK_QUAD


def write_unstructured(path, points, blocks, point_data):
    """Write an unstructured grid with point fields.

    ``blocks`` is a list of ``(cells, vtk_type)`` with ``cells`` an integer
    array of shape ``(n_cells, nodes_per_cell)``; ``point_data`` maps a name
    to an ``(n,)`` scalar or ``(n, k)`` vector array.
    """
    points = _pad3(points)
    n_cells = sum(c.shape[0] for c, _ in blocks)
    size = sum(c.shape[0] * (c.shape[1] + 1) for c, _ in blocks)
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\ntdcfem deformed configuration\nASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {points.shape[0]} double\n")
        np.savetxt(fh, points, fmt="%.17g")
        fh.write(f"CELLS {n_cells} {size}\n")
        for c, _ in blocks:
            np.savetxt(fh, np.hstack([np.full((c.shape[0], 1), c.shape[1]), c]), fmt="%d")
        fh.write(f"CELL_TYPES {n_cells}\n")
        for c, t in blocks:
            np.savetxt(fh, np.full(c.shape[0], t), fmt="%d")
        _write_point_data(fh, points.shape[0], point_data)


def _write_point_data(fh, n, point_data):
    fh.write(f"POINT_DATA {n}\n")
    for name, arr in point_data.items():
        arr = np.asarray(arr, dtype=float)
        if arr.ndim == 1:
            fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            np.savetxt(fh, arr, fmt="%.17g")
        else:
            fh.write(f"VECTORS {name} double\n")
            np.savetxt(fh, _pad3(arr), fmt="%.17g")


def write_point_cloud(path, points, point_data):
    """Write points as a POLYDATA vertex cloud with point fields."""
    points = _pad3(points)
    n = points.shape[0]
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\ntdcfem point cloud\nASCII\nDATASET POLYDATA\n")
        fh.write(f"POINTS {n} double\n")
        np.savetxt(fh, points, fmt="%.17g")
        fh.write(f"VERTICES {n} {2 * n}\n")
        np.savetxt(fh, np.column_stack([np.ones(n, int), np.arange(n)]), fmt="%d")
        _write_point_data(fh, n, point_data)


def write_surface_result(path, model, u):
    """Deformed Surface FEM mesh with nodal displacement and von Mises stress.

    The nodal stress is the average over adjacent elements of the
    element-mean stress at the integration points.
    """
    U = u.reshape(-1, model.d)
    vm_sum = np.zeros(model.n_nodes)
    count = np.zeros(model.n_nodes)
    blocks = []
    for pt, conn, b in zip(model.parts, model.conns, model.batches):
        Ue = gather(conn, b.elem, U)
        vm = von_mises(cauchy_at_points(pt.mat, b, Ue))
        per_elem = sum_per_element(b.elem, vm * b.w, conn.shape[0]) / sum_per_element(b.elem, b.w, conn.shape[0])
        np.add.at(vm_sum, conn, per_elem[:, None].repeat(conn.shape[1], 1))
        np.add.at(count, conn, 1.0)
        blocks.append(linear_subcells(conn, pt.mesh.q, pt.mesh.p))
    vm_nodes = vm_sum / np.maximum(count, 1)
    write_unstructured(path, model.nodes + U, blocks, {"displacement": U, "von_mises": vm_nodes})


def write_trace_result(path, model, u):
    """Deformed Trace FEM integration points with displacement and von Mises stress."""
    U = u.reshape(-1, model.d)
    b = model.batch
    Ue = gather(model.conn, b.elem, U)
    disp = np.einsum("ma,mai->mi", b.N, Ue)
    vm = von_mises(cauchy_at_points(model.mat, b, Ue))
    write_point_cloud(path, b.X + disp, {"displacement": disp, "von_mises": vm})


def write_result(path, model, u):
    if hasattr(model, "parts"):
        write_surface_result(path, model, u)
    else:
        write_trace_result(path, model, u)
