"""Tensor-product Lagrange shape functions on equally spaced reference nodes.

The reference element is ``[-1, 1]**q``.  Local node numbering is
lexicographic with the first reference coordinate running fastest, so for
``q = 2`` and order ``p`` node ``a = i + (p + 1) * j`` sits at
``(xi_i, xi_j)``.
"""

from functools import lru_cache

import numpy as np


def reference_nodes_1d(p):
    """Equally spaced nodes on [-1, 1] for order ``p``."""
    if p < 1:
        raise ValueError(f"element order must be >= 1, got {p}")
    return np.linspace(-1.0, 1.0, p + 1)


@lru_cache(maxsize=None)
def _monomial_coefficients(p):
    # column k holds the monomial coefficients of the k-th Lagrange polynomial
    x = reference_nodes_1d(p)
    V = np.vander(x, p + 1, increasing=True)
    return np.linalg.solve(V, np.eye(p + 1))


@lru_cache(maxsize=None)
def _derivative_coefficients(p, k):
    # monomial coefficients of the k-th derivatives, padded to p + 1 rows
    C = _monomial_coefficients(p)
    for _ in range(k):
        C = np.vstack([C[1:] * np.arange(1, C.shape[0])[:, None], np.zeros((1, p + 1))])
    return C


def lagrange_1d(p, x, nderiv=0):
    """Values (and derivatives) of the ``p + 1`` Lagrange polynomials.

    Returns a list ``[L, dL, d2L, ...]`` of arrays with shape
    ``x.shape + (p + 1,)``, truncated to ``nderiv + 1`` entries.
    """
    x = np.asarray(x, dtype=float)
    powers = x[..., None] ** np.arange(p + 1)
    return [powers @ _derivative_coefficients(p, k) for k in range(nderiv + 1)]


def node_count(q, p):
    return (p + 1) ** q


def reference_element_nodes(q, p):
    """Reference coordinates of the element nodes, shape ``(n_nodes, q)``."""
    x = reference_nodes_1d(p)
    grids = np.meshgrid(*([x] * q), indexing="ij")
    # lexicographic with first coordinate fastest
    return np.stack([g.transpose(tuple(reversed(range(q)))).ravel() for g in grids], axis=-1)


def shape_eval(q, p, xi, nderiv=2):
    """Evaluate tensor-product shape functions at reference points.

    Parameters
    ----------
    q : int
        Reference dimension (1, 2 or 3).
    p : int
        Polynomial order per direction.
    xi : array_like, shape (m, q)
        Reference points.
    nderiv : int
        Highest derivative order to return (0, 1 or 2).

    Returns
    -------
    N : ndarray, shape (m, n)
    dN : ndarray, shape (m, n, q)
        Only if ``nderiv >= 1``.
    d2N : ndarray, shape (m, n, q, q)
        Only if ``nderiv >= 2``.
    """
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    m = xi.shape[0]
    if xi.shape[1] != q:
        raise ValueError(f"expected reference points with {q} coordinates, got {xi.shape[1]}")
    per_axis = [lagrange_1d(p, xi[:, k], nderiv) for k in range(q)]
    n1 = p + 1

    def tensor(orders):
        # orders[k] = derivative order along axis k
        arr = per_axis[0][orders[0]]
        for k in range(1, q):
            arr = (per_axis[k][orders[k]][:, :, None] * arr[:, None, :]).reshape(m, -1)
        return arr

    zero = (0,) * q
    N = tensor(zero)
    result = [N]
    if nderiv >= 1:
        dN = np.empty((m, n1**q, q))
        for k in range(q):
            o = list(zero)
            o[k] = 1
            dN[:, :, k] = tensor(o)
        result.append(dN)
    if nderiv >= 2:
        d2N = np.empty((m, n1**q, q, q))
        for k in range(q):
            for l in range(k, q):
                o = list(zero)
                o[k] += 1
                o[l] += 1
                d2N[:, :, k, l] = tensor(o)
                d2N[:, :, l, k] = d2N[:, :, k, l]
        result.append(d2N)
    return result[0] if nderiv == 0 else tuple(result)
