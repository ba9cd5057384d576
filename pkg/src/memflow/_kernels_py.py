"""Pure-numpy implementations of the per-step hot kernels.

Same signatures as the compiled extension `memflow._kernels`; whichever is
importable gets picked by `memflow.kernels`.
"""

import numpy as np

BACKEND = "python"


def convection_element_values(wx, wy, shape_vals, shape_grads, quad_w, area):
    """Skew-symmetrized convection element matrices for one scalar component.

    Computes C_e = 0.5*(A1 - A1^T) with
    A1[e,i,j] = integral over element e of (w . grad s_j) s_i,
    where w is the mini-element velocity with local coefficients (wx, wy).

    wx, wy: (nt, 4); shape_vals: (nq, 4); shape_grads: (nt, nq, 4, 2);
    quad_w: (nq,); area: (nt,). Returns (nt, 4, 4).
    """
    wq_x = np.einsum("ei,qi->eq", wx, shape_vals)
    wq_y = np.einsum("ei,qi->eq", wy, shape_vals)
    conv = wq_x[:, :, None] * shape_grads[:, :, :, 0] + wq_y[:, :, None] * shape_grads[:, :, :, 1]
    a1 = np.einsum("q,qi,eqj->eij", quad_w, shape_vals, conv)
    a1 *= (2.0 * area)[:, None, None]
    return 0.5 * (a1 - a1.transpose(0, 2, 1))


def scatter_accumulate(idx, vals, size):
    """Sum vals into a dense array of the given size at (repeating) indices."""
    return np.bincount(idx, weights=vals, minlength=size)
