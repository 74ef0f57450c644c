"""Central finite-difference oracle shared by the gradient tests.

Relative error is measured against the largest finite-difference gradient
magnitude of the parameter (with a small floor), so saturated or dead
units do not blow up an otherwise exact check.
"""

import numpy as np

from hsdenoise import autodiff as ad

FD_STEP = 1e-5
REL_TOL = 1e-6


def fd_gradients(build, param, h=FD_STEP):
    """Finite-difference gradient of the scalar ``build()`` w.r.t. ``param``."""
    grad = np.zeros_like(param.value)
    flat = param.value.ravel()
    gflat = grad.ravel()
    for idx in range(flat.size):
        orig = flat[idx]
        flat[idx] = orig + h
        f_plus = float(build().value)
        flat[idx] = orig - h
        f_minus = float(build().value)
        flat[idx] = orig
        gflat[idx] = (f_plus - f_minus) / (2.0 * h)
    return grad


def max_rel_error(build, params):
    """Worst scale-relative gradient error over the given parameters."""
    out = build()
    ad.backward(out)
    worst = 0.0
    analytic = {id(p): np.array(p.grad) for p in params}
    for p in params:
        p.grad = None
    for p in params:
        g_fd = fd_gradients(build, p)
        scale = max(float(np.abs(g_fd).max()), 1e-6)
        err = float(np.abs(analytic[id(p)] - g_fd).max()) / scale
        worst = max(worst, err)
    return worst
