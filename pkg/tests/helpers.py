"""Independent oracles shared by the test modules."""

import itertools

import numpy as np

from grouptkg.tensor import Tape, backward, no_grad


def numeric_grad(f, tensors, step=1e-5):
    """Central finite differences of scalar ``f()`` w.r.t. each tensor's data."""
    out = []
    for t in tensors:
        g = np.zeros_like(t.data)
        flat = t.data.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + step
            with no_grad():
                hi = float(f().data)
            flat[i] = old - step
            with no_grad():
                lo = float(f().data)
            flat[i] = old
            gflat[i] = (hi - lo) / (2 * step)
        out.append(g)
    return out


def analytic_grad(f, tensors):
    with Tape() as tape:
        loss = f()
    return backward(tape, loss, tensors)


def rel_error(a, n, floor=1e-8):
    """Max-norm error relative to the larger of the two gradients' max norms."""
    scale = max(np.abs(a).max(initial=0.0), np.abs(n).max(initial=0.0), floor)
    return float(np.abs(a - n).max(initial=0.0) / scale)


def check_grads(f, tensors, tol=1e-4):
    errs = [rel_error(a, n) for a, n in zip(analytic_grad(f, tensors), numeric_grad(f, tensors))]
    assert max(errs) < tol, errs
    return errs


def simplex_projection_oracle(z):
    """Exhaustive search over supports for argmin ||p - z||^2 on the simplex."""
    z = np.asarray(z, dtype=np.float64)
    m = len(z)
    best, best_cost = None, np.inf
    for size in range(1, m + 1):
        for support in itertools.combinations(range(m), size):
            s = list(support)
            tau = (z[s].sum() - 1.0) / size
            p = np.zeros(m)
            p[s] = z[s] - tau
            if (p[s] < 0).any():
                continue
            cost = ((p - z) ** 2).sum()
            if cost < best_cost:
                best, best_cost = p, cost
    return best


def sort_scan_rank(scores, q, exclude=()):
    """Position of ``q`` after sorting by score with ``q`` placed last among ties."""
    cands = [j for j in range(len(scores)) if j == q or j not in exclude]
    order = sorted(cands, key=lambda j: (-scores[j], j == q))
    return order.index(q) + 1
