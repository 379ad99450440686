"""Independent reference implementations used as test oracles.

Deliberately naive: whole-grid numpy arrays, ``np.roll`` streaming and an
explicit per-direction loop, sharing nothing with the compiled sweeps except
the stencil constants.
"""

from fractions import Fraction

import numpy as np

from lbmbench.d3q19 import C, OPP, W

# direct enumeration of the stencil, independent of the package's tables
AXIS = [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]
DIAG = [(a, b, 0) for a in (1, -1) for b in (1, -1)] + \
       [(a, 0, b) for a in (1, -1) for b in (1, -1)] + \
       [(0, a, b) for a in (1, -1) for b in (1, -1)]


def reference_weight(c):
    n = sum(abs(v) for v in c)
    return {0: Fraction(1, 3), 1: Fraction(1, 18), 2: Fraction(1, 36)}[n]


def ref_equilibrium(rho, u):
    rho = np.asarray(rho, dtype=float)
    u = np.asarray(u, dtype=float)
    out = np.empty(rho.shape + (19,))
    usq = np.sum(u * u, axis=-1)
    for i in range(19):
        cu = u @ C[i].astype(float)
        out[..., i] = W[i] * rho * (1 + 3 * cu + 4.5 * cu * cu - 1.5 * usq)
    return out


def ref_collide(f, omega_plus, omega_minus, g):
    """TRT collision written per direction, straight from the definition."""
    f = np.asarray(f, dtype=float)
    rho = f.sum(axis=-1)
    u = (f @ C.astype(float)) / rho[..., None]
    feq = ref_equilibrium(rho, u)
    out = np.empty_like(f)
    g = np.asarray(g, dtype=float)
    for i in range(19):
        o = OPP[i]
        fp, fm = 0.5 * (f[..., i] + f[..., o]), 0.5 * (f[..., i] - f[..., o])
        ep, em = 0.5 * (feq[..., i] + feq[..., o]), 0.5 * (feq[..., i] - feq[..., o])
        out[..., i] = (f[..., i] - omega_plus * (fp - ep) - omega_minus * (fm - em)
                       + 3 * W[i] * rho * (C[i] @ g))
    return out


def _collide_fluid(grid, fluid, p, g):
    post = grid.copy()
    post[fluid] = ref_collide(grid[fluid], p.omega_plus, p.omega_minus, g)
    return post


def step_full_way(grid, flags, p, g):
    """One step of the dense-array scheme: collide fluid, stream everything
    periodically, then swap opposite populations on solid nodes."""
    fluid = flags == 0
    post = _collide_fluid(grid, fluid, p, g)
    out = np.empty_like(post)
    for i in range(19):
        out[..., i] = np.roll(post[..., i], tuple(C[i]), axis=(0, 1, 2))
    solid = ~fluid
    out[solid] = out[solid][:, OPP]
    return out


def step_half_way(grid, flags, periodic, p, g):
    """One step of the fluid-only scheme: collide, stream to fluid neighbours;
    links into solid (or out of a non-periodic box) reflect in place."""
    fluid = flags == 0
    post = _collide_fluid(grid, fluid, p, g)
    dims = flags.shape
    out = np.zeros_like(post)
    idx = np.argwhere(fluid)
    for i in range(19):
        src = idx - C[i]
        inside = np.ones(len(idx), dtype=bool)
        for a in range(3):
            if periodic[a]:
                src[:, a] %= dims[a]
            else:
                inside &= (src[:, a] >= 0) & (src[:, a] < dims[a])
        clipped = np.clip(src, 0, np.array(dims) - 1)
        from_fluid = inside & fluid[tuple(clipped.T)]
        vals = np.where(from_fluid, post[tuple(clipped.T)][:, i], post[tuple(idx.T)][:, OPP[i]])
        out[tuple(idx.T) + (i,)] = vals
    return out


def run_reference(family, flags, periodic, start, p, g, steps):
    """``start`` is the (nx, ny, nz, 19) standard-convention state."""
    grid = start.copy()
    for _ in range(steps):
        if family == "full":
            grid = step_full_way(grid, flags, p, g)
        else:
            grid = step_half_way(grid, flags, periodic, p, g)
    return grid


def random_state(shape, seed, amplitude=1e-2):
    rng = np.random.default_rng(seed)
    rho = 1.0 + amplitude * rng.uniform(-1, 1, shape)
    u = 0.02 * rng.uniform(-1, 1, shape + (3,))
    f = ref_equilibrium(rho, u)
    return f * (1.0 + amplitude * rng.uniform(-1, 1, f.shape))


def enumerate_fluid_blocks(dims, b, s):
    n = 0
    for x in range(dims[0]):
        for y in range(dims[1]):
            for z in range(dims[2]):
                p = b + s
                if not (x % p >= s and y % p >= s and z % p >= s):
                    n += 1
    return n
