"""Compiled sweeps.  Every function processes one worker's partition.

PDF slot addressing is uniform across layouts: slot(node, d) = off[d] + node * stride
(AoS: off[d] = d, stride = 19; SoA: off[d] = start of direction d, stride = 1).
All sweeps call the same ``collide`` so kernels of one family agree bitwise.
"""

import numpy as np
from numba import njit

from .d3q19 import C, OPP as _OPP, W as _W

CX = C[:, 0].copy()
CY = C[:, 1].copy()
CZ = C[:, 2].copy()
OPP = _OPP.copy()
WT = _W.copy()

OP_PUSH = 0
OP_PULL = 1
OP_AA_EVEN = 2
OP_AA_ODD = 3

# No runtime reference counting: array arguments passed to the per-node
# helpers would otherwise cost several atomic operations per node.  Sweeps
# therefore allocate nothing; per-worker scratch comes from ``Scratch``.
_jit = dict(nogil=True, cache=True, _nrt=False)


@njit(inline="always", **_jit)
def _pair(qi, qo, cu, cg, wr, usq, omp, omm):
    """Relax the pair (i, opp(i)) given c_i.u, c_i.g and w_i * rho."""
    e_sym = wr * (1.0 + 4.5 * cu * cu - usq)
    e_asym = wr * 3.0 * cu
    sym = omp * (0.5 * (qi + qo) - e_sym)
    asym = omm * (0.5 * (qi - qo) - e_asym)
    force = 3.0 * wr * cg
    return qi - sym - asym + force, qo - sym + asym - force


@njit(inline="always", **_jit)
def collide(q, out, omp, omm, gx, gy, gz):
    """TRT collision of one node, unrolled over the 9 direction pairs.

    Every kernel calls this function, so the floating-point operation order
    (and hence the result) is identical across kernels.
    """
    # pairwise tree: exact (rho == 1) for the rest state
    axis = ((q[1] + q[2]) + (q[3] + q[4])) + (q[5] + q[6])
    diag = ((((q[7] + q[8]) + (q[9] + q[10])) + ((q[11] + q[12]) + (q[13] + q[14])))
            + ((q[15] + q[16]) + (q[17] + q[18])))
    rho = q[0] + (axis + diag)
    jx = (q[1] - q[2]) + (q[7] - q[8]) + (q[9] - q[10]) + (q[11] - q[12]) + (q[13] - q[14])
    jy = (q[3] - q[4]) + (q[7] - q[8]) + (q[10] - q[9]) + (q[15] - q[16]) + (q[17] - q[18])
    jz = (q[5] - q[6]) + (q[11] - q[12]) + (q[14] - q[13]) + (q[15] - q[16]) + (q[18] - q[17])
    ux = jx / rho
    uy = jy / rho
    uz = jz / rho
    usq = 1.5 * (ux * ux + uy * uy + uz * uz)
    w1 = rho * (1.0 / 18.0)
    w2 = rho * (1.0 / 36.0)
    out[0] = q[0] - omp * (q[0] - rho * (1.0 / 3.0) * (1.0 - usq))
    out[1], out[2] = _pair(q[1], q[2], ux, gx, w1, usq, omp, omm)
    out[3], out[4] = _pair(q[3], q[4], uy, gy, w1, usq, omp, omm)
    out[5], out[6] = _pair(q[5], q[6], uz, gz, w1, usq, omp, omm)
    out[7], out[8] = _pair(q[7], q[8], ux + uy, gx + gy, w2, usq, omp, omm)
    out[9], out[10] = _pair(q[9], q[10], ux - uy, gx - gy, w2, usq, omp, omm)
    out[11], out[12] = _pair(q[11], q[12], ux + uz, gx + gz, w2, usq, omp, omm)
    out[13], out[14] = _pair(q[13], q[14], ux - uz, gx - gz, w2, usq, omp, omm)
    out[15], out[16] = _pair(q[15], q[16], uy + uz, gy + gz, w2, usq, omp, omm)
    out[17], out[18] = _pair(q[17], q[18], uy - uz, gy - gz, w2, usq, omp, omm)


@njit(**_jit)
def collide_batch(f, out, omp, omm, gx, gy, gz):
    for n in range(f.shape[0]):
        collide(f[n], out[n], omp, omm, gx, gy, gz)


@njit(inline="always", **_jit)
def _wrap(v, n):
    if v < 0:
        return v + n
    if v >= n:
        return v - n
    return v


@njit(inline="always", **_jit)
def _shift(x, y, z, d, sign, nx, ny, nz):
    xn = _wrap(x + sign * CX[d], nx)
    yn = _wrap(y + sign * CY[d], ny)
    zn = _wrap(z + sign * CZ[d], nz)
    return (xn * ny + yn) * nz + zn


def node_deltas(ny, nz):
    """Node-id offset of each direction for nodes away from the box faces."""
    return (CX * ny + CY) * nz + CZ


class Scratch:
    """Per-worker temporaries of the compiled sweeps."""

    def __init__(self, width=4, strip=64):
        self.q = np.empty(19)
        self.out = np.empty(19)
        self.lanes_q = np.empty((width, 19))
        self.lanes_o = np.empty((width, 19))
        self.stage = np.empty((19, strip))
        self.index = np.empty(19, dtype=np.int64)


@njit(inline="always", **_jit)
def _nb(n, x, y, z, d, sign, nx, ny, nz, delta, interior):
    if interior:
        return n + sign * delta[d]
    return _shift(x, y, z, d, sign, nx, ny, nz)


@njit(inline="always", **_jit)
def _interior(x, y, z, nx, ny, nz):
    return 0 < x < nx - 1 and 0 < y < ny - 1 and 0 < z < nz - 1


@njit(inline="always", **_jit)
def push_node(a, b, solid, n, x, y, z, nx, ny, nz, off, stride, delta, q, out, omp, omm, gx, gy, gz):
    inner = _interior(x, y, z, nx, ny, nz)
    for d in range(19):
        q[d] = a[off[d] + n * stride]
    if solid[n]:
        for d in range(19):
            out[d] = q[d]
    else:
        collide(q, out, omp, omm, gx, gy, gz)
    for d in range(19):
        b[off[d] + _nb(n, x, y, z, d, 1, nx, ny, nz, delta, inner) * stride] = out[d]


@njit(inline="always", **_jit)
def pull_node(a, b, solid, n, x, y, z, nx, ny, nz, off, stride, delta, q, out, omp, omm, gx, gy, gz):
    inner = _interior(x, y, z, nx, ny, nz)
    for d in range(19):
        q[d] = a[off[d] + _nb(n, x, y, z, d, -1, nx, ny, nz, delta, inner) * stride]
    if solid[n]:
        for d in range(19):
            out[d] = q[d]
    else:
        collide(q, out, omp, omm, gx, gy, gz)
    for d in range(19):
        b[off[d] + n * stride] = out[d]


@njit(inline="always", **_jit)
def aa_even_node(a, b, solid, n, x, y, z, nx, ny, nz, off, stride, delta, q, out, omp, omm, gx, gy, gz):
    """In place: collide and store into the opposite slots (``b`` unused)."""
    for d in range(19):
        q[d] = a[off[d] + n * stride]
    if solid[n]:
        for d in range(19):
            out[d] = q[d]
    else:
        collide(q, out, omp, omm, gx, gy, gz)
    for d in range(19):
        a[off[OPP[d]] + n * stride] = out[d]


@njit(inline="always", **_jit)
def aa_odd_node(a, b, solid, n, x, y, z, nx, ny, nz, off, stride, delta, q, out, omp, omm, gx, gy, gz):
    """In place: gather slot opp(d) at x - c_d, scatter slot d to x + c_d."""
    inner = _interior(x, y, z, nx, ny, nz)
    for d in range(19):
        q[d] = a[off[OPP[d]] + _nb(n, x, y, z, d, -1, nx, ny, nz, delta, inner) * stride]
    if solid[n]:
        for d in range(19):
            out[d] = q[OPP[d]]
    else:
        collide(q, out, omp, omm, gx, gy, gz)
    for d in range(19):
        a[off[d] + _nb(n, x, y, z, d, 1, nx, ny, nz, delta, inner) * stride] = out[d]


# indexed by OP_* so callers pick the node update without a per-node branch
NODE_UPDATES = (push_node, pull_node, aa_even_node, aa_odd_node)


@njit(**_jit)
def full_sweep_range(node, a, b, solid, nx, ny, nz, off, stride, delta, n0, n1, q, out, omp, omm, gx, gy, gz):
    """Collapsed (x, y, z) iteration over node ids ``[n0, n1)``."""
    x = n0 // (ny * nz)
    y = (n0 // nz) % ny
    z = n0 % nz
    for n in range(n0, n1):
        node(a, b, solid, n, x, y, z, nx, ny, nz, off, stride, delta, q, out, omp, omm, gx, gy, gz)
        z += 1
        if z == nz:
            z = 0
            y += 1
            if y == ny:
                y = 0
                x += 1


@njit(**_jit)
def full_sweep_blocked(node, a, b, solid, nx, ny, nz, off, stride, delta, x0, x1, blk, q, out,
                       omp, omm, gx, gy, gz):
    """Slab ``x0 <= x < x1`` traversed in ``blk``-cubed tiles."""
    for bx in range(x0, x1, blk):
        ex = min(bx + blk, x1)
        for by in range(0, ny, blk):
            ey = min(by + blk, ny)
            for bz in range(0, nz, blk):
                ez = min(bz + blk, nz)
                for x in range(bx, ex):
                    for y in range(by, ey):
                        for z in range(bz, ez):
                            n = (x * ny + y) * nz + z
                            node(a, b, solid, n, x, y, z, nx, ny, nz, off, stride, delta, q, out,
                                 omp, omm, gx, gy, gz)


@njit(**_jit)
def full_aa_vec(odd, f, solid, nx, ny, nz, off, delta, x0, x1, width, q, out, lanes_q, lanes_o, base,
                omp, omm, gx, gy, gz):
    """AA sweep over the slab ``[x0, x1)`` with z-lines cut into ``width``-lane
    chunks; chunks whose neighbours wrap in z fall back to the scalar node."""
    for x in range(x0, x1):
        for y in range(ny):
            line = (x * ny + y) * nz
            z0 = 0
            while z0 < nz:
                full = z0 + width <= nz
                if odd:
                    full = full and z0 >= 1 and z0 + width <= nz - 1
                if not full:
                    n = line + z0
                    if odd:
                        aa_odd_node(f, f, solid, n, x, y, z0, nx, ny, nz, off, 1, delta, q, out, omp, omm, gx, gy, gz)
                    else:
                        aa_even_node(f, f, solid, n, x, y, z0, nx, ny, nz, off, 1, delta, q, out, omp, omm, gx, gy, gz)
                    z0 += 1
                    continue
                if odd:
                    for d in range(19):
                        base[d] = off[OPP[d]] + _shift(x, y, z0, d, -1, nx, ny, nz)
                    for d in range(19):
                        for l in range(width):
                            lanes_q[l, d] = f[base[d] + l]
                else:
                    for d in range(19):
                        for l in range(width):
                            lanes_q[l, d] = f[off[d] + line + z0 + l]
                for l in range(width):
                    if solid[line + z0 + l]:
                        for d in range(19):
                            lanes_o[l, d] = lanes_q[l, OPP[d]] if odd else lanes_q[l, d]
                    else:
                        collide(lanes_q[l], lanes_o[l], omp, omm, gx, gy, gz)
                if odd:
                    for d in range(19):
                        base[d] = off[d] + _shift(x, y, z0, d, 1, nx, ny, nz)
                    for d in range(19):
                        for l in range(width):
                            f[base[d] + l] = lanes_o[l, d]
                else:
                    for d in range(19):
                        for l in range(width):
                            f[off[OPP[d]] + line + z0 + l] = lanes_o[l, d]
                z0 += width


@njit(**_jit)
def full_correction(f, solid_nodes, off, stride, i0, i1):
    for k in range(i0, i1):
        n = solid_nodes[k]
        for i in range(1, 19, 2):
            a = off[i] + n * stride
            b = off[i + 1] + n * stride
            t = f[a]
            f[a] = f[b]
            f[b] = t


# --- list (fluid-only) sweeps ----------------------------------------------

@njit(**_jit)
def list_push(src, dst, adj, off, stride, n0, n1, q, out, omp, omm, gx, gy, gz):
    for n in range(n0, n1):
        for d in range(19):
            q[d] = src[off[d] + n * stride]
        collide(q, out, omp, omm, gx, gy, gz)
        dst[off[0] + n * stride] = out[0]
        for d in range(1, 19):
            dst[adj[n, d - 1]] = out[d]


@njit(**_jit)
def list_pull(src, dst, adj, off, stride, n0, n1, q, out, omp, omm, gx, gy, gz):
    for n in range(n0, n1):
        q[0] = src[off[0] + n * stride]
        for d in range(1, 19):
            q[d] = src[adj[n, d - 1]]
        collide(q, out, omp, omm, gx, gy, gz)
        for d in range(19):
            dst[off[d] + n * stride] = out[d]


@njit(**_jit)
def list_pull_split(src, dst, adj, off, n0, n1, strip, streams, q, out, stage, omp, omm, gx, gy, gz):
    """Strip-mined pull: collide a strip into a staging buffer, then write it
    back with ``streams`` concurrent store streams (SoA only)."""
    for s0 in range(n0, n1, strip):
        m = min(strip, n1 - s0)
        for k in range(m):
            n = s0 + k
            q[0] = src[off[0] + n]
            for d in range(1, 19):
                q[d] = src[adj[n, d - 1]]
            collide(q, out, omp, omm, gx, gy, gz)
            for d in range(19):
                stage[d, k] = out[d]
        if streams == 1:
            for d in range(19):
                base = off[d] + s0
                for k in range(m):
                    dst[base + k] = stage[d, k]
        else:
            for d in range(0, 19, 2):
                if d + 1 < 19:
                    b0 = off[d] + s0
                    b1 = off[d + 1] + s0
                    for k in range(m):
                        dst[b0 + k] = stage[d, k]
                        dst[b1 + k] = stage[d + 1, k]
                else:
                    b0 = off[d] + s0
                    for k in range(m):
                        dst[b0 + k] = stage[d, k]


@njit(**_jit)
def list_aa_even(f, off, stride, n0, n1, q, out, omp, omm, gx, gy, gz):
    for n in range(n0, n1):
        for d in range(19):
            q[d] = f[off[d] + n * stride]
        collide(q, out, omp, omm, gx, gy, gz)
        for d in range(19):
            f[off[OPP[d]] + n * stride] = out[d]


@njit(**_jit)
def list_aa_even_vec(f, off, n0, n1, width, q, out, lanes_q, lanes_o, omp, omm, gx, gy, gz):
    """Even AA step in ``width``-node chunks (SoA, unit stride)."""
    n = n0
    while n + width <= n1:
        for d in range(19):
            for l in range(width):
                lanes_q[l, d] = f[off[d] + n + l]
        for l in range(width):
            collide(lanes_q[l], lanes_o[l], omp, omm, gx, gy, gz)
        for d in range(19):
            for l in range(width):
                f[off[OPP[d]] + n + l] = lanes_o[l, d]
        n += width
    for m in range(n, n1):
        for d in range(19):
            q[d] = f[off[d] + m]
        collide(q, out, omp, omm, gx, gy, gz)
        for d in range(19):
            f[off[OPP[d]] + m] = out[d]


@njit(**_jit)
def list_aa_odd(f, adj, off, stride, n0, n1, q, out, omp, omm, gx, gy, gz):
    """Odd AA step using the SCATTER adjacency for both gather and scatter."""
    for n in range(n0, n1):
        q[0] = f[off[0] + n * stride]
        for d in range(1, 19):
            q[d] = f[adj[n, OPP[d] - 1]]
        collide(q, out, omp, omm, gx, gy, gz)
        f[off[0] + n * stride] = out[0]
        for d in range(1, 19):
            f[adj[n, d - 1]] = out[d]


@njit(**_jit)
def list_aa_odd_ria(f, run_start, run_len, run_pat, off0, r0, r1, q, out, pat, omp, omm, gx, gy, gz):
    """Odd AA step over runs ``[r0, r1)``; adjacency resolved once per run."""
    for r in range(r0, r1):
        pat[0] = off0
        for d in range(1, 19):
            pat[d] = run_pat[r, d - 1]
        s = run_start[r]
        for n in range(s, s + run_len[r]):
            for d in range(19):
                q[d] = f[n + pat[OPP[d]]]
            collide(q, out, omp, omm, gx, gy, gz)
            for d in range(19):
                f[n + pat[d]] = out[d]


@njit(**_jit)
def list_aa_odd_pv(f, run_start, run_len, run_pat, off0, r0, r1, width, q, out, lanes_q, lanes_o, pat,
                   omp, omm, gx, gy, gz):
    """RIA odd step with each run cut into ``width``-lane chunks plus a scalar
    remainder.  Returns the number of nodes handled in full chunks."""
    chunked = 0
    for r in range(r0, r1):
        pat[0] = off0
        for d in range(1, 19):
            pat[d] = run_pat[r, d - 1]
        s = run_start[r]
        e = s + run_len[r]
        n = s
        while n + width <= e:
            for d in range(19):
                src = n + pat[OPP[d]]
                for l in range(width):
                    lanes_q[l, d] = f[src + l]
            for l in range(width):
                collide(lanes_q[l], lanes_o[l], omp, omm, gx, gy, gz)
            for d in range(19):
                dst = n + pat[d]
                for l in range(width):
                    f[dst + l] = lanes_o[l, d]
            n += width
            chunked += width
        for m in range(n, e):
            for d in range(19):
                q[d] = f[m + pat[OPP[d]]]
            collide(q, out, omp, omm, gx, gy, gz)
            for d in range(19):
                f[m + pat[d]] = out[d]
    return chunked


# --- list construction helpers --------------------------------------------

@njit(**_jit)
def build_adjacency(node_coords, node_of_cell, nx, ny, nz, px, py, pz, off, stride, scatter, adj, n0, n1):
    """Fill ``adj[n, d-1]`` for nodes ``[n0, n1)``.

    SCATTER: slot(nb(n, +c_d), d) if fluid else slot(n, opp d).
    GATHER:  slot(nb(n, -c_d), d) if fluid else slot(n, opp d).
    ``node_of_cell`` maps a flat cell id to its list index or -1 (solid).
    """
    sign = 1 if scatter else -1
    for n in range(n0, n1):
        x = node_coords[n, 0]
        y = node_coords[n, 1]
        z = node_coords[n, 2]
        for d in range(1, 19):
            xn = x + sign * CX[d]
            yn = y + sign * CY[d]
            zn = z + sign * CZ[d]
            m = -1
            inside = True
            if xn < 0 or xn >= nx:
                if px:
                    xn = _wrap(xn, nx)
                else:
                    inside = False
            if yn < 0 or yn >= ny:
                if py:
                    yn = _wrap(yn, ny)
                else:
                    inside = False
            if zn < 0 or zn >= nz:
                if pz:
                    zn = _wrap(zn, nz)
                else:
                    inside = False
            if inside:
                m = node_of_cell[(xn * ny + yn) * nz + zn]
            if m >= 0:
                adj[n, d - 1] = off[d] + m * stride
            else:
                adj[n, d - 1] = off[OPP[d]] + n * stride


@njit(**_jit)
def ria_runs(adj, stride, starts, lengths):
    """Maximal runs of consecutive nodes whose relative adjacency offsets
    ``adj[n, :] - n * stride`` coincide.  Returns the run count."""
    n = adj.shape[0]
    k = adj.shape[1]
    if n == 0:
        return 0
    r = 0
    starts[0] = 0
    length = 1
    for i in range(1, n):
        same = True
        for j in range(k):
            if adj[i, j] - adj[i - 1, j] != stride:
                same = False
                break
        if same:
            length += 1
        else:
            lengths[r] = length
            r += 1
            starts[r] = i
            length = 1
    lengths[r] = length
    return r + 1


@njit(**_jit)
def fill_range(a, off, stride, n0, n1, values):
    for n in range(n0, n1):
        for d in range(19):
            a[off[d] + n * stride] = values[d]


# --- bandwidth micro-benchmarks --------------------------------------------

@njit(**_jit)
def mb_copy(a, b, i0, i1):
    for i in range(i0, i1):
        b[i] = a[i]


@njit(**_jit)
def mb_copy19(a, b, i0, i1, block):
    for s in range(i0, i1, block):
        e = min(s + block, i1)
        for k in range(19):
            for i in range(s, e):
                b[k, i] = a[k, i]


@njit(**_jit)
def mb_copy19_strip(a, b, i0, i1, strip, stage):
    """Load a strip of all 19 arrays into ``stage``, write it back one array at a
    time (a single store stream)."""
    for s in range(i0, i1, strip):
        m = min(strip, i1 - s)
        for k in range(19):
            for i in range(m):
                stage[k, i] = a[k, s + i]
        for k in range(19):
            for i in range(m):
                b[k, s + i] = stage[k, i]


@njit(**_jit)
def mb_update19(a, i0, i1, block, scale):
    for s in range(i0, i1, block):
        e = min(s + block, i1)
        for k in range(19):
            for i in range(s, e):
                a[k, i] = a[k, i] * scale
