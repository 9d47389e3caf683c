"""Pure numpy implementations of the voxel kernels.

Same signatures as the compiled ``_ckernels`` module; used when the extension
is unavailable or ``HFITENSOR_PURE_PYTHON`` is set.
"""
import numpy as np


def dipolar_slab(values, step, offset, periodic, cell, inv_cell, eps, cutoff, i0, i1):
    """Raw dipolar kernel sum over planes ``i0 <= i < i1`` of the first axis.

    Returns ``(sums, excluded)`` where ``sums`` holds the six independent
    components (xx, yy, zz, xy, xz, yz) of sum rho (3 r_i r_j - r^2 d_ij) / r^5
    and ``excluded`` the density summed over nodes with r <= eps.
    Voxel volume is applied by the caller.
    """
    n1, n2, n3 = values.shape
    j = np.arange(n2, dtype=float)
    k = np.arange(n3, dtype=float)
    base = (offset[None, None, :]
            + j[:, None, None] * step[1][None, None, :]
            + k[None, :, None] * step[2][None, None, :])
    sums = np.zeros(6)
    excluded = 0.0
    eps2 = eps * eps
    cut2 = cutoff * cutoff
    for i in range(i0, i1):
        d = base + i * step[0]
        if periodic:
            f = d @ inv_cell
            f -= np.round(f)
            d = f @ cell
        x, y, z = d[..., 0], d[..., 1], d[..., 2]
        r2 = x * x + y * y + z * z
        v = values[i]
        inner = r2 <= eps2
        excluded += float(v[inner].sum())
        keep = ~inner & (r2 <= cut2)
        if not keep.any():
            continue
        x, y, z, r2, v = x[keep], y[keep], z[keep], r2[keep], v[keep]
        w = v / (r2 * r2 * np.sqrt(r2))
        sums += np.array([
            np.sum(w * (3 * x * x - r2)),
            np.sum(w * (3 * y * y - r2)),
            np.sum(w * (3 * z * z - r2)),
            np.sum(w * 3 * x * y),
            np.sum(w * 3 * x * z),
            np.sum(w * 3 * y * z),
        ])
    return sums, excluded


def trilinear(values, u, periodic):
    """Trilinear interpolation at fractional index coordinates ``u`` (m, 3).

    Non-periodic callers must have checked ``0 <= u <= n - 1`` already.
    """
    n = np.array(values.shape)
    u = np.asarray(u, dtype=float)
    if periodic:
        u = np.mod(u, n)
        i0 = np.floor(u).astype(np.intp)
        t = u - i0
        i0 %= n
        i1 = (i0 + 1) % n
    else:
        i0 = np.minimum(np.floor(u).astype(np.intp), n - 2).clip(0)
        t = u - i0
        i1 = np.minimum(i0 + 1, n - 1)
    out = np.zeros(len(u))
    for cx in (0, 1):
        ix = i1[:, 0] if cx else i0[:, 0]
        wx = t[:, 0] if cx else 1 - t[:, 0]
        for cy in (0, 1):
            iy = i1[:, 1] if cy else i0[:, 1]
            wy = t[:, 1] if cy else 1 - t[:, 1]
            for cz in (0, 1):
                iz = i1[:, 2] if cz else i0[:, 2]
                wz = t[:, 2] if cz else 1 - t[:, 2]
                out += wx * wy * wz * values[ix, iy, iz]
    return out
