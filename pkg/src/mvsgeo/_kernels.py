"""Hot per-pixel kernels, each in a numba @njit version and a vectorized
numpy twin.

The public names (``bilinear_remap``, ``fuse_reference_pass``,
``nn_bruteforce``) dispatch to one of the two at import time based on
mvsgeo._accel.USING_NUMBA.  Both versions of every kernel are importable
directly for benchmarking and cross-checking; they compute reductions in
the same order so results agree bitwise.
"""

import numpy as np

from ._accel import USING_NUMBA, njit

__all__ = ["bilinear_remap", "fuse_reference_pass", "nn_bruteforce", "USING_NUMBA"]


# ---------------------------------------------------------------------------
# bilinear remap
# ---------------------------------------------------------------------------
#
# Samples src at continuous (xs, ys).  A sample is valid only when the
# coordinate is inside [0, W-1] x [0, H-1] and all four corners of its
# bilinear cell are valid; out-of-bounds samples are invalidated, never
# clamped.  The cell index is clamped to W-2/H-2 so the exact border
# coordinate W-1 (H-1) falls in the last cell with fractional weight 1.
# The bounds test carries a 1e-9 guard: warping a view onto itself lands
# border pixels at W-1 plus float dust, which must not invalidate them.

_EDGE_EPS = 1e-9


@njit(cache=True, nogil=True)
def _bilinear_remap_numba(values, valid, xs, ys, coords_valid):
    hs, ws = values.shape
    h, w = xs.shape
    out = np.zeros((h, w), dtype=np.float64)
    out_valid = np.zeros((h, w), dtype=np.uint8)
    xmax = float(ws - 1)
    ymax = float(hs - 1)
    for i in range(h):
        for j in range(w):
            if not coords_valid[i, j]:
                continue
            x = xs[i, j]
            y = ys[i, j]
            if not (-_EDGE_EPS <= x <= xmax + _EDGE_EPS and -_EDGE_EPS <= y <= ymax + _EDGE_EPS):
                continue
            if x < 0.0:
                x = 0.0
            elif x > xmax:
                x = xmax
            if y < 0.0:
                y = 0.0
            elif y > ymax:
                y = ymax
            x0 = int(np.floor(x))
            y0 = int(np.floor(y))
            if x0 > ws - 2:
                x0 = ws - 2
            if x0 < 0:
                x0 = 0
            if y0 > hs - 2:
                y0 = hs - 2
            if y0 < 0:
                y0 = 0
            x1 = min(x0 + 1, ws - 1)
            y1 = min(y0 + 1, hs - 1)
            if not (valid[y0, x0] and valid[y0, x1] and valid[y1, x0] and valid[y1, x1]):
                continue
            fx = x - x0
            fy = y - y0
            top = values[y0, x0] * (1.0 - fx) + values[y0, x1] * fx
            bot = values[y1, x0] * (1.0 - fx) + values[y1, x1] * fx
            out[i, j] = top * (1.0 - fy) + bot * fy
            out_valid[i, j] = 1
    return out, out_valid


def _bilinear_remap_numpy(values, valid, xs, ys, coords_valid):
    hs, ws = values.shape
    in_bounds = (
        coords_valid.astype(bool)
        & (xs >= -_EDGE_EPS)
        & (xs <= ws - 1 + _EDGE_EPS)
        & (ys >= -_EDGE_EPS)
        & (ys <= hs - 1 + _EDGE_EPS)
    )
    xc = np.clip(np.where(in_bounds, xs, 0.0), 0.0, ws - 1)
    yc = np.clip(np.where(in_bounds, ys, 0.0), 0.0, hs - 1)
    x0 = np.clip(np.floor(xc).astype(np.int64), 0, max(ws - 2, 0))
    y0 = np.clip(np.floor(yc).astype(np.int64), 0, max(hs - 2, 0))
    x1 = np.minimum(x0 + 1, ws - 1)
    y1 = np.minimum(y0 + 1, hs - 1)
    corners_ok = valid[y0, x0] & valid[y0, x1] & valid[y1, x0] & valid[y1, x1]
    ok = in_bounds & corners_ok.astype(bool)
    fx = xc - x0
    fy = yc - y0
    top = values[y0, x0] * (1.0 - fx) + values[y0, x1] * fx
    bot = values[y1, x0] * (1.0 - fx) + values[y1, x1] * fx
    out = np.where(ok, top * (1.0 - fy) + bot * fy, 0.0)
    return out, ok.astype(np.uint8)


# ---------------------------------------------------------------------------
# fusion reference pass
# ---------------------------------------------------------------------------
#
# One reference view's fuse/consume decision.  disp and rdd hold the
# reprojection displacement (px) and relative depth difference per source
# view, np.inf where the check is impossible (invalid reprojection).
# Mode 0 (fusibile): a single threshold row, pixel fuses when the number
# of passing sources reaches min_consistent.  Mode 1 (dynamic): pixel
# fuses when some k >= min_consistent has count(table row k) >= k; the
# largest qualifying k selects the consistent set.  table rows beyond the
# end clamp to the last entry.
#
# Fused depth = mean (avg_mode 0) or median (avg_mode 1) over the
# reference depth plus the passing sources' reprojected depths.  Consumed
# marking writes into the global (V, H, W) array through src_idx/ref_idx.


@njit(cache=True, nogil=True)
def _fuse_pass_numba(ref_depth, ref_valid, conf, disp, rdd, dres, sx, sy,
                     consumed, ref_idx, src_idx, prob_threshold,
                     min_consistent, mode, table, avg_mode):
    n_src, h, w = disp.shape
    n_table = table.shape[0]
    fused_depth = np.zeros((h, w), dtype=np.float64)
    fused_mask = np.zeros((h, w), dtype=np.uint8)
    passing = np.zeros(n_src, dtype=np.uint8)
    buf = np.zeros(n_src + 1, dtype=np.float64)
    for i in range(h):
        for j in range(w):
            if consumed[ref_idx, i, j] or not ref_valid[i, j]:
                continue
            if not conf[i, j] > prob_threshold:
                continue
            ok = False
            if mode == 0:
                td = table[0, 0]
                tr = table[0, 1]
                count = 0
                for s in range(n_src):
                    if disp[s, i, j] < td and rdd[s, i, j] < tr:
                        passing[s] = 1
                        count += 1
                    else:
                        passing[s] = 0
                ok = count >= min_consistent
            else:
                kmax = max(n_table, min_consistent)
                chosen = -1
                for k in range(min_consistent, kmax + 1):
                    row = min(k, n_table) - 1
                    td = table[row, 0]
                    tr = table[row, 1]
                    count = 0
                    for s in range(n_src):
                        if disp[s, i, j] < td and rdd[s, i, j] < tr:
                            count += 1
                    if count >= k:
                        chosen = k
                if chosen > 0:
                    ok = True
                    row = min(chosen, n_table) - 1
                    td = table[row, 0]
                    tr = table[row, 1]
                    for s in range(n_src):
                        if disp[s, i, j] < td and rdd[s, i, j] < tr:
                            passing[s] = 1
                        else:
                            passing[s] = 0
            if not ok:
                continue
            n = 0
            for s in range(n_src):
                if passing[s]:
                    buf[n] = dres[s, i, j]
                    n += 1
            if avg_mode == 0:
                acc = 0.0
                for m in range(n):
                    acc += buf[m]
                fused = (ref_depth[i, j] + acc) / (n + 1)
            else:
                buf[n] = ref_depth[i, j]
                n += 1
                sub = np.sort(buf[:n])
                if n % 2 == 1:
                    fused = sub[n // 2]
                else:
                    fused = (sub[n // 2 - 1] + sub[n // 2]) / 2.0
            fused_depth[i, j] = fused
            fused_mask[i, j] = 1
            consumed[ref_idx, i, j] = 1
            for s in range(n_src):
                if passing[s] and sx[s, i, j] >= 0:
                    consumed[src_idx[s], sy[s, i, j], sx[s, i, j]] = 1
    return fused_depth, fused_mask


def _fuse_pass_numpy(ref_depth, ref_valid, conf, disp, rdd, dres, sx, sy,
                     consumed, ref_idx, src_idx, prob_threshold,
                     min_consistent, mode, table, avg_mode):
    n_src, h, w = disp.shape
    n_table = table.shape[0]
    eligible = (consumed[ref_idx] == 0) & ref_valid.astype(bool) & (conf > prob_threshold)
    if mode == 0:
        passing = (disp < table[0, 0]) & (rdd < table[0, 1])
        ok = passing.sum(axis=0) >= min_consistent
    else:
        kmax = max(n_table, min_consistent)
        passing = np.zeros((n_src, h, w), dtype=bool)
        ok = np.zeros((h, w), dtype=bool)
        chosen_written = np.zeros((h, w), dtype=bool)
        for k in range(kmax, min_consistent - 1, -1):
            row = min(k, n_table) - 1
            pass_k = (disp < table[row, 0]) & (rdd < table[row, 1])
            ok_k = pass_k.sum(axis=0) >= k
            take = ok_k & ~chosen_written
            passing[:, take] = pass_k[:, take]
            chosen_written |= take
            ok |= ok_k
    fuse = eligible & ok
    passing = passing & fuse[None, :, :]
    n = passing.sum(axis=0)
    if avg_mode == 0:
        acc = np.sum(np.where(passing, dres, 0.0), axis=0)
        fused = np.where(fuse, (ref_depth + acc) / np.maximum(n + 1, 1), 0.0)
    else:
        stack = np.concatenate([np.where(passing, dres, np.nan), ref_depth[None, :, :]], axis=0)
        with np.errstate(all="ignore"):
            med = np.nanmedian(stack, axis=0)
        fused = np.where(fuse, med, 0.0)
    fused_mask = fuse.astype(np.uint8)
    consumed[ref_idx][fuse] = 1
    for s in range(n_src):
        hit = passing[s] & (sx[s] >= 0)
        consumed[src_idx[s], sy[s][hit], sx[s][hit]] = 1
    return fused, fused_mask


# ---------------------------------------------------------------------------
# brute-force nearest neighbor
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def _nn_bruteforce_numba(queries, refs):
    n = queries.shape[0]
    m = refs.shape[0]
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        best = np.inf
        qx = queries[i, 0]
        qy = queries[i, 1]
        qz = queries[i, 2]
        for j in range(m):
            dx = qx - refs[j, 0]
            dy = qy - refs[j, 1]
            dz = qz - refs[j, 2]
            d2 = dx * dx + dy * dy + dz * dz
            if d2 < best:
                best = d2
        out[i] = np.sqrt(best)
    return out


def _nn_bruteforce_numpy(queries, refs, chunk=512):
    n = queries.shape[0]
    out = np.empty(n, dtype=np.float64)
    for start in range(0, n, chunk):
        q = queries[start:start + chunk]
        diff = q[:, None, :] - refs[None, :, :]
        d2 = (diff * diff).sum(axis=2)
        out[start:start + chunk] = np.sqrt(d2.min(axis=1))
    return out


if USING_NUMBA:
    bilinear_remap = _bilinear_remap_numba
    fuse_reference_pass = _fuse_pass_numba

    def nn_bruteforce(queries, refs):
        return _nn_bruteforce_numba(queries, refs)

else:
    bilinear_remap = _bilinear_remap_numpy
    fuse_reference_pass = _fuse_pass_numpy
    nn_bruteforce = _nn_bruteforce_numpy
