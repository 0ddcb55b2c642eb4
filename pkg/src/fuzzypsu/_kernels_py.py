"""Pure-Python twins of the compiled kernels in _kernels.pyx."""

from __future__ import annotations

import numpy as np

_M64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _M64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _M64
    return x ^ (x >> 31)


def peel_order(rows, n_cols: int):
    rows = np.asarray(rows, dtype=np.int64)
    lists = rows.tolist()
    count = [0] * n_cols
    xr = [0] * n_cols
    for i, row in enumerate(lists):
        for c in row:
            count[c] += 1
            xr[c] ^= i
    queue = [c for c in range(n_cols) if count[c] == 1]
    alive = [True] * len(lists)
    out_r, out_c = [], []
    head = 0
    while head < len(queue):
        c = queue[head]
        head += 1
        if count[c] != 1:
            continue
        r = xr[c]
        if not alive[r]:
            continue
        alive[r] = False
        out_r.append(r)
        out_c.append(c)
        for c2 in lists[r]:
            count[c2] -= 1
            xr[c2] ^= r
            if count[c2] == 1:
                queue.append(c2)
    return np.array(out_r, dtype=np.int64), np.array(out_c, dtype=np.int64)


def bucket_candidates(n_items: int, n_buckets: int, z: int, seed: int):
    zz = min(z, n_buckets)
    out = np.empty((n_items, zz), dtype=np.int64)
    for i in range(n_items):
        state = seed ^ ((i * 0xD1B54A32D192ED03) & _M64)
        ctr = 0
        got: list[int] = []
        while len(got) < zz:
            b = splitmix64((state + ctr) & _M64) % n_buckets
            ctr += 1
            if b not in got:
                got.append(b)
        out[i] = got
    return out
