"""Pure-Python twin of the compiled search kernel.

Same arithmetic in the same order as ``_kernel.pyx``; used when the extension
is unavailable or when ``HEDLUND_PURE_PYTHON`` is set.
"""

from __future__ import annotations

import heapq
import math

import numpy as np


def _heuristic(node, shape, origin, res, pot_lin, pot_tab, pot_target, loc_stride):
    m = len(shape)
    coord = [0] * m
    rem = node
    for d in range(m - 1, -1, -1):
        coord[d] = rem % shape[d]
        rem //= shape[d]
    local = 0
    glob = [origin[d] + coord[d] for d in range(m)]
    for d in range(m):
        local += (glob[d] % res) * loc_stride[d]
    best = 0.0
    for i in range(len(pot_lin)):
        phi = pot_tab[i][local]
        lin = pot_lin[i]
        for d in range(m):
            phi += lin[d] * float(glob[d])
        phi = pot_target[i] - phi
        if phi > best:
            best = phi
    return best


def search(shape, origin, res, offsets, wtable, sources, target, pot_lin, pot_tab, pot_target,
           bound=math.inf):
    shape = [int(s) for s in shape]
    origin = [int(o) for o in origin]
    res = int(res)
    m = len(shape)
    n = math.prod(shape)
    offs = [tuple(int(c) for c in o) for o in np.asarray(offsets)]
    wt = np.asarray(wtable).tolist()
    lin_pot = np.asarray(pot_lin).tolist()
    tab_pot = np.asarray(pot_tab).tolist()
    tgt_pot = np.asarray(pot_target).tolist()
    use_h = len(lin_pot) > 0

    stride = [1] * m
    loc_stride = [1] * m
    for d in range(m - 2, -1, -1):
        stride[d] = stride[d + 1] * shape[d + 1]
        loc_stride[d] = loc_stride[d + 1] * res
    lin_off = [sum(o[d] * stride[d] for d in range(m)) for o in offs]

    dist = [math.inf] * n
    pred = [-1] * n
    hval = [math.nan] * n
    heap: list[tuple[float, int]] = []
    settled = 0

    def h(node):
        if not use_h:
            return 0.0
        return _heuristic(node, shape, origin, res, lin_pot, tab_pot, tgt_pot, loc_stride)

    for u in (int(s) for s in sources):
        if dist[u] > 0.0:
            dist[u] = 0.0
            pred[u] = -1
            hval[u] = h(u)
            heapq.heappush(heap, (0.0 + hval[u], u))
    target = int(target)
    while heap:
        key, u = heapq.heappop(heap)
        du = dist[u]
        if key != du + hval[u]:
            continue
        if key > bound:
            break
        settled += 1
        if u == target:
            break
        coord = [0] * m
        rem = u
        for d in range(m - 1, -1, -1):
            coord[d] = rem % shape[d]
            rem //= shape[d]
        local = 0
        for d in range(m):
            local += ((origin[d] + coord[d]) % res) * loc_stride[d]
        wrow = wt[local]
        for k, o in enumerate(offs):
            inside = True
            for d in range(m):
                g = coord[d] + o[d]
                if g < 0 or g >= shape[d]:
                    inside = False
                    break
            if not inside:
                continue
            v = u + lin_off[k]
            nd = du + wrow[k]
            if nd < dist[v]:
                dist[v] = nd
                pred[v] = u
                if math.isnan(hval[v]):
                    hval[v] = h(v)
                heapq.heappush(heap, (nd + hval[v], v))
    return np.array(dist), np.array(pred, dtype=np.int64), settled
