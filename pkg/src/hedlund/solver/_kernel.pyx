# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
# distutils: language = c++
"""Compiled label-setting search on an implicit periodic lattice.

Mirrors ``_kernel_py.search`` operation for operation, so both backends return
bit-identical distances and predecessors.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY, isnan
from libcpp.pair cimport pair
from libcpp.queue cimport priority_queue

cnp.import_array()

ctypedef pair[double, long long] entry


cdef inline long long floordiv(long long a, long long b) nogil:
    cdef long long q = a // b
    if (a % b != 0) and ((a < 0) != (b < 0)):
        q -= 1
    return q


cdef inline double heuristic(long long node, const long long[::1] shape, const long long[::1] origin,
                             long long res, const double[:, ::1] pot_lin,
                             const double[:, ::1] pot_tab, const double[::1] pot_target,
                             const long long[::1] loc_stride, long long* coord) nogil:
    cdef Py_ssize_t m = shape.shape[0]
    cdef Py_ssize_t d, i
    cdef long long rem = node, g, q, local = 0
    cdef double best = 0.0, phi
    cdef Py_ssize_t npot = pot_lin.shape[0]
    for d in range(m - 1, -1, -1):
        coord[d] = rem % shape[d]
        rem = rem // shape[d]
    for d in range(m):
        g = origin[d] + coord[d]
        q = floordiv(g, res)
        local += (g - q * res) * loc_stride[d]
    for i in range(npot):
        phi = pot_tab[i, local]
        for d in range(m):
            phi += pot_lin[i, d] * <double>(origin[d] + coord[d])
        phi = pot_target[i] - phi
        if phi > best:
            best = phi
    return best


def search(long long[::1] shape, long long[::1] origin, long long res,
           const long long[:, ::1] offsets, const double[:, ::1] wtable,
           long long[::1] sources, long long target,
           const double[:, ::1] pot_lin, const double[:, ::1] pot_tab, const double[::1] pot_target,
           double bound=INFINITY):
    """Shortest paths from ``sources`` on the box lattice; stops when ``target`` settles.

    With a finite ``bound`` the search gives up once every open key exceeds it.

    Returns ``(dist, pred, settled)``; unreached nodes have ``inf`` distance and
    predecessor -1.
    """
    cdef Py_ssize_t m = shape.shape[0]
    cdef Py_ssize_t noff = offsets.shape[0]
    cdef long long n = 1
    cdef Py_ssize_t d
    for d in range(m):
        n *= shape[d]

    dist_arr = np.full(n, np.inf)
    pred_arr = np.full(n, -1, dtype=np.int64)
    hval_arr = np.full(n, np.nan)
    cdef double[::1] dist = dist_arr
    cdef long long[::1] pred = pred_arr
    cdef double[::1] hval = hval_arr

    stride_arr = np.ones(m, dtype=np.int64)
    loc_arr = np.ones(m, dtype=np.int64)
    for d in range(m - 2, -1, -1):
        stride_arr[d] = stride_arr[d + 1] * shape[d + 1]
        loc_arr[d] = loc_arr[d + 1] * res
    cdef long long[::1] stride = stride_arr
    cdef long long[::1] loc_stride = loc_arr
    lin_off_arr = np.asarray(offsets) @ stride_arr
    cdef long long[::1] lin_off = lin_off_arr

    coord_arr = np.zeros(m, dtype=np.int64)
    hcoord_arr = np.zeros(m, dtype=np.int64)
    cdef long long[::1] coordv = coord_arr
    cdef long long[::1] hcoordv = hcoord_arr
    cdef long long* coord = &coordv[0]
    cdef long long* hcoord = &hcoordv[0]

    cdef priority_queue[entry] heap
    cdef long long u, v, local, g, q, settled = 0
    cdef Py_ssize_t k, i
    cdef double du, nd, hv, key
    cdef bint inside
    cdef bint use_h = pot_lin.shape[0] > 0

    with nogil:
        for i in range(sources.shape[0]):
            u = sources[i]
            if dist[u] > 0.0:
                dist[u] = 0.0
                pred[u] = -1
                hv = 0.0
                if use_h:
                    hv = heuristic(u, shape, origin, res, pot_lin, pot_tab, pot_target, loc_stride, hcoord)
                hval[u] = hv
                heap.push(entry(-(0.0 + hv), -u))
        while not heap.empty():
            key = -heap.top().first
            u = -heap.top().second
            heap.pop()
            du = dist[u]
            if key != du + hval[u]:
                continue
            if key > bound:
                break
            settled += 1
            if u == target:
                break
            # decode coordinates and the local (periodic) index
            v = u
            local = 0
            for d in range(m - 1, -1, -1):
                coord[d] = v % shape[d]
                v = v // shape[d]
            for d in range(m):
                g = origin[d] + coord[d]
                q = floordiv(g, res)
                local += (g - q * res) * loc_stride[d]
            for k in range(noff):
                inside = True
                for d in range(m):
                    g = coord[d] + offsets[k, d]
                    if g < 0 or g >= shape[d]:
                        inside = False
                        break
                if not inside:
                    continue
                v = u + lin_off[k]
                nd = du + wtable[local, k]
                if nd < dist[v]:
                    dist[v] = nd
                    pred[v] = u
                    if isnan(hval[v]):
                        hv = 0.0
                        if use_h:
                            hv = heuristic(v, shape, origin, res, pot_lin, pot_tab, pot_target,
                                           loc_stride, hcoord)
                        hval[v] = hv
                    heap.push(entry(-(nd + hval[v]), -v))
    return dist_arr, pred_arr, settled
