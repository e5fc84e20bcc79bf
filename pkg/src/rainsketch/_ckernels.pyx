# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the hot sketch kernels.

Must stay bit-identical to _pykernels: same FNV-1a digests, same
splitmix64 mixing, same trailing-zero positions. The test suite
cross-checks the two backends on random inputs.
"""

from libc.stdint cimport int64_t, uint64_t

NAME = "compiled"

cdef inline uint64_t _mix64(uint64_t x) noexcept nogil:
    x += <uint64_t>0x9E3779B97F4A7C15
    x = (x ^ (x >> 30)) * <uint64_t>0xBF58476D1CE4E5B9
    x = (x ^ (x >> 27)) * <uint64_t>0x94D049BB133111EB
    return x ^ (x >> 31)


cdef inline int _trailing_zeros(uint64_t w) noexcept nogil:
    cdef int c = 0
    if w == 0:
        return 64
    while not (w & 1):
        w >>= 1
        c += 1
    return c


cdef inline uint64_t _fnv1a(const unsigned char* data, Py_ssize_t n) noexcept nogil:
    cdef uint64_t h = <uint64_t>0xCBF29CE484222325
    cdef Py_ssize_t i
    for i in range(n):
        h = (h ^ data[i]) * <uint64_t>0x100000001B3
    return h


def digest_many(ids, uint64_t[::1] out):
    """FNV-1a digest of each id into a preallocated uint64 array."""
    cdef Py_ssize_t i = 0
    cdef const unsigned char[::1] view
    for item in ids:
        if isinstance(item, str):
            item = (<str>item).encode("utf-8")
        view = item
        if view.shape[0] == 0:
            raise ValueError("client_id must be non-empty")
        out[i] = _fnv1a(&view[0], view.shape[0])
        i += 1


def positions_into(uint64_t digest, uint64_t[::1] mixed_seeds, int width, int64_t[::1] out):
    """Per-row positions of one digest into a preallocated int64 array."""
    cdef Py_ssize_t k = mixed_seeds.shape[0]
    cdef int cap = width - 1
    cdef int tz
    cdef Py_ssize_t i
    for i in range(k):
        tz = _trailing_zeros(_mix64(digest ^ mixed_seeds[i]))
        out[i] = tz if tz < cap else cap


def fm_or_bulk(uint64_t[::1] digests, uint64_t[::1] mixed_seeds, int width, uint64_t[::1] masks):
    """OR the bit for every (digest, row) pair into per-row uint64 masks.

    Only valid for width <= 64; wider sketches take the scalar path.
    """
    cdef Py_ssize_t n = digests.shape[0]
    cdef Py_ssize_t k = mixed_seeds.shape[0]
    cdef int cap = width - 1
    cdef int tz
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(n):
            for j in range(k):
                tz = _trailing_zeros(_mix64(digests[i] ^ mixed_seeds[j]))
                if tz > cap:
                    tz = cap
                masks[j] |= (<uint64_t>1) << tz


def rank_insert_one(uint64_t[:, ::1] slots, uint64_t[::1] mixed_seeds, uint64_t digest, uint64_t ts):
    """Min-update one timestamp into every row of a rank sketch."""
    cdef Py_ssize_t k = slots.shape[0]
    cdef int cap = <int>slots.shape[1] - 1
    cdef int tz
    cdef Py_ssize_t i
    for i in range(k):
        tz = _trailing_zeros(_mix64(digest ^ mixed_seeds[i]))
        if tz > cap:
            tz = cap
        if ts < slots[i, tz]:
            slots[i, tz] = ts


def rank_insert_bulk(uint64_t[:, ::1] slots, uint64_t[::1] mixed_seeds,
                     uint64_t[::1] digests, uint64_t[::1] ts):
    """Min-update a batch of (digest, timestamp) pairs into all rows."""
    cdef Py_ssize_t n = digests.shape[0]
    cdef Py_ssize_t k = slots.shape[0]
    cdef int cap = <int>slots.shape[1] - 1
    cdef int tz
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(n):
            for j in range(k):
                tz = _trailing_zeros(_mix64(digests[i] ^ mixed_seeds[j]))
                if tz > cap:
                    tz = cap
                if ts[i] < slots[j, tz]:
                    slots[j, tz] = ts[i]


def lsb0_at_most_into(uint64_t[:, ::1] slots, uint64_t x, int64_t[::1] out):
    """Per row, the lowest position whose stored value is NOT <= x.

    Returns the number of rows with at least one cell below the threshold.
    """
    cdef Py_ssize_t k = slots.shape[0]
    cdef Py_ssize_t width = slots.shape[1]
    cdef Py_ssize_t i, p, q
    cdef int nonempty = 0
    cdef bint hit
    for i in range(k):
        p = 0
        while p < width and slots[i, p] <= x:
            p += 1
        out[i] = p
        if p > 0:
            nonempty += 1
        else:
            hit = False
            for q in range(1, width):
                if slots[i, q] <= x:
                    hit = True
                    break
            if hit:
                nonempty += 1
    return nonempty
