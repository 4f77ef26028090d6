# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled next-token kernels; see ``_fallback.py`` for the reference."""

from array import array

from libc.math cimport pow
from libc.stdlib cimport free, malloc


def dense_probs(Py_ssize_t vocab_size, double total, double smoothing, ids, counts):
    cdef double denom = total + smoothing * vocab_size
    cdef Py_ssize_t i
    cdef double[::1] view
    out = array("d", bytes(8 * vocab_size))
    view = out
    if denom <= 0:
        for i in range(vocab_size):
            view[i] = 1.0 / vocab_size
        return out
    cdef double base = smoothing / denom
    for i in range(vocab_size):
        view[i] = base
    cdef const long long[::1] id_view = ids
    cdef const double[::1] count_view = counts
    for i in range(id_view.shape[0]):
        view[id_view[i]] = (count_view[i] + smoothing) / denom
    return out


def pick_token(const double[::1] probs, double temperature, double top_p, double u, bint do_sample):
    cdef Py_ssize_t n = probs.shape[0]
    cdef Py_ssize_t i, j, best, nkept
    cdef double z, inv, cum, acc, target, qi, qb

    if not do_sample:
        best = 0
        for i in range(1, n):
            if probs[i] > probs[best]:
                best = i
        return best, probs[best]

    cdef double* q = <double*> malloc(n * sizeof(double))
    cdef char* used = <char*> malloc(n * sizeof(char))
    cdef Py_ssize_t* kept = <Py_ssize_t*> malloc(n * sizeof(Py_ssize_t))
    if q == NULL or used == NULL or kept == NULL:
        free(q)
        free(used)
        free(kept)
        raise MemoryError()
    try:
        z = 0.0
        if temperature == 1.0:
            for i in range(n):
                q[i] = probs[i]
                z += q[i]
        else:
            inv = 1.0 / temperature
            for i in range(n):
                q[i] = pow(probs[i], inv)
                z += q[i]
        for i in range(n):
            q[i] = q[i] / z
            used[i] = 0

        # selection by repeated max scan: nucleus is usually a short prefix
        nkept = 0
        cum = 0.0
        while nkept < n:
            best = -1
            for i in range(n):
                if used[i]:
                    continue
                if best < 0 or q[i] > q[best]:
                    best = i
            if q[best] <= 0.0:
                break
            used[best] = 1
            kept[nkept] = best
            nkept += 1
            cum += q[best]
            if cum >= top_p:
                break

        target = u * cum
        acc = 0.0
        j = kept[nkept - 1]
        for i in range(nkept):
            acc += q[kept[i]]
            if acc > target:
                j = kept[i]
                break
        return j, q[j] / cum
    finally:
        free(q)
        free(used)
        free(kept)
