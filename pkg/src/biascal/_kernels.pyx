# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled per-instance MAP decoders over dense score arrays.

Arithmetic order matches ``_kernels_py`` exactly: adjusted scores are
``score - penalty`` and verb totals accumulate role maxima in role order.
Both functions release the GIL and write into caller-provided buffers.
"""
from libc.math cimport INFINITY


def vsrl_decode(const double[:, ::1] verb_s, const double[:, :, :, ::1] role_s,
                const double[::1] verb_pen, const double[:, :, ::1] role_pen,
                Py_ssize_t[::1] verb_idx, Py_ssize_t[:, ::1] noun_idx, double[::1] best):
    cdef Py_ssize_t n_inst = verb_s.shape[0], n_verb = verb_s.shape[1]
    cdef Py_ssize_t n_role = role_s.shape[2], n_noun = role_s.shape[3]
    cdef Py_ssize_t i, v, r, n, bv, arg
    cdef double t, m, a, bt
    with nogil:
        for i in range(n_inst):
            bv = 0
            bt = -INFINITY
            for v in range(n_verb):
                t = verb_s[i, v] - verb_pen[v]
                for r in range(n_role):
                    m = -INFINITY
                    for n in range(n_noun):
                        a = role_s[i, v, r, n] - role_pen[v, r, n]
                        if a > m:
                            m = a
                    t = t + m
                if t > bt:
                    bt = t
                    bv = v
            verb_idx[i] = bv
            best[i] = bt
            for r in range(n_role):
                m = -INFINITY
                arg = 0
                for n in range(n_noun):
                    a = role_s[i, bv, r, n] - role_pen[bv, r, n]
                    if a > m:
                        m = a
                        arg = n
                noun_idx[i, r] = arg


def mlc_decode(const double[:, ::1] gender_s, const double[:, :, ::1] obj_s,
               const double[::1] gender_pen, const double[:, ::1] obj_pen,
               Py_ssize_t[::1] gender_idx, unsigned char[:, ::1] included, double[::1] best):
    cdef Py_ssize_t n_inst = gender_s.shape[0], n_gender = gender_s.shape[1]
    cdef Py_ssize_t n_obj = obj_s.shape[2]
    cdef Py_ssize_t i, g, c, bg
    cdef double t, a, bt
    with nogil:
        for i in range(n_inst):
            bg = 0
            bt = -INFINITY
            for g in range(n_gender):
                t = gender_s[i, g] - gender_pen[g]
                for c in range(n_obj):
                    a = obj_s[i, g, c] - obj_pen[g, c]
                    if a > 0.0:
                        t = t + a
                if t > bt:
                    bt = t
                    bg = g
            gender_idx[i] = bg
            best[i] = bt
            for c in range(n_obj):
                included[i, c] = (obj_s[i, bg, c] - obj_pen[bg, c]) > 0.0
