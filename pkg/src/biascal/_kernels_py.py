"""Numpy fallback for the compiled decoders, same signatures and arithmetic order."""
import numpy as np


def vsrl_decode(verb_s, role_s, verb_pen, role_pen, verb_idx, noun_idx, best):
    adj_r = role_s - role_pen
    role_max = adj_r.max(axis=3)
    total = verb_s - verb_pen
    for r in range(role_s.shape[2]):
        total = total + role_max[:, :, r]
    bv = np.argmax(total, axis=1)
    rows = np.arange(len(bv))
    verb_idx[:] = bv
    best[:] = total[rows, bv]
    noun_idx[:] = np.argmax(adj_r[rows, bv], axis=2)


def mlc_decode(gender_s, obj_s, gender_pen, obj_pen, gender_idx, include, best):
    adj_o = obj_s - obj_pen
    total = gender_s - gender_pen
    for c in range(obj_s.shape[2]):
        a = adj_o[:, :, c]
        total = total + np.where(a > 0.0, a, 0.0)
    bg = np.argmax(total, axis=1)
    rows = np.arange(len(bg))
    gender_idx[:] = bg
    best[:] = total[rows, bg]
    include[:] = adj_o[rows, bg] > 0.0
