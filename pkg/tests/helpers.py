import math

import numpy as np


def untied(rng, h, w):
    """Random mask in (0.05, 0.95) with all values distinct and well separated."""
    n = h * w
    vals = 0.05 + 0.9 * (rng.permutation(n) + rng.uniform(0.2, 0.8, n)) / n
    return vals.reshape(h, w)


def untied_pair(rng, h, w, gap=1e-3):
    """Two untied masks that also differ by at least ``gap`` at every pixel.

    Keeps central differences away from the kink of |p1 - p2|.
    """
    p1 = untied(rng, h, w)
    while True:
        p2 = untied(rng, h, w)
        if np.abs(p1 - p2).min() >= gap:
            return p1, p2


def finite_diff(f, x, h=1e-4):
    grad = np.zeros_like(x)
    for idx in np.ndindex(*x.shape):
        xp = x.copy()
        xm = x.copy()
        xp[idx] += h
        xm[idx] -= h
        grad[idx] = (f(xp) - f(xm)) / (2 * h)
    return grad


# scalar oracles: plain Python over nested lists


def ref_bce(p, t, eps=1e-7):
    vals = []
    for pr, tr in zip(p, t):
        for pv, tv in zip(pr, tr):
            pv = min(max(pv, eps), 1 - eps)
            vals.append(-(tv * math.log(pv) + (1 - tv) * math.log(1 - pv)))
    return sum(vals) / len(vals)


def ref_dice(p, t, smooth=1.0):
    inter = sum(pv * tv for pr, tr in zip(p, t) for pv, tv in zip(pr, tr))
    sp = sum(sum(r) for r in p)
    st = sum(sum(r) for r in t)
    return 1 - (2 * inter + smooth) / (sp + st + smooth)


def ref_m2b(p):
    h, w = len(p), len(p[0])
    row = [max(p[r][c] for r in range(h)) for c in range(w)]
    col = [max(p[r]) for r in range(h)]
    return [[min(row[c], col[r]) for c in range(w)] for r in range(h)]


def ref_sum(t1, t2, b):
    return (ref_bce(t1, b) + ref_bce(t2, b)) / 2 + (ref_dice(t1, b) + ref_dice(t2, b)) / 2


def ref_sc(p1, p2, b):
    diffs = [abs(a - c) for r1, r2, rb in zip(p1, p2, b) for a, c, bv in zip(r1, r2, rb) if bv]
    return sum(diffs) / len(diffs) if diffs else 0.0


def ref_total(p1, p2, b):
    s = ref_sum(ref_m2b(p1), ref_m2b(p2), b)
    return s, ref_sc(p1, p2, b), s + ref_sc(p1, p2, b)
