"""Reference quadrature rules on the triangle and the tetrahedron.

Rules are stored in barycentric coordinates with weights normalized to sum
to one; callers scale by the physical measure.  All weights are positive.
"""
import numpy as np


class QuadratureOrderError(ValueError):
    pass


def _sym3(a):
    return [(a, a, 1 - 2 * a), (a, 1 - 2 * a, a), (1 - 2 * a, a, a)]


def _sym6(a, b):
    c = 1 - a - b
    return [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]


def _triangle_rules():
    rules = {}
    pts = _sym3(1.0 / 6.0)
    rules[2] = (np.array(pts), np.full(3, 1.0 / 3.0))
    # Dunavant degree 4, 6 points
    pts = _sym3(0.445948490915965) + _sym3(0.091576213509771)
    w = [0.223381589678011] * 3 + [0.109951743655322] * 3
    rules[4] = (np.array(pts), np.array(w))
    # Dunavant degree 6, 12 points
    pts = _sym3(0.249286745170910) + _sym3(0.063089014491502) + _sym6(0.053145049844817, 0.310352451033784)
    w = [0.116786275726379] * 3 + [0.050844906370207] * 3 + [0.082851075618374] * 6
    rules[6] = (np.array(pts), np.array(w))
    for k, (p, w) in rules.items():
        rules[k] = (p, w / w.sum())
    return rules


def _tet_rules():
    rules = {1: (np.full((1, 4), 0.25), np.ones(1))}
    a, b = 0.5854101966249685, 0.1381966011250105
    pts = [[a, b, b, b], [b, a, b, b], [b, b, a, b], [b, b, b, a]]
    rules[2] = (np.array(pts), np.full(4, 0.25))
    # 14-point rule exact for degree 5, positive weights
    pts, w = [], []
    for s, ws in ((0.3108859192633006, 0.1126879257180159), (0.09273525031089123, 0.07349304311636196)):
        for k in range(4):
            p = [s] * 4
            p[k] = 1 - 3 * s
            pts.append(p)
            w.append(ws)
    c = 0.04550370412564965
    d = 0.5 - c
    for i in range(4):
        for j in range(i + 1, 4):
            p = [d] * 4
            p[i] = p[j] = c
            pts.append(p)
            w.append(0.04254602077708147)
    w = np.array(w)
    rules[4] = (np.array(pts), w / w.sum())
    return rules


TRIANGLE_RULES = _triangle_rules()
TET_RULES = _tet_rules()


def triangle_rule(order):
    try:
        return TRIANGLE_RULES[order]
    except KeyError:
        raise QuadratureOrderError(
            f"surface quadrature order {order} unsupported (choose from {sorted(TRIANGLE_RULES)})"
        ) from None


def tet_rule(order):
    try:
        return TET_RULES[order]
    except KeyError:
        raise QuadratureOrderError(
            f"volume quadrature order {order} unsupported (choose from {sorted(TET_RULES)})"
        ) from None
