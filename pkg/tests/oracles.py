"""Brute-force reference implementations used to freeze expected values.

These deliberately avoid the library's code paths: ranks are computed by
counting rather than sorting, and reductions use math.fsum.
"""

import math


def oracle_rank(values):
    """Fractional rank by counting: less + (equal + 1) / 2."""
    ranks = []
    for v in values:
        less = sum(1 for u in values if u < v)
        equal = sum(1 for u in values if u == v)
        ranks.append(less + (equal + 1) / 2)
    return ranks


def oracle_pearson(x, y):
    n = len(x)
    mx = math.fsum(x) / n
    my = math.fsum(y) / n
    cov = math.fsum((a - mx) * (b - my) for a, b in zip(x, y))
    vx = math.fsum((a - mx) ** 2 for a in x)
    vy = math.fsum((b - my) ** 2 for b in y)
    return cov / math.sqrt(vx * vy)


def oracle_spearman(x, y):
    return oracle_pearson(oracle_rank(x), oracle_rank(y))


def oracle_variance(values):
    n = len(values)
    mean = math.fsum(values) / n
    return math.fsum((v - mean) ** 2 for v in values) / n
