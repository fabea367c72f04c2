"""Independent reference computations used by several test modules."""

import numpy as np
from scipy import integrate


def complex_gaussian_moment(p, power):
    """E|s|^(2*power) for s ~ CN(0, p), by 2-D quadrature over the density."""
    sigma2 = p / 2.0

    def integrand(y, x):
        r2 = x * x + y * y
        return r2**power * np.exp(-r2 / (2 * sigma2)) / (2 * np.pi * sigma2)

    lim = 12.0 * np.sqrt(sigma2)
    value, _ = integrate.dblquad(integrand, -lim, lim, -lim, lim, epsabs=1e-13, epsrel=1e-11)
    return value


def received_loop(h, w, pa, s):
    """r[n, l] by explicit loops over symbols, locations and antennas."""
    n_sym, k = s.shape
    m, l = h.shape
    r = np.zeros((n_sym, l), dtype=complex)
    for n in range(n_sym):
        for li in range(l):
            acc = 0j
            for mi in range(m):
                x = sum(w[mi, ki] * s[n, ki] for ki in range(k))
                acc += h[mi, li] * complex(pa(np.array(x)))
            r[n, li] = acc
    return r
