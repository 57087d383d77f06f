"""Independent reference evaluations used by the tests."""
import mpmath as mp

mp.mp.dps = 50


def exponents(d, p, q):
    d, p, q = mp.mpf(d), mp.mpf(p), mp.mpf(q)
    ps = d * p / (d - p)
    pp = p / (p - 1)
    half = ps / 2
    s = max(half / (half - 1), p)
    r = max(d * p / (d * p - 2 * d + p), 2 * pp)
    return {"p_star": ps, "p_prime": pp, "s": s, "r": r}


def L(eta, Kd, Kf, Kn, Kt, delta, p, r, q):
    eta, Kd, Kf, Kn, Kt, delta, p, r, q = map(mp.mpf, (eta, Kd, Kf, Kn, Kt, delta, p, r, q))
    big = Kd**2 + Kn**2 + Kf + (Kt + Kn + Kd + delta) ** (p - 1)
    dn = (Kd + Kn) ** (p - 1)
    e_r = 1 / r - 1 / q
    e_p = 1 / p - 1 / q - 1
    return (
        dn * big ** (2 - p)
        + dn * (eta ** (2 * e_r) * Kt**2) ** (2 - p)
        + dn * (eta**e_p * Kt) ** ((p - 1) * (2 - p))
        + (eta**e_r * Kt) ** (p - 1) * big ** (2 - p)
        + eta ** (e_r * (3 - p)) * Kt ** (3 - p)
        + eta ** ((e_r + e_p * (2 - p)) * (p - 1)) * Kt ** ((p - 1) * (3 - p))
    )


def G(eta, Kd, Kf, Kn, Kt, delta, p, r, q, C1, c=1):
    eta, Kd, Kf, Kn, Kt, delta, p, r, q = map(mp.mpf, (eta, Kd, Kf, Kn, Kt, delta, p, r, q))
    G1 = mp.mpf(C1)
    G31 = c * (eta ** (1 / p - 1 / q - 1) * Kt + Kt + Kn + Kd + delta) ** (p - 1)
    G2 = c * (Kd + Kn + eta ** (1 / r - 1 / q) * Kt)
    G32 = c * (Kd**2 + Kn**2 + eta ** (2 / r - 2 / q) * Kt**2)
    return G1, G2, G31 + G32 + c * Kf
