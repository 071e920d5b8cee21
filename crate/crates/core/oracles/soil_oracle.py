#!/usr/bin/env python3
"""Standalone reference values for the soil channel tests.

Independent of the Rust implementation: Peplinski dielectric model written
from the model formulas, propagation constants from a complex square
root, Fresnel transmission from complex refractive indices, and the
two-segment straight-ray geometry evaluated directly.

Run: python3 soil_oracle.py
"""
import cmath
import math

C = 299792458.0
MU0 = 4e-7 * math.pi
EPS0 = 1.0 / (MU0 * C * C)


def peplinski(vwc, clay, sand, rho_b, rho_s, f):
    # water relaxation (Debye)
    ew_inf, ew_0, two_pi_tau = 4.9, 80.1, 0.58e-10
    x = two_pi_tau * f
    sigma = 0.0467 + 0.2204 * rho_b - 0.4111 * sand + 0.6614 * clay
    efw_r = ew_inf + (ew_0 - ew_inf) / (1 + x * x)
    efw_i_relax = x * (ew_0 - ew_inf) / (1 + x * x)
    cond = sigma / (2 * math.pi * EPS0 * f) * (rho_s - rho_b) / (rho_s * vwc)
    efw_i = efw_i_relax + cond
    eps_s = (1.01 + 0.44 * rho_s) ** 2 - 0.062
    a = 0.65
    b_r = 1.2748 - 0.519 * sand - 0.152 * clay
    b_i = 1.33797 - 0.603 * sand - 0.166 * clay
    er = (1 + rho_b / rho_s * (eps_s ** a - 1) + vwc ** b_r * efw_r ** a - vwc) ** (1 / a)
    er = 1.15 * er - 0.68
    ei = (vwc ** b_i * efw_i ** a) ** (1 / a)
    return er, ei


def prop_consts(er, ei, f):
    w = 2 * math.pi * f
    gamma = cmath.sqrt(-(w ** 2) * MU0 * EPS0 * complex(er, -ei))
    # choose the root with non-negative real part
    if gamma.real < 0:
        gamma = -gamma
    return gamma.real, gamma.imag


def ug_loss(alpha, beta, d):
    if d == 0:
        return 0.0
    lam = 2 * math.pi / beta
    spread = max(0.0, 20 * math.log10(4 * math.pi * d / lam))
    return spread + 20 * math.log10(math.e) * alpha * d


def refraction(er, ei, direction):
    n = cmath.sqrt(complex(er, -ei))
    if n.real < 0:
        n = -n
    if direction == "down":
        n1, n2 = 1.0, n
    else:
        n1, n2 = n, 1.0
    t = 2 * n1 / (n1 + n2)
    T = (n2.real if isinstance(n2, complex) else n2) / (n1.real if isinstance(n1, complex) else n1) * abs(t) ** 2
    return max(0.0, -10 * math.log10(T))


def ag_loss(d, gamma, f):
    if d == 0:
        return 0.0
    ref = 20 * math.log10(4 * math.pi * f / C)
    return max(0.0, ref + 10 * gamma * math.log10(d))


def segments(h, z, x):
    total = math.hypot(x, h + z)
    return total * h / (h + z), total * z / (h + z)


def composite(h, z, x, f, soil, gamma, direction):
    er, ei = peplinski(*soil, f)
    a, b = prop_consts(er, ei, f)
    d_ag, d_ug = segments(h, z, x)
    return ag_loss(d_ag, gamma, f) + ug_loss(a, b, d_ug) + refraction(er, ei, direction)


if __name__ == "__main__":
    f = 915e6
    for vwc in (0.05, 0.15, 0.25):
        soil = (vwc, 0.30, 0.50, 1.5, 2.66)
        er, ei = peplinski(*soil, f)
        a, b = prop_consts(er, ei, f)
        print(f"vwc={vwc}: eps=({er!r}, {ei!r}) alpha={a!r} beta={b!r}")
        print(f"  ug_loss(0.025)={ug_loss(a, b, 0.025)!r} ug_loss(0.05)={ug_loss(a, b, 0.05)!r}")
        print(f"  refr down={refraction(er, ei, 'down')!r} up={refraction(er, ei, 'up')!r}")
        print(f"  composite(0.3,0.025,1.0) down={composite(0.3, 0.025, 1.0, f, soil, 3.0, 'down')!r}"
              f" up={composite(0.3, 0.025, 1.0, f, soil, 3.0, 'up')!r}")
    soil = (0.15, 0.30, 0.50, 1.5, 2.66)
    d_ag, d_ug = segments(0.3, 0.025, 1.0)
    er, ei = peplinski(*soil, f)
    a, b = prop_consts(er, ei, f)
    print(f"trial segments d_ag={d_ag!r} d_ug={d_ug!r}")
    print(f"  ag={ag_loss(d_ag, 3.0, f)!r} ug={ug_loss(a, b, d_ug)!r}")
