"""Independent high-precision values frozen into the test suite.

Uses mpmath only (no code from the package beyond the scenario constants
re-typed here), so the numbers are an oracle for the float64 code paths.
Run: python scripts/derive_oracles.py
"""

import mpmath as mp

mp.mp.dps = 40

P_W = mp.mpf(10) ** ((23 - 30) / mp.mpf(10))
N0 = mp.mpf(10) ** ((-174 - 30) / mp.mpf(10))
BITS = 160
COPY_S = mp.mpf("0.5e-3")


def worst_gain(d=200, std=8, target=mp.mpf("1e-5")):
    q_inv = mp.sqrt(2) * mp.erfinv(1 - 2 * target)
    pl = mp.mpf("35.3") + mp.mpf("37.6") * mp.log10(d)
    return mp.mpf(10) ** ((-pl - std * q_inv) / 10)


def decoding_error(n_ant, bandwidth):
    a = worst_gain()
    m = COPY_S * bandwidth
    c = a * P_W / (N0 * bandwidth)
    thr = (mp.mpf(2) ** (BITS / m) - 1) / c

    def f(g):
        gam = c * g
        v = 1 - 1 / (1 + gam) ** 2
        arg = mp.sqrt(m / v) * (mp.log(1 + gam) - BITS * mp.log(2) / m)
        pdf = g ** (n_ant - 1) * mp.exp(-g) / mp.factorial(n_ant - 1)
        return mp.erfc(arg / mp.sqrt(2)) / 2 * pdf

    pts = sorted({mp.mpf(0), thr * mp.mpf("0.5"), thr, thr * mp.mpf("1.5"), mp.mpf(n_ant), mp.mpf(4 * n_ant + 100)})
    return mp.quad(f, pts) + mp.quad(f, [pts[-1], mp.inf])


def lambert(x):
    return mp.lambertw(x, -1)


if __name__ == "__main__":
    print("worst-case gain", mp.nstr(worst_gain(), 20))
    for n_ant, bw in ((16, 440e3), (32, 440e3), (64, 880e3), (32, 220e3)):
        print(f"decoding error N_r={n_ant} B={bw:g}:", mp.nstr(decoding_error(n_ant, mp.mpf(bw)), 17))
    # arguments are the float64 values the tests pass in; near -1/e the
    # decimal string and its binary rounding give visibly different W
    for x in (-0.3678794, -0.2, -1e-3, -1e-30):
        print(f"W_-1({x!r}) =", mp.nstr(lambert(mp.mpf(x)), 20))
    for p in ("1e-5", "1e-9", "0.3"):
        print(f"Q^-1({p}) =", mp.nstr(mp.sqrt(2) * mp.erfinv(1 - 2 * mp.mpf(p)), 20))
