"""Direct substitution of the closed-form bounds, used to lock golden values
in the bounds tests. Run: python3 scripts/bound_goldens.py"""
from math import sqrt

r2 = sqrt(2.0)


def mayers_yao(e):
    return 4 * (1 + r2) * (2 * e) ** 0.25 + 8 * sqrt(2 * e) + (5 + 3 * r2) * (2 * e) ** 0.75


def chsh_ac(e):
    return 2 * sqrt(2 * r2 * e)


def sufficient(n, w, e1, e2, e3):
    a = w / 2 * ((n - 1) * e1 + 2 * n * e2 + e3) + n / 4 * (e3 - e1) + n * n / 8 * (e1 + 2 * e2)
    b = n * n / 4 * (e1 + 2 * e2) + n / 2 * (e2 + e3 - e1)
    return sqrt(a) + sqrt(b)


def theorem1(n, w, e):
    e4 = mayers_yao(e)
    s = sqrt(2 * e)
    a = s * (9 * n * n / 4 + 3 * n / 2) + n * e4 / 2
    b = s * (9 * n * n / 8 + n * (5 * w / 2 - 0.25) - w / 2) + e4 * (n / 4 + w / 2)
    return sqrt(a) + sqrt(b)


def recomputed(n, w, e):
    return sufficient(n, w, 4 * sqrt(2 * e), sqrt(2 * e), mayers_yao(e))


def spp_brackets(n, w):
    a = 9 * n * n / 4 + (3 + 2 ** 1.25) * n / 2
    b = 9 * n * n / 8 + n * (5 * w / 2 - 0.25 + 2 ** -0.75) + w * (2 ** 0.25 - 0.5)
    return a, b


def spp(n, w, e):
    a, b = spp_brackets(n, w)
    s = sqrt(2 * e)
    return sqrt(s * a) + sqrt(s * b)


def game(n, w, d):
    a, b = spp_brackets(n, w)
    s = sqrt(n * d)
    return 10 ** (n / 8) * sqrt(s * a) + 10 ** (n / 8) * sqrt(s * b)


if __name__ == "__main__":
    print("mayers_yao(0.005)", repr(mayers_yao(0.005)))
    print("chsh_ac(0.01)", repr(chsh_ac(0.01)))
    print("sufficient(2,0,.01,.01,.01)", repr(sufficient(2, 0, 0.01, 0.01, 0.01)))
    print("theorem1(2,0,1e-6)", repr(theorem1(2, 0, 1e-6)))
    print("recomputed(2,0,1e-6)", repr(recomputed(2, 0, 1e-6)))
    print("spp(2,1,1e-6)", repr(spp(2, 1, 1e-6)))
    print("game(2,0,1e-8)", repr(game(2, 0, 1e-8)))
