import numpy as np
from scipy.integrate import quad

sigma2, T = 1.3, 0.9

def g0(t, a, h):
    # exit-through-bottom time density for motion killed at 0 and h
    acc = 0.0
    for n in range(1, 400):
        acc += n * np.sin(n * np.pi * a / h) * np.exp(-n * n * np.pi**2 * sigma2 * t / (2 * h * h))
    return sigma2 * np.pi / (h * h) * acc

def p(x, y, s):
    return np.exp(-((y - x) ** 2) / (2 * s)) / np.sqrt(2 * np.pi * s)

def exit_bottom_oracle(a, b, h):
    num, _ = quad(lambda t: g0(t, a, h) * p(0.0, b, sigma2 * (T - t)), 0, T, limit=400)
    return num / p(a, b, sigma2 * T)

def series_raw(a, b, h):
    s = sigma2 * T
    d2 = (b - a) ** 2
    acc = 0.0
    for k in range(0, 40):
        z1 = -2.0 * k * h - b
        z2 = 2.0 * (k + 1) * h + b
        acc += np.exp((d2 - (z1 - a) ** 2) / (2 * s))
        acc -= np.exp((d2 - (z2 - a) ** 2) / (2 * s))
    return acc

def series_abs(a, b, h):
    # images from |b|, conditioning from actual b
    s = sigma2 * T
    d2 = (b - a) ** 2
    bb = abs(b)
    acc = 0.0
    for k in range(0, 40):
        z1 = -2.0 * k * h - bb
        z2 = 2.0 * (k + 1) * h + bb
        acc += np.exp((d2 - (z1 - a) ** 2) / (2 * s))
        acc -= np.exp((d2 - (z2 - a) ** 2) / (2 * s))
    return acc

cases = [(0.7, 0.5, 1.4), (0.4, 1.9, 1.4), (1.1, -0.4, 1.4), (0.05, 0.6, 0.8),
         (0.9, 2.5, 1.0), (0.3, -1.2, 1.4), (1.0, 0.001, 1.4), (1.3, 1.399, 1.4)]
for a, b, h in cases:
    o = exit_bottom_oracle(a, b, h)
    print(f"a={a} b={b} h={h}: oracle={o:.8f} raw={series_raw(a,b,h):.8f} abs={series_abs(a,b,h):.8f}")
