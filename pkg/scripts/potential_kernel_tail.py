"""Decay of the potential-kernel increments |E f(S_n) - E f(S_n + y)|.

Fits the log-log slope of the terms over n in [1000, 10000] and extrapolates
the index where the largest term would fall below 1e-6.
"""
import numpy as np

from loctime import kernel_quadrature as kq
from loctime import systems

if __name__ == "__main__":
    kernel = kq.fejer_kernel()
    ys = np.round(np.arange(1, 11) / 10, 10)
    N = 10**4
    n = np.arange(1, N + 1)
    window = (n >= 1000)
    for name, make in systems.SHIPPED.items():
        s, o = make()
        sums = kq.potential_kernel_sums(s, o, kernel, ys, N)
        worst = max(sums, key=lambda p: p.max_increment_after(1000))
        t = worst.terms
        slope, icept = np.polyfit(np.log(n[window]), np.log(t[window]), 1)
        reach = np.exp((np.log(1e-6) - icept) / slope)
        print(f"{name:<12} y={worst.y:.1f}  max term after 1e3 = {worst.max_increment_after(1000):.3e}"
              f"  term at 1e4 = {t[-1]:.3e}  slope = {slope:.3f}  1e-6 reached near n = {reach:.3g}")
        print(f"{'':<12} sum to 1e4 = {worst.value:.6f}  extrapolated tail = {worst.tail_estimate(N):.3e}")
