"""Modulus-of-continuity frequencies of l_n over a range of thresholds eps.

At eps = 0.5 every path of the two-state chain exceeds the threshold for all
probed deltas; larger eps shows the frequency falling as delta shrinks.
"""
from loctime import kernel_quadrature as kq
from loctime import systems
from loctime import verify as vf

if __name__ == "__main__":
    s, o = systems.two_state()
    deltas = [0.4, 0.2, 0.1, 0.05]
    for eps in (0.5, 1.0, 2.0, 3.0, 4.0):
        pts = vf.modulus_probe(s, o, kq.fejer_kernel(), 10**4, deltas, eps, 500, seed=20240917)
        cells = "  ".join(f"d={p.delta:<5} p={p.probability:.3f}+-{p.stderr:.3f}" for p in pts)
        print(f"eps={eps:<4} {cells}", flush=True)
