"""Asymptotic variance of every example from the fundamental matrix of the edge chain.

The edge process (x_k, x_{k+1}) is itself Markov; for a function f on edges
with stationary law mu, v = 2 <f, Z f>_mu - <f, f>_mu with
Z = (I - P + 1 mu)^-1.  Prints the values frozen in tests/test_spectral.py.
"""
import numpy as np

from loctime import spectral as sp
from loctime import systems


def edge_chain_variance(sys, obs):
    edges = [(x, y) for x in range(sys.d) for y in range(sys.d) if sys.Q[x, y] > 0]
    P = np.array([[sys.Q[c, e] if c == b else 0.0 for c, e in edges] for _, b in edges])
    mu = np.array([sys.pi[a] * sys.Q[a, b] for a, b in edges])
    f = np.array([obs.values[a, b] for a, b in edges])
    Z = np.linalg.inv(np.eye(len(edges)) - P + np.outer(np.ones(len(edges)), mu))
    return 2 * mu @ (f * (Z @ f)) - mu @ (f * f)


if __name__ == "__main__":
    print(f"{'system':<20}{'oracle':>22}{'green-kubo':>22}{'-lambda_pp(0)':>22}")
    for name, make in systems.EXAMPLES.items():
        s, o = make()
        r = sp.variance(s, o)
        print(f"{name:<20}{edge_chain_variance(s, o):>22.16g}{r.v_gk:>22.16g}{r.v_fd:>22.16g}")
