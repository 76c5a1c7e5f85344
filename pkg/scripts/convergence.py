"""Discretization error of a single LIF against the closed form.

For a constant input current, sweeps dt and prints the maximum absolute
error over five time constants for forward and exponential Euler.
"""

import argparse

import numpy as np

from nirc import dialects as D
from nirc import primitives as P


def max_error(params, decay, dt, i0, horizon):
    steps = int(round(horizon / dt))
    cfg = D.DialectConfig(dt=dt, decay=decay)
    v, _ = D.simulate(params, cfg, np.full((steps, 1), i0), state=np.zeros(1))
    t = dt * np.arange(1, steps + 1)
    return float(np.max(np.abs(v[:, 0] - D.lif_exact(params, 0.0, i0, t))))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--tau", type=float, default=0.02)
    parser.add_argument("--r", type=float, default=1.5)
    parser.add_argument("--i0", type=float, default=2.0)
    parser.add_argument("--levels", type=int, default=6, help="number of dt halvings")
    args = parser.parse_args()

    p = P.LIF(tau=[args.tau], r=[args.r], v_leak=[0.0], threshold=[1e12])
    scale = args.r * args.i0
    print(f"{'dt/tau':>10} {'fwd err/(R i0)':>16} {'ratio':>7} {'exp err/(R i0)':>16}")
    prev = None
    for k in range(args.levels):
        dt = args.tau / (100 * 2 ** k)
        fwd = max_error(p, "forward_euler", dt, args.i0, 5 * args.tau) / scale
        exp = max_error(p, "exponential_euler", dt, args.i0, 5 * args.tau) / scale
        ratio = f"{prev / fwd:7.3f}" if prev else " " * 7
        print(f"{dt / args.tau:10.2e} {fwd:16.3e} {ratio} {exp:16.3e}")
        prev = fwd


if __name__ == "__main__":
    main()
