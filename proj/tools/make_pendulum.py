#!/usr/bin/env python3
"""Generate the bundled cart-pole model in Jordan coordinates.

Physical model (M = m = l = 1, g = 9.8, no friction), linearized upright and
sampled with a zero-order hold every 0.1 s. States are cart position, cart
velocity, pole angle and pole rate; sensors 1-3 read the cart position and
sensor 4 the angle. Process and measurement noise are 0.001 * I in those
physical coordinates.

The model file must have A in Jordan form, so everything is expressed in the
basis T = [c e1, 10 c e2, a v3, b v4] where v3, v4 are unit eigenvectors of the
stable and unstable pole modes (first cart entry made positive for v3). The
2x2 block for eigenvalue 1 fixes the ratio of the first two columns. With
x = T xi:
    A_J = T^-1 A T, B_J = T^-1 B, C_J = C T, Q_J = T^-1 Q T^-T, K_J = K T.
T itself is stored as the model's state_basis, so estimation errors are
reported in the physical coordinates. The column scales (a, b, c) set the
units of the Jordan coordinates and hence the scale on which the l1 weight
gamma acts. The defaults (1, 16, 0.01) place the gamma sweep 2..100 across the
transition from attack rejection to plain least squares.
"""

import argparse
import json
import sys

import numpy as np
import scipy.linalg as sl

G = 9.8
DT = 0.1
K_LQR_PHYSICAL = np.array([[-0.604, -1.678, -39.514, -9.721]])


def physical_model():
    Ac = np.array([[0, 1, 0, 0], [0, 0, -G, 0], [0, 0, 0, 1], [0, 0, 2 * G, 0]], dtype=float)
    Bc = np.array([[0], [1], [0], [-1]], dtype=float)
    M = np.zeros((5, 5))
    M[:4, :4] = Ac
    M[:4, 4:] = Bc
    E = sl.expm(M * DT)
    C = np.array([[1, 0, 0, 0]] * 3 + [[0, 0, 1, 0]], dtype=float)
    return E[:4, :4], E[:4, 4:], C


def jordan_basis(A, a, b, c):
    lam = np.sqrt(2 * G) * DT
    w, V = np.linalg.eig(A)
    v3 = V[:, np.argmin(abs(w - np.exp(-lam)))].real
    v4 = V[:, np.argmin(abs(w - np.exp(lam)))].real
    v3 = v3 / np.linalg.norm(v3) * np.sign(v3[0])
    v4 = v4 / np.linalg.norm(v4) * np.sign(v4[2])
    e1 = np.array([1.0, 0, 0, 0])
    e2 = np.array([0, 1.0, 0, 0])
    return np.column_stack([c * e1, 10 * c * e2, a * v3, b * v4]), lam


def build(a, b, c):
    A, B, C = physical_model()
    T, lam = jordan_basis(A, a, b, c)
    Ti = np.linalg.inv(T)
    AJ = np.diag([1.0, 1.0, np.exp(-lam), np.exp(lam)])
    AJ[0, 1] = 1.0
    drift = np.max(abs(Ti @ A @ T - AJ))
    if drift > 1e-9:
        sys.exit(f"basis does not bring A to Jordan form (max deviation {drift:.3e})")
    Q = 1e-3 * np.eye(4)
    sym = lambda M: 0.5 * (M + M.T)
    return {
        "A": AJ.tolist(),
        "B": (Ti @ B).tolist(),
        "C": (C @ T).tolist(),
        "Q": sym(Ti @ Q @ Ti.T).tolist(),
        "R": (1e-3 * np.eye(4)).tolist(),
        "Sigma": sym(Ti @ Q @ Ti.T).tolist(),
        "K_lqr": (K_LQR_PHYSICAL @ T).tolist(),
        "sensor_labels": ["cart position 1", "cart position 2", "cart position 3", "pole angle"],
        "state_basis": T.tolist(),
    }


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--scale-stable", type=float, default=1.0, help="a: length of the stable-mode column")
    p.add_argument("--scale-unstable", type=float, default=16.0, help="b: length of the unstable-mode column")
    p.add_argument("--scale-cart", type=float, default=0.01, help="c: length of the cart-position column")
    p.add_argument("--out", default="-", help="output path (default: stdout)")
    args = p.parse_args()
    doc = build(args.scale_stable, args.scale_unstable, args.scale_cart)
    text = json.dumps(doc, indent=2) + "\n"
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w") as f:
            f.write(text)


if __name__ == "__main__":
    main()
