"""Independent reference values for the cloning-threshold SDP.

Builds the operators with numpy and solves the dual problem with CVXOPT's
conic solver on the real embedding of the 63x63 Hermitian cone. The primal
problem is

    min Tr(E0 J)  s.t.  Tr_{copies} J = 1_7,  Tr((E1 - E0) J) <= 0,
                        Tr(L0 J) <= exp(-eta mu),  Tr(L1 J) <= exp(-eta mu),  J >= 0

and its dual (52 variables: 49 for the trace condition, 3 multipliers) is

    max sum_i y_i Tr(B_i) - b (z2 + z3)
    s.t. E0 - sum_i y_i (1_9 x B_i) + z1 (E1 - E0) + z2 L0 + z3 L1 >= 0,  z >= 0.

Usage:
    python tools/reference_oracle.py                 # print the fixture JSON
    python tools/reference_oracle.py 1,0.77 2,0.9    # ad hoc points
"""

import json
import sys

import numpy as np
from cvxopt import matrix, solvers

TOL = 1e-10
FIXTURE_POINTS = [(1.0, 0.77), (0.5, 0.77), (2.0, 0.77), (1.0, 0.9), (1.0, 0.6)]


def states(mu):
    p0 = np.exp(-mu)
    p1 = mu * np.exp(-mu)
    p2 = 1 - (1 + mu) * np.exp(-mu)
    s = 1 / np.sqrt(2)
    beta = [np.array([1, 0]), np.array([s, 1j * s]), np.array([0, 1]), np.array([s, -1j * s])]
    perp = [np.array([0, 1]), np.array([s, -1j * s]), np.array([1, 0]), np.array([s, 1j * s])]
    rhos = []
    for k in range(4):
        r = np.zeros((7, 7), complex)
        r[0, 0] = p0
        r[1:3, 1:3] = p1 * np.outer(beta[k], beta[k].conj())
        r[3 + k, 3 + k] = p2
        rhos.append(r)
    return rhos, perp


def operators(mu):
    rhos, perp = states(mu)
    i3 = np.eye(3)
    empty = np.zeros((3, 3))
    empty[2, 2] = 1
    e0 = np.zeros((63, 63), complex)
    e1, l0, l1 = e0.copy(), e0.copy(), e0.copy()
    for k in range(4):
        p = np.zeros((3, 3), complex)
        p[:2, :2] = np.outer(perp[k], perp[k].conj())
        rb = rhos[k].conj()
        e0 += 0.125 * np.kron(np.kron(p, i3), rb)
        e1 += 0.125 * np.kron(np.kron(i3, p), rb)
        l0 += 0.25 * np.kron(np.kron(empty, i3), rb)
        l1 += 0.25 * np.kron(np.kron(i3, empty), rb)
    return e0, e1, l0, l1


def embed(h):
    return np.block([[h.real, -h.imag], [h.imag, h.real]])


def hermitian_basis(d):
    basis = []
    for i in range(d):
        m = np.zeros((d, d), complex)
        m[i, i] = 1
        basis.append(m)
    for i in range(d):
        for j in range(i + 1, d):
            m = np.zeros((d, d), complex)
            m[i, j] = m[j, i] = 1
            basis.append(m)
            m = np.zeros((d, d), complex)
            m[i, j], m[j, i] = 1j, -1j
            basis.append(m)
    return basis


def solve(mu, eta):
    solvers.options.update(show_progress=False, abstol=TOL, reltol=TOL, feastol=TOL)
    e0, e1, l0, l1 = operators(mu)
    bound = np.exp(-eta * mu)
    basis = hermitian_basis(7)
    mats = [np.kron(np.eye(9), b) for b in basis] + [-(e1 - e0), -l0, -l1]
    c = np.array([-np.trace(b).real for b in basis] + [0, bound, bound])
    gs = np.array([embed(m).flatten(order="F") for m in mats]).T
    gl = np.zeros((3, 52))
    gl[0, 49] = gl[1, 50] = gl[2, 51] = -1
    g = matrix(np.vstack([gl, gs]))
    h = matrix(np.concatenate([np.zeros(3), embed(e0).flatten(order="F")]))
    sol = solvers.conelp(matrix(c), g, h, dims={"l": 3, "q": [], "s": [126]})
    raw = -sol["primal objective"]
    return {
        "mu": mu,
        "eta": eta,
        "status": sol["status"],
        "raw_objective": raw,
        "raw_objective_other_side": -sol["dual objective"],
        "epsilon_threshold": raw / (1 - bound),
    }


def main(argv):
    if argv:
        for p in argv:
            mu, eta = (float(x) for x in p.split(","))
            r = solve(mu, eta)
            print(f"{mu} {eta} {r['status']} raw={r['raw_objective']:.12f} eps={r['epsilon_threshold']:.12f}")
        return
    out = {
        "provenance": (
            "tools/reference_oracle.py: CVXOPT conelp on the dual problem over the real "
            f"embedding of the Hermitian cone, abstol = reltol = feastol = {TOL:g}"
        ),
        "instances": [],
    }
    for mu, eta in FIXTURE_POINTS:
        r = solve(mu, eta)
        out["instances"].append(
            {
                "mu": mu,
                "eta": eta,
                "raw_objective": round(r["raw_objective"], 12),
                "epsilon_threshold": round(r["epsilon_threshold"], 12),
                "solver_status": r["status"],
            }
        )
    print(json.dumps(out, indent=2))


if __name__ == "__main__":
    main(sys.argv[1:])
