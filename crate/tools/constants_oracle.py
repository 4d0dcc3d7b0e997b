#!/usr/bin/env python3
"""High-precision evaluation of the closed-form stability constants.

Writes crates/core/tests/fixtures/constants_oracle.json: 50 parameter points
with C3, C_a', alpha_a, Q, eps, C4, C5, C7 and M_tilde computed with mpmath
at 50 significant digits, directly from the closed forms (no shared code
with the Rust crate). Inputs are stored as the exact binary64 values used.
"""

import json
import random
from pathlib import Path

from mpmath import mp, mpf, sqrt, exp

mp.dps = 50

OUT = Path(__file__).resolve().parent.parent / "crates/core/tests/fixtures/constants_oracle.json"

# log-slope of the smooth factor at x = 1, where x a'/a peaks
FACTOR_SLOPE = {None: mpf(0), "one_plus_x": mpf(1) / 2, "exp_x": mpf(1)}
FACTOR_AT_1 = {None: mpf(1), "one_plus_x": mpf(2), "exp_x": exp(1)}


def constants(p):
    alpha = mpf(p["alpha"])
    mu_a = alpha + FACTOR_SLOPE[p["factor"]]
    a1 = FACTOR_AT_1[p["factor"]]
    beta, mu1, mu2 = mpf(p["beta"]), mpf(p["mu1"]), mpf(p["mu2"])
    if p["delay"] == "constant":
        tau1 = mpf(p["tau"])
        d = mpf(0)
    else:
        tau0, tau1, k = mpf(p["tau0"]), mpf(p["tau1"]), mpf(p["k"])
        d = k * (tau1 - tau0)

    r = sqrt(1 - d)
    c3 = min(mu1 / 2 - abs(mu2) / r, mu1 / 2 * (1 - d) - abs(mu2) / 2 * r)
    ca = min(mpf(4), 2 / (2 - mu_a)) / a1
    alpha_a = min(1 / ca, beta * a1 / 2)
    q = max(1 + mu_a / 4, 1 / a1 + mu_a / 4 * ca, mu_a / (2 * beta * a1))
    eps_s = 1 / (4 * q)
    eps_d = c3 * a1 / max(1 + mpf(5) / 2 * a1 * mu1**2 + mu1 * a1, mpf(5) / 2 * a1 * mu2**2)
    eps = min(eps_s, eps_d)
    c4 = 1 - 2 * eps * q
    c5 = 1 + 2 * eps * q
    c7 = beta * (beta - mu_a + 1) + (2 * beta - mu_a / 2) ** 2
    m = min(2 - mu_a, exp(-2 * tau1))
    kk = c7**2 * (1 + 2 / beta**3) / m
    m_tilde = 2 / (eps * m) * (
        c5 + eps / (beta * alpha_a) * kk / c3 + 2 * eps * c7 / (beta * sqrt(alpha_a)) + kk * eps / c3
    )
    return {
        "C3": c3, "C_a_prime": ca, "alpha_a": alpha_a, "sandwich_max": q, "epsilon": eps,
        "eps_sandwich": eps_s, "eps_damping": eps_d, "C4": c4, "C5": c5, "C7": c7, "M_tilde": m_tilde,
    }


def draw(rng):
    factor = rng.choice([None, None, "one_plus_x", "exp_x"])
    top = {None: 1.9, "one_plus_x": 1.4, "exp_x": 0.9}[factor]
    p = {
        "factor": factor,
        "alpha": rng.choice([a for a in (0.0, 0.25, 0.5, 0.75, 0.9, 1.2, 1.5, 1.75) if a <= top]),
        "beta": rng.choice([0.1, 0.25, 0.5, 1.0, 2.0, 4.0]),
        "mu1": rng.choice([0.5, 0.625, 1.0, 2.0, 3.0, 5.0]),
    }
    if rng.random() < 0.3:
        p.update(delay="constant", tau=rng.choice([0.25, 0.5, 1.0, 1.5]))
    else:
        tau0 = rng.choice([0.25, 0.5, 1.0])
        p.update(delay="saturating_exponential", tau0=tau0, tau1=tau0 + rng.choice([0.25, 0.5, 1.0]),
                 k=rng.choice([0.1, 0.4, 0.8]))
    # mu2 as a fraction of the strict-damping threshold, with random sign
    frac = rng.choice([0.0, 0.1, 0.3, 0.6, 0.9])
    p["mu2"] = float(rng.choice([-1, 1]) * frac * p["mu1"] / 4)
    return p


def main():
    rng = random.Random(20240917)
    points = []
    damping_limited = 0
    while len(points) < 50:
        p = draw(rng)
        c = constants(p)
        if c["C3"] <= 0 or (p["delay"] != "constant" and p["k"] * (p["tau1"] - p["tau0"]) >= 1):
            continue
        # keep both branches of the epsilon choice represented
        if c["eps_damping"] < c["eps_sandwich"]:
            if damping_limited == 40:
                continue
            damping_limited += 1
        points.append({"input": p, "expected": {k: mp.nstr(v, 30) for k, v in c.items()}})
    OUT.write_text(json.dumps({"digits": mp.dps, "points": points}, indent=1) + "\n")
    print(f"wrote {len(points)} points to {OUT}")


if __name__ == "__main__":
    main()
