#!/usr/bin/env python3
# Copyright 2026 The dturbo Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
# =============================================================================
"""High-precision reference values for the test suite.

Writes tests/fixtures/{math_values,grid_3x3,loss_case}.json. Everything is
computed with mpmath at 50 digits and shares no code with the C++ library.
Inputs come from the SplitMix64 stream that oracle::fixture_uniforms also
implements, so the C++ side can regenerate them from the seed alone.
"""

import itertools
import json
import pathlib

import mpmath as mp

mp.mp.dps = 50
MASK = (1 << 64) - 1
OUT = pathlib.Path(__file__).resolve().parents[1] / "fixtures"


def uniforms(seed, n, lo, hi):
    x = seed & MASK
    out = []
    for _ in range(n):
        x = (x + 0x9E3779B97F4A7C15) & MASK
        z = x
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
        z ^= z >> 31
        out.append(lo + (hi - lo) * float(z >> 11) * 2.0 ** -53)
    return out


def f(x):
    return float(x)


def math_values():
    digamma = {str(x): f(mp.digamma(mp.mpf(x))) for x in ["0.5", "1", "2", "10", "100", "0.01", "1000"]}
    lgamma = {str(x): f(mp.loggamma(mp.mpf(x))) for x in ["0.5", "1", "3", "100", "1e-3", "1e4"]}
    mu, sd, prior = mp.mpf("0.5"), mp.mpf("0.3"), mp.mpf("2.0")
    kl = mp.log(prior / sd) + (sd**2 + mu**2) / (2 * prior**2) - mp.mpf("0.5")
    rho, a, b = mp.mpf(50), mp.mpf(100), mp.mpf(1)
    log_density = a * mp.log(b) - mp.loggamma(a) + (a - 1) * mp.log(rho) - b * rho
    shape, rate = mp.mpf(100), mp.mpf(1)
    moments = [f(shape / rate), f(mp.digamma(shape) - mp.log(rate))]
    return {
        "digamma": digamma,
        "lgamma": lgamma,
        "kl_gauss_to_centered": {"mu": 0.5, "sigma": 0.3, "prior_std": 2.0, "value": f(kl)},
        "gamma_log_density": {"rho": 50.0, "shape": 100.0, "rate": 1.0, "value": f(log_density)},
        "gamma_expectations": {"shape": 100.0, "rate": 1.0, "mean": moments[0], "mean_log": moments[1]},
    }


def grid_marginals(rows, cols, stay, init_active, unary):
    n = rows * cols
    t = [[mp.mpf(stay), 1 - mp.mpf(stay)], [1 - mp.mpf(stay), mp.mpf(stay)]]
    on = [mp.mpf(0)] * n
    z = mp.mpf(0)
    for cfg in itertools.product((0, 1), repeat=n):
        p = mp.mpf(init_active) if cfg[0] else 1 - mp.mpf(init_active)
        for r in range(rows):
            for c in range(cols):
                k = r * cols + c
                u = mp.mpf(unary[k])
                p *= u if cfg[k] else 1 - u
                if c + 1 < cols:
                    p *= t[cfg[k]][cfg[k + 1]]
                if r + 1 < rows:
                    p *= t[cfg[k]][cfg[k + cols]]
        z += p
        for k in range(n):
            if cfg[k]:
                on[k] += p
    return [f(v / z) for v in on]


def grid_cases():
    cases = []
    for stay in (0.7, 0.95):
        for seed in range(10):
            unary = uniforms(seed, 9, 0.05, 0.95)
            cases.append({"rows": 3, "cols": 3, "seed": seed, "stay": stay, "init_active": 0.5,
                          "unary": unary, "marginals": grid_marginals(3, 3, stay, 0.5, unary)})
    return cases


def loss_case():
    """Client loss on a 6-5-3 ReLU net with an 8-record batch."""
    widths = [6, 5, 3]
    n_w = sum(widths[i] * widths[i + 1] for i in range(len(widths) - 1))
    n_b = sum(widths[1:])
    u = iter(uniforms(2024, 3 * n_w + n_b + 8 * widths[0] + 8 + 1, 0.0, 1.0))
    mu = [0.8 * (next(u) - 0.5) for _ in range(n_w)]
    bias = [0.4 * (next(u) - 0.5) for _ in range(n_b)]
    prior_std = [0.2 + next(u) for _ in range(n_w)]
    eps = [2.0 * (next(u) - 0.5) for _ in range(n_w)]
    x = [[4.0 * (next(u) - 0.5) for _ in range(widths[0])] for _ in range(8)]
    y = [min(int(next(u) * widths[-1]), widths[-1] - 1) for _ in range(8)]
    sigma = 0.05 + 0.1 * next(u)
    client_weight, local_records = 0.25, 200.0

    kl = mp.mpf(0)
    for m, s in zip(mu, prior_std):
        m, s, sg = mp.mpf(m), mp.mpf(s), mp.mpf(sigma)
        kl += mp.log(s / sg) + (sg**2 + m**2) / (2 * s**2) - mp.mpf("0.5")
    bias_prior = sum(mp.mpf(b) ** 2 for b in bias) / 2
    w = [mp.mpf(m) + mp.mpf(sigma) * mp.mpf(e) for m, e in zip(mu, eps)]
    ce = mp.mpf(0)
    for row, label in zip(x, y):
        a = [mp.mpf(v) for v in row]
        wo = bo = 0
        for l in range(len(widths) - 1):
            r, c = widths[l], widths[l + 1]
            z = [mp.mpf(bias[bo + j]) + sum(a[i] * w[wo + i * c + j] for i in range(r)) for j in range(c)]
            if l + 2 < len(widths):
                z = [max(v, mp.mpf(0)) for v in z]
            a = z
            wo += r * c
            bo += c
        ce += mp.log(sum(mp.exp(v) for v in a)) - a[label]
    data = (mp.mpf(local_records) / client_weight) / 8 * ce
    return {"layers": widths, "mu": mu, "bias": bias, "prior_std": prior_std, "sigma": sigma, "eps": eps,
            "features": x, "labels": y, "client_weight": client_weight, "local_records": local_records,
            "kl": f(kl), "bias_prior": f(bias_prior), "data": f(data), "total": f(kl + bias_prior + data)}


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for name, payload in (("math_values", math_values()), ("grid_3x3", grid_cases()), ("loss_case", loss_case())):
        path = OUT / f"{name}.json"
        path.write_text(json.dumps(payload, indent=1) + "\n")
        print("wrote", path)


if __name__ == "__main__":
    main()
