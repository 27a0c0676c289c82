"""Size q for a profile by measuring the decryption error of the full pipeline.

Starting from a guess, build parameters, run setup / keys / tokens / update
keys / transform / decrypt with chi noise, zero noise and max noise, take
the largest |error| seen, multiply by a safety factor of 8 and set q to the
next prime above 5 times that.  Repeat until m stops changing.  Prints the
values to pin in ``srpe.params``.

    python scripts/size_profiles.py toy
"""

import argparse
import math
import time

import numpy as np
from sympy import nextprime

from srpe import scheme
from srpe.gauss import make_rng
from srpe.params import build
from srpe.zq_linalg import ceil_log2, centered, encode_message

SAFETY = 8
BASES = {"toy": dict(n=8, N=8, ell=4, kappa=16), "small": dict(n=16, N=64, ell=4, kappa=16)}


def satisfied_pair(rng, ell, q):
    x = rng.integers(1, q, ell)
    y = rng.integers(0, q, ell)
    head = sum(int(a) * int(b) for a, b in zip(x[:-1], y[:-1]))
    y[-1] = (-head * pow(int(x[-1]), -1, q)) % q
    return x, y


def measure(base, q, users, trials, rng):
    params = build(q=q, omega_const=1e-12, **base)
    pp, msk, rl, state = scheme.setup(params, rng)
    worst = 0
    epochs = [scheme.Epoch.of(0), scheme.Epoch.of(1)]
    for u in range(users):
        ident = f"user-{u}"
        x, y = satisfied_pair(rng, params.ell, q)
        sk = scheme.user_kg(params, pp, msk, ident, x, rng)
        tok = scheme.token(params, pp, msk, ident, x, state, rng)
        for ep in epochs:
            uk = scheme.upd_kg(params, pp, msk, ep, rl, state, rng)
            tk = scheme.tran_kg(tok, uk)
            for mode in ("chi", "max", "zero"):
                for _ in range(trials):
                    M = int(rng.integers(0, 2))
                    ct = scheme.enc(params, pp, y, ep, M, rng, noise=mode)
                    d = scheme.decrypt_vector(params, scheme.transform(params, ct, tk), sk)
                    err = centered(d.data - encode_message(M, params.kappa) * (q // 2), q)
                    worst = max(worst, int(np.abs(err).max()))
    return params, worst


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("profile", choices=sorted(BASES))
    ap.add_argument("--users", type=int, default=3)
    ap.add_argument("--trials", type=int, default=10)
    ap.add_argument("--seed", default="5eed")
    args = ap.parse_args()
    base = BASES[args.profile]
    rng = make_rng(args.seed)
    q = int(nextprime(2**30))
    for it in range(10):
        t0 = time.time()
        params, worst = measure(base, q, args.users, args.trials, rng)
        budget = SAFETY * worst
        q_new = int(nextprime(5 * budget))
        print(f"iter {it}: q={q} (k={params.k}, m={params.m}, s={params.s}) max|error|={worst} "
              f"-> q'={q_new} (k={ceil_log2(q_new)})  [{time.time() - t0:.1f}s]")
        done = ceil_log2(q_new) == params.k
        q = q_new
        if done:
            break
    final = build(q=q, omega_const=1e-12, **base)
    omega = SAFETY * worst / (final.s * final.ell * final.m**2 * final.B)
    # round down so the pinned budget stays strictly under q/5
    omega = math.floor(omega * 1e4) / 1e4
    print(f"pin: q={q}, omega_const={omega}, m={final.m}, s={final.s}, B={final.B}")


if __name__ == "__main__":
    main()
