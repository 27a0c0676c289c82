"""Encrypt one bit to a user through the server, then try a user whose predicate does not match.

Run:  python demos/round_trip.py
"""

import time

import numpy as np

from srpe import scheme
from srpe.gauss import make_rng
from srpe.params import sys as sysparams
from srpe.scheme import Epoch

p = sysparams("toy")
print(p.banner)
print(f"n={p.n}  m={p.m}  q={p.q}  s={p.s}  users={p.N}  attribute length={p.ell}")

rng = make_rng(2024)
t0 = time.perf_counter()
pp, msk, rl, state = scheme.setup(p, rng)
print(f"setup: {time.perf_counter() - t0:.2f}s, public parameters {p.pp_bits / 8 / 2**20:.1f} MiB")

# predicate vector x for alice; an attribute y is accepted when <x, y> = 0 mod q
x = [3, 1, 4, 1]
y_ok = [1, -3, 0, 0]
y_bad = [1, 1, 1, 1]
print("<x, y_ok>  =", int(np.dot(x, y_ok)) % p.q)
print("<x, y_bad> =", int(np.dot(x, y_bad)) % p.q)

sk = scheme.user_kg(p, pp, msk, "alice", x, rng)        # stays with alice
tok = scheme.token(p, pp, msk, "alice", x, state, rng)  # handed to the server
print(f"user key Z: {sk.Z.shape}, token nodes (root first): {sorted(tok.entries)}")

ep = Epoch.of(1)
uk = scheme.upd_kg(p, pp, msk, ep, rl, state, rng)       # broadcast for epoch 1
tk = scheme.tran_kg(tok, uk)                             # server side
print(f"update key covers {sorted(uk.entries)}; transform key built from node {tk.node}")

for M in (0, 1):
    ct = scheme.enc(p, pp, y_ok, ep, M, rng)
    pct = scheme.transform(p, ct, tk)
    print(f"M={M}: ciphertext {ct.size} Z_q entries -> partial {pct.size}; alice reads {scheme.dec(p, pct, sk)}")

ct = scheme.enc(p, pp, y_bad, ep, 1, rng)
print("attribute outside alice's predicate:", scheme.dec(p, scheme.transform(p, ct, tk), sk))
