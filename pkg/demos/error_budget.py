"""How much room the toy parameters leave: decryption noise against the q/5 rounding budget.

Run:  python demos/error_budget.py
"""

import numpy as np

from srpe import scheme
from srpe.gauss import make_rng
from srpe.params import sys as sysparams
from srpe.scheme import Epoch
from srpe.zq_linalg import centered, encode_message

p = sysparams("toy")
rng = make_rng(11)
pp, msk, rl, state = scheme.setup(p, rng)
x, y = [2, 0, 1, 5], [1, 7, -2, 0]
sk = scheme.user_kg(p, pp, msk, "carol", x, rng)
tk = scheme.tran_kg(scheme.token(p, pp, msk, "carol", x, state, rng),
                    scheme.upd_kg(p, pp, msk, Epoch.of(1), rl, state, rng))

worst = {}
for mode in ("chi", "max"):
    errs = []
    for t in range(20):
        M = t % 2
        ct = scheme.enc(p, pp, y, Epoch.of(1), M, rng, noise=mode)
        d = scheme.decrypt_vector(p, scheme.transform(p, ct, tk), sk)
        errs.append(np.abs(centered(d.data - encode_message(M, p.kappa) * (p.q // 2), p.q)).max())
    worst[mode] = max(errs)
    print(f"noise={mode:>3}: max |error| over 20 decryptions = {worst[mode]:.3e}")

print(f"budget q/5 = {p.q / 5:.3e}")
print(f"worst case uses {worst['max'] / (p.q / 5):.1%} of the budget")
