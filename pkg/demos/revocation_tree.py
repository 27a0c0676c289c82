"""Eight users, two of them revoked: which tree nodes the update key covers and who is still served.

Leaves are numbered 1..8 left to right, the level above 9..12, then 13, 14 and the root.

Run:  python demos/revocation_tree.py
"""

from srpe import scheme
from srpe.cs_method import BinaryTreeState, RevocationList, cover_check, ku_nodes, path
from srpe.gauss import make_rng
from srpe.params import sys as sysparams
from srpe.scheme import Epoch

# heap index <-> display label
to_heap = {**{i: 7 + i for i in range(1, 9)}, 9: 4, 10: 5, 11: 6, 12: 7, 13: 2, 14: 3, "root": 1}
to_label = {v: k for k, v in to_heap.items()}

state, rl = BinaryTreeState.for_users(8), RevocationList()
for i in range(1, 9):
    state.assign_leaf(f"u{i}")
for i in (2, 4):
    rl.add(to_heap[i], 0)

print("revoked leaves:", [to_label[v] for v in sorted(rl.revoked_leaves(0))])
print("cover:", sorted(to_label[v] for v in ku_nodes(state, rl, 0)))
print("path of leaf 4:", [to_label[v] for v in path(state, to_heap[4])])
for i in range(1, 9):
    hit = cover_check(state, rl, 0, to_heap[i])
    print(f"  leaf {i}: " + ("revoked" if hit is None else f"served through node {to_label[hit]}"))

# the same thing with real keys at the toy parameters
p = sysparams("toy")
rng = make_rng(7)
pp, msk, _, _ = scheme.setup(p, rng)
x, y = [1, 1, 1, 1], [1, -1, 2, -2]
toks = {i: scheme.token(p, pp, msk, f"u{i}", x, state, rng) for i in (2, 4, 5)}
sk5 = scheme.user_kg(p, pp, msk, "u5", x, rng)
uk = scheme.upd_kg(p, pp, msk, Epoch.of(0), rl, state, rng)
for i, tok in toks.items():
    tk = scheme.tran_kg(tok, uk)
    print(f"server, u{i}: " + ("no transform key" if tk is None else f"key via node {to_label[tk.node]}"))
ct = scheme.enc(p, pp, y, Epoch.of(0), 1, rng)
print("u5 decrypts:", scheme.dec(p, scheme.transform(p, ct, scheme.tran_kg(toks[5], uk)), sk5))
