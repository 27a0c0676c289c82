import numpy as np
import pytest

from oracles import (
    LABEL_TO_HEAP,
    combined_matrix,
    mod_matmul,
    satisfied_pair,
    tagged_matrix,
)
from srpe import scheme
from srpe.afv_pe import combine_signed, lwe_sample
from srpe.cs_method import BinaryTreeState, RevocationList, UnknownLeaf
from srpe.gauss import make_rng
from srpe.params import encode_id_time
from srpe.scheme import Epoch, EpochMismatch, SrpeTrace
from srpe.zq_linalg import ZqVector, centered, gadget_matrix


@pytest.fixture(scope="module")
def world(toy, srpe_system):
    pp, msk = srpe_system
    gen = make_rng(31)
    state = BinaryTreeState.for_users(toy.N)
    for i in range(1, 9):
        state.assign_leaf(f"u{i}")
    x, y = satisfied_pair(gen, toy.ell, toy.q)
    users = {}
    for label in (2, 4, 5):
        ident = f"u{label}"
        users[label] = (scheme.user_kg(toy, pp, msk, ident, x, gen),
                        scheme.token(toy, pp, msk, ident, x, state, gen))
    return dict(pp=pp, msk=msk, state=state, x=x, y=y, users=users, gen=gen)


def D_id(toy, pp, ident):
    return tagged_matrix(pp.D.data, encode_id_time(ident, toy.n, toy.q).data, toy.frd_poly, toy.q)


def C_t(toy, pp, epoch):
    return tagged_matrix(pp.C.data, encode_id_time(epoch.label, toy.n, toy.q).data, toy.frd_poly, toy.q)


def test_setup(toy, srpe_system):
    pp, msk = srpe_system
    assert not mod_matmul(pp.A.data, msk.T_A.basis, toy.q).any()
    assert not mod_matmul(pp.B.data, msk.T_B.basis, toy.q).any()
    entries = sum(M.data.size for M in pp.matrices())
    assert entries * toy.k == toy.pp_bits
    _, _, rl, state = scheme.setup(toy.replace(N=5), make_rng(1))
    assert len(rl) == 0 and state.num_leaves == 8


def test_identity_and_epoch_matrices(toy, srpe_system):
    pp, _ = srpe_system
    assert scheme.identity_matrix(toy, pp, "u1").data.tolist() == D_id(toy, pp, "u1").tolist()
    ep = Epoch.of(3)
    assert scheme.epoch_matrix(toy, pp, ep).data.tolist() == C_t(toy, pp, ep).tolist()
    assert scheme.identity_matrix(toy, pp, "u1") != scheme.identity_matrix(toy, pp, "u2")


def test_user_key_relation(toy, world):
    pp = world["pp"]
    for label, (sk, _) in world["users"].items():
        B_x = combined_matrix([b.data for b in pp.B_i], world["x"], toy.n, toy.q)
        F = np.concatenate([pp.B.data, B_x, D_id(toy, pp, f"u{label}")], axis=1)
        assert sk.Z.shape == (3 * toy.m, toy.kappa)
        assert mod_matmul(F, sk.Z, toy.q).tolist() == pp.V.data.tolist()
        assert (np.linalg.norm(sk.Z, axis=0) <= toy.s * np.sqrt(3 * toy.m)).all()
        assert scheme.check_user_key(toy, pp, sk)


def test_user_key_zero_predicate(toy, world, rng):
    sk = scheme.user_kg(toy, world["pp"], world["msk"], "zero", [0] * toy.ell, rng)
    assert scheme.check_user_key(toy, world["pp"], sk)


def test_token_relation_and_size(toy, world):
    pp, state = world["pp"], world["state"]
    A_x = combined_matrix([a.data for a in pp.A_i], world["x"], toy.n, toy.q)
    F = np.concatenate([pp.A.data, A_x], axis=1)
    for label, (_, tok) in world["users"].items():
        assert sorted(tok.entries, reverse=True) == [LABEL_TO_HEAP[label], *[LABEL_TO_HEAP[label] >> i for i in (1, 2, 3)]]
        assert len(tok.entries) == toy.depth + 1
        target_base = D_id(toy, pp, f"u{label}")
        for node, Z1 in tok.entries.items():
            want = (target_base - state.node_store[node].data) % toy.q
            assert mod_matmul(F, Z1, toy.q).tolist() == want.tolist()
        assert scheme.check_token(toy, pp, tok, state)


def test_token_reuses_node_matrices(toy, world):
    pp, msk, state = world["pp"], world["msk"], world["state"]
    before = dict(state.node_store)
    # u3 is the sibling leaf of u4: only its own leaf is new
    scheme.token(toy, pp, msk, "u3", world["x"], state, make_rng(2))
    for node, U in before.items():
        assert state.node_store[node] is U
    assert set(state.node_store) - set(before) == {LABEL_TO_HEAP[3]}


def test_update_key(toy, world):
    pp, msk, state = world["pp"], world["msk"], world["state"]
    ep = Epoch.of(1)
    uk = scheme.upd_kg(toy, pp, msk, ep, RevocationList(), state, make_rng(3))
    assert list(uk.entries) == [1]
    F = np.concatenate([pp.A.data, C_t(toy, pp, ep)], axis=1)
    assert mod_matmul(F, uk.entries[1], toy.q).tolist() == state.node_store[1].data.tolist()


def test_update_key_draws_unseen_nodes(toy, srpe_system):
    pp, msk = srpe_system
    state = BinaryTreeState.for_users(8)
    rl = RevocationList()
    rl.add(8, 0)
    uk = scheme.upd_kg(toy, pp, msk, Epoch.of(0), rl, state, make_rng(4))
    assert sorted(uk.entries) == [3, 5, 9]
    assert set(state.node_store) == {3, 5, 9}
    assert scheme.check_update_key(toy, pp, uk, state)


def test_two_revoked_transform_keys(toy, world):
    pp, msk, state = world["pp"], world["msk"], world["state"]
    rl = RevocationList()
    ep = Epoch.of(7)
    for label in (2, 4):
        scheme.revoke(state, rl, f"u{label}", ep)
    uk = scheme.upd_kg(toy, pp, msk, ep, rl, state, make_rng(5))
    assert sorted(uk.entries) == sorted(LABEL_TO_HEAP[v] for v in (1, 3, 14))
    tk = scheme.tran_kg(world["users"][5][1], uk)
    assert tk.node == LABEL_TO_HEAP[14]
    A_x = combined_matrix([a.data for a in pp.A_i], world["x"], toy.n, toy.q)
    left = mod_matmul(np.concatenate([pp.A.data, A_x], axis=1), tk.Z1, toy.q)
    right = mod_matmul(np.concatenate([pp.A.data, C_t(toy, pp, ep)], axis=1), tk.Z2, toy.q)
    assert ((left + right) % toy.q).tolist() == D_id(toy, pp, "u5").tolist()
    assert scheme.tran_kg(world["users"][4][1], uk) is None
    assert scheme.tran_kg(world["users"][2][1], uk) is None


def test_revocation_epochs(toy, world):
    pp, msk, state = world["pp"], world["msk"], world["state"]
    rl = RevocationList()
    scheme.revoke(state, rl, "u4", 5)
    scheme.revoke(state, rl, "u4", 5)
    assert len(rl) == 1
    tok = world["users"][4][1]
    uk4 = scheme.upd_kg(toy, pp, msk, Epoch.of(4), rl, state, make_rng(6))
    uk5 = scheme.upd_kg(toy, pp, msk, Epoch.of(5), rl, state, make_rng(7))
    assert scheme.tran_kg(tok, uk4) is not None
    assert scheme.tran_kg(tok, uk5) is None
    with pytest.raises(UnknownLeaf):
        scheme.revoke(state, rl, "nobody", 1)


def test_everyone_revoked_gets_nothing(toy, world):
    pp, msk, state = world["pp"], world["msk"], world["state"]
    rl = RevocationList()
    for label in range(1, 9):
        scheme.revoke(state, rl, f"u{label}", 9)
    uk = scheme.upd_kg(toy, pp, msk, Epoch.of(9), rl, state, make_rng(8))
    assert uk.entries == {}
    assert all(scheme.tran_kg(tok, uk) is None for _, tok in world["users"].values())


def test_ciphertext_shapes_and_noiseless(toy, world, rng):
    pp = world["pp"]
    tr = SrpeTrace()
    ct = scheme.enc(toy, pp, world["y"], Epoch.of(1), 0, rng, noise="zero", trace=tr)
    assert ct.size == toy.kappa + (2 * toy.ell + 3) * toy.m
    assert ct.c.data.tolist() == mod_matmul(pp.V.data.T, tr.s.data, toy.q).tolist()
    tk = scheme.tran_kg(world["users"][5][1], scheme.upd_kg(
        toy, pp, world["msk"], Epoch.of(1), RevocationList(), world["state"], rng))
    pct = scheme.transform(toy, ct, tk)
    assert pct.size == toy.kappa + (toy.ell + 2) * toy.m
    assert len(pct.cbar) == toy.m


def test_transform_white_box_and_round_trip(toy, world, rng):
    pp, msk, state = world["pp"], world["msk"], world["state"]
    ep = Epoch.of(2)
    tk = scheme.tran_kg(world["users"][5][1], scheme.upd_kg(toy, pp, msk, ep, RevocationList(), state, rng))
    sk = world["users"][5][0]
    q, n = toy.q, toy.n
    for M in (0, 1):
        tr = SrpeTrace()
        ct = scheme.enc(toy, pp, world["y"], ep, M, rng, trace=tr)
        pct = scheme.transform(toy, ct, tk)
        R_x = combine_signed(tr.R_i, world["x"], n, q)
        err1 = np.concatenate([tr.e1, R_x.T @ tr.e1])
        err2 = np.concatenate([tr.e1, tr.R_bar.T @ tr.e1])
        err = tk.Z1.T @ err1 + tk.Z2.T @ err2
        want = (mod_matmul(D_id(toy, pp, "u5").T, tr.s.data, q) + err) % q
        assert pct.cbar.data.tolist() == want.tolist()
        assert scheme.dec(toy, pct, sk) == M


def test_transform_epoch_mismatch(toy, world, rng):
    pp, msk, state = world["pp"], world["msk"], world["state"]
    tk = scheme.tran_kg(world["users"][5][1], scheme.upd_kg(toy, pp, msk, Epoch.of(2), RevocationList(), state, rng))
    ct = scheme.enc(toy, pp, world["y"], Epoch.of(3), 1, rng)
    with pytest.raises(EpochMismatch):
        scheme.transform(toy, ct, tk)


def test_wrong_user_key_fails(toy, world, rng):
    pp, msk, state = world["pp"], world["msk"], world["state"]
    ep = Epoch.of(2)
    tk = scheme.tran_kg(world["users"][5][1], scheme.upd_kg(toy, pp, msk, ep, RevocationList(), state, rng))
    other_sk = world["users"][4][0]
    results = [scheme.dec(toy, scheme.transform(toy, scheme.enc(toy, pp, world["y"], ep, 1, rng), tk), other_sk)
               for _ in range(10)]
    assert results == [None] * 10


def test_shared_secret_mutation_breaks_decryption(toy, world, rng):
    # re-encrypt the c2 family under a fresh s': decryption must fail
    pp, msk, state = world["pp"], world["msk"], world["state"]
    ep = Epoch.of(2)
    tk = scheme.tran_kg(world["users"][5][1], scheme.upd_kg(toy, pp, msk, ep, RevocationList(), state, rng))
    sk = world["users"][5][0]
    G = gadget_matrix(toy.n, toy.m, toy.q)
    outcomes = []
    for t in range(20):
        M = t % 2
        tr = SrpeTrace()
        ct = scheme.enc(toy, pp, world["y"], ep, M, rng, trace=tr)
        assert scheme.dec(toy, scheme.transform(toy, ct, tk), sk) == M
        s2 = ZqVector.uniform(toy.n, toy.q, rng)
        c2 = lwe_sample(pp.B, s2, tr.e2)
        c2_i = tuple(lwe_sample(b + G.scale(int(yi)), s2, S.T @ tr.e2)
                     for b, yi, S in zip(pp.B_i, world["y"], tr.S_i))
        mutated = type(ct)(ct.epoch, ct.c, ct.c1, ct.c1_i, ct.c10, c2, c2_i)
        outcomes.append(scheme.dec(toy, scheme.transform(toy, mutated, tk), sk))
    assert outcomes == [None] * 20


def test_decryption_error_decomposition(toy, world, rng):
    pp, msk, state = world["pp"], world["msk"], world["state"]
    ep = Epoch.of(2)
    tk = scheme.tran_kg(world["users"][5][1], scheme.upd_kg(toy, pp, msk, ep, RevocationList(), state, rng))
    sk = world["users"][5][0]
    q = toy.q
    tr = SrpeTrace()
    ct = scheme.enc(toy, pp, world["y"], ep, 1, rng, noise="max", trace=tr)
    d = scheme.decrypt_vector(toy, scheme.transform(toy, ct, tk), sk)
    S_x = combine_signed(tr.S_i, world["x"], toy.n, q)
    R_x = combine_signed(tr.R_i, world["x"], toy.n, q)
    err_p = tk.Z1.T @ np.concatenate([tr.e1, R_x.T @ tr.e1]) + tk.Z2.T @ np.concatenate([tr.e1, tr.R_bar.T @ tr.e1])
    error = tr.e - sk.Z.T @ np.concatenate([tr.e2, S_x.T @ tr.e2, err_p])
    want = ((q // 2) * np.eye(toy.kappa, dtype=np.int64)[0] + error) % q
    assert d.data.tolist() == want.tolist()
    assert np.abs(centered(d.data - (q // 2) * np.eye(toy.kappa, dtype=np.int64)[0], q)).max() < q / 5


def test_epoch_labels():
    assert Epoch.of(3).label == b"epoch-3"
    assert Epoch.of(3, "march") != Epoch.of(3)
