"""Complete-subtree revocation over a binary tree.

Nodes use heap numbering: the root is 1, node ``v`` has children ``2v`` and
``2v + 1``, and a tree of depth ``d`` has leaves ``2^d .. 2^(d+1) - 1``.
Users get leaves left to right in registration order.  Each node may carry
a matrix ``U_theta`` that is drawn the first time it is needed and never
replaced afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable

STATE_VERSION = 1


class TreeError(ValueError):
    pass


class TreeFull(TreeError):
    pass


class DuplicateIdentity(TreeError):
    pass


class UnknownLeaf(TreeError):
    pass


def _key(identity) -> bytes:
    return identity.encode() if isinstance(identity, str) else bytes(identity)


@dataclass
class BinaryTreeState:
    depth: int
    capacity: int | None = None
    leaf_map: dict[bytes, int] = field(default_factory=dict)
    node_store: dict[int, object] = field(default_factory=dict)

    def __post_init__(self):
        if self.depth < 0:
            raise TreeError("depth must be non-negative")
        if self.capacity is None:
            self.capacity = self.num_leaves
        if self.capacity > self.num_leaves:
            raise TreeError(f"{self.capacity} users do not fit in {self.num_leaves} leaves")

    @classmethod
    def for_users(cls, N: int) -> "BinaryTreeState":
        """Smallest complete tree with at least N leaves."""
        if N < 1:
            raise TreeError("need at least one user")
        return cls((N - 1).bit_length(), N)

    @property
    def root(self) -> int:
        return 1

    @property
    def num_leaves(self) -> int:
        return 1 << self.depth

    @property
    def first_leaf(self) -> int:
        return 1 << self.depth

    def is_leaf(self, node: int) -> bool:
        return self.first_leaf <= node < 2 * self.first_leaf

    def leaves(self) -> range:
        return range(self.first_leaf, 2 * self.first_leaf)

    # users --------------------------------------------------------------

    def assign_leaf(self, identity) -> int:
        key = _key(identity)
        if key in self.leaf_map:
            raise DuplicateIdentity(f"identity {identity!r} is already registered")
        if len(self.leaf_map) >= self.capacity:
            raise TreeFull(f"tree full ({self.capacity} users)")
        leaf = self.first_leaf + len(self.leaf_map)
        self.leaf_map[key] = leaf
        return leaf

    def leaf_of(self, identity) -> int:
        try:
            return self.leaf_map[_key(identity)]
        except KeyError:
            raise UnknownLeaf(f"identity {identity!r} is not registered") from None

    def leaf_or_assign(self, identity) -> int:
        key = _key(identity)
        return self.leaf_map[key] if key in self.leaf_map else self.assign_leaf(key)

    # node matrices ------------------------------------------------------

    def set_node(self, node: int, value) -> None:
        if node in self.node_store:
            raise TreeError(f"node {node} already holds a matrix")
        self._check_node(node)
        self.node_store[node] = value

    def node_value(self, node: int, draw: Callable[[], object]):
        """Stored matrix of ``node``, drawing and storing it on first use."""
        if node not in self.node_store:
            self.set_node(node, draw())
        return self.node_store[node]

    def _check_node(self, node: int) -> None:
        if not 1 <= node < 2 * self.first_leaf:
            raise UnknownLeaf(f"node {node} is outside the tree")


def path(state: BinaryTreeState, leaf: int) -> list[int]:
    """Nodes from ``leaf`` up to the root, both included."""
    if not state.is_leaf(leaf):
        raise UnknownLeaf(f"{leaf} is not a leaf of a depth-{state.depth} tree")
    out = []
    while leaf >= 1:
        out.append(leaf)
        leaf //= 2
    return out


@dataclass
class RevocationList:
    """Set of (leaf, epoch) pairs; a leaf is revoked at every epoch >= its entry."""

    entries: set[tuple[int, int]] = field(default_factory=set)

    def add(self, leaf: int, epoch: int) -> None:
        self.entries.add((int(leaf), int(epoch)))

    def revoked_leaves(self, epoch: int) -> set[int]:
        return {leaf for leaf, t in self.entries if t <= epoch}

    def is_revoked(self, leaf: int, epoch: int) -> bool:
        return any(v == leaf and t <= epoch for v, t in self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(sorted(self.entries))


def ku_nodes(state: BinaryTreeState, rl: RevocationList, epoch: int) -> list[int]:
    """Minimal set of nodes covering every leaf not revoked at ``epoch`` (sorted)."""
    marked: set[int] = set()
    for leaf in rl.revoked_leaves(epoch):
        marked.update(path(state, leaf))
    cover = set()
    for node in marked:
        if state.is_leaf(node):
            continue
        for child in (2 * node, 2 * node + 1):
            if child not in marked:
                cover.add(child)
    if not cover:
        cover.add(state.root)
    return sorted(cover)


def served_nodes(state: BinaryTreeState, rl: RevocationList, epoch: int) -> list[int]:
    """``ku_nodes`` without nodes on a revoked leaf's path.

    The two differ only when every leaf is revoked: the empty-cover rule then
    yields the root, which lies on every path and must not be served.
    """
    blocked: set[int] = set()
    for leaf in rl.revoked_leaves(epoch):
        blocked.update(path(state, leaf))
    return [v for v in ku_nodes(state, rl, epoch) if v not in blocked]


def cover_check(state: BinaryTreeState, rl: RevocationList, epoch: int, leaf: int) -> int | None:
    """The node of ``Path(leaf)`` in the cover, or None if ``leaf`` is revoked."""
    if rl.is_revoked(leaf, epoch):
        return None
    common = set(path(state, leaf)) & set(served_nodes(state, rl, epoch))
    return min(common) if common else None


# ---------------------------------------------------------------------------
# text persistence

def dump_state(state: BinaryTreeState, rl: RevocationList, node_refs: dict[int, str]) -> str:
    """Versioned line format; ``node_refs`` maps node index to the file holding U_theta."""
    lines = [f"SRPE-STATE {STATE_VERSION}", f"DEPTH {state.depth} {state.capacity}"]
    for key, leaf in sorted(state.leaf_map.items(), key=lambda kv: kv[1]):
        lines.append(f"LEAF {key.hex()} {leaf}")
    for node in sorted(node_refs):
        lines.append(f"NODE {node} {node_refs[node]}")
    for leaf, epoch in rl:
        lines.append(f"RL {leaf} {epoch}")
    return "\n".join(lines) + "\n"


def load_state(text: str) -> tuple[BinaryTreeState, RevocationList, dict[int, str]]:
    """Inverse of :func:`dump_state`; node matrices are left for the caller to load."""
    rows: Iterable[list[str]] = (ln.split() for ln in text.splitlines() if ln.strip())
    rows = list(rows)
    if not rows or rows[0][:1] != ["SRPE-STATE"]:
        raise TreeError("not a tree state file")
    if int(rows[0][1]) != STATE_VERSION:
        raise TreeError(f"unsupported state version {rows[0][1]}")
    state = None
    rl = RevocationList()
    refs: dict[int, str] = {}
    for row in rows[1:]:
        tag = row[0]
        if tag == "DEPTH":
            state = BinaryTreeState(int(row[1]), int(row[2]))
        elif state is None:
            raise TreeError("DEPTH record must come first")
        elif tag == "LEAF":
            state.leaf_map[bytes.fromhex(row[1])] = int(row[2])
        elif tag == "NODE":
            refs[int(row[1])] = row[2]
        elif tag == "RL":
            rl.add(int(row[1]), int(row[2]))
        else:
            raise TreeError(f"unknown record {tag!r}")
    if state is None:
        raise TreeError("missing DEPTH record")
    return state, rl, refs
