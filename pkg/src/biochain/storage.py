"""Template storage schemes over the chain simulator.

Three schemes: full on-chain (payload stored as-is), data hashing
(payload off-chain, 256-bit digest on-chain), and Merkle tree (payload
off-chain, one shared root slot on-chain). The digest function is
SHA3-256 throughout.

The Merkle scheme keeps the root record alive from the moment the first
template arrives: a one-time anchor transaction creates the root slot,
and every template store afterwards (including the very first) is a
root update, so per-template on-chain gas is constant.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from .chain import GasReceipt, SimulatedChain
from .errors import (
    AvailabilityError,
    DimensionError,
    DuplicateUserError,
    ProofError,
    RangeError,
    UserNotFoundError,
)

DIGEST_BYTES = 32

# Reserved chain user id holding the Merkle root record.
MERKLE_ROOT_KEY = (1 << 256) - 1


def digest(data: bytes) -> bytes:
    """SHA3-256 digest (FIPS 202), 32 bytes."""
    return hashlib.sha3_256(data).digest()


EMPTY_ROOT = digest(b"")


def _check_digest(value: bytes, what: str = "digest"):
    if not isinstance(value, bytes) or len(value) != DIGEST_BYTES:
        raise DimensionError(f"{what} must be {DIGEST_BYTES} bytes")


def tree_height(n_leaves: int) -> int:
    h = 0
    width = n_leaves
    while width > 1:
        width = (width + 1) // 2
        h += 1
    return h


@dataclass(frozen=True)
class MerkleProof:
    leaf_index: int
    n_leaves: int
    siblings: tuple  # of (digest, "left" | "right"), leaf level first
    claimed_root: bytes

    def __post_init__(self):
        object.__setattr__(self, "siblings", tuple((bytes(d), s) for d, s in self.siblings))


class MerkleTree:
    """Binary hash tree over 256-bit leaf digests; odd levels duplicate the last node."""

    def __init__(self, leaves=()):
        self.leaves: list[bytes] = []
        self.levels: list[list[bytes]] = [self.leaves]
        for leaf in leaves:
            self.set(len(self.leaves), leaf)

    def __len__(self):
        return len(self.leaves)

    @property
    def root(self) -> bytes:
        if not self.leaves:
            return EMPTY_ROOT
        return self.levels[-1][0]

    @property
    def height(self) -> int:
        return tree_height(len(self.leaves))

    def _rebuild(self):
        self.levels = [self.leaves]
        cur = self.leaves
        while len(cur) > 1:
            nxt = []
            for i in range(0, len(cur), 2):
                left = cur[i]
                right = cur[i + 1] if i + 1 < len(cur) else left
                nxt.append(digest(left + right))
            self.levels.append(nxt)
            cur = nxt

    def _update_path(self, index: int):
        level, i = 0, index
        while len(self.levels[level]) > 1:
            cur = self.levels[level]
            next_len = (len(cur) + 1) // 2
            if level + 1 == len(self.levels):
                self.levels.append([b""] * next_len)
            nxt = self.levels[level + 1]
            if len(nxt) < next_len:
                nxt.extend([b""] * (next_len - len(nxt)))
            elif len(nxt) > next_len:
                del nxt[next_len:]
            p = i // 2
            left = cur[2 * p]
            right = cur[2 * p + 1] if 2 * p + 1 < len(cur) else left
            nxt[p] = digest(left + right)
            level, i = level + 1, p
        del self.levels[level + 1:]

    def set(self, index: int, leaf_digest: bytes) -> bytes:
        """Write (index < size) or append (index == size) a leaf; returns the new root."""
        _check_digest(leaf_digest, "leaf")
        if not 0 <= index <= len(self.leaves):
            raise RangeError(f"index {index} outside [0, {len(self.leaves)}]")
        if index == len(self.leaves):
            self.leaves.append(leaf_digest)
        else:
            self.leaves[index] = leaf_digest
        self._update_path(index)
        return self.root

    def remove(self, index: int) -> bytes:
        """Delete a leaf; later leaves shift left. Returns the new root."""
        if not 0 <= index < len(self.leaves):
            raise RangeError(f"index {index} outside [0, {len(self.leaves)})")
        del self.leaves[index]
        self._rebuild()
        return self.root

    def prove(self, index: int) -> MerkleProof:
        if not 0 <= index < len(self.leaves):
            raise RangeError(f"index {index} outside [0, {len(self.leaves)})")
        siblings = []
        i = index
        for level in self.levels[:-1]:
            if i % 2 == 0:
                sib = level[i + 1] if i + 1 < len(level) else level[i]
                siblings.append((sib, "right"))
            else:
                siblings.append((level[i - 1], "left"))
            i //= 2
        return MerkleProof(index, len(self.leaves), tuple(siblings), self.root)

    def to_text(self) -> str:
        """Leaf digests in order, hex-encoded, one per line."""
        return "\n".join(leaf.hex() for leaf in self.leaves) + ("\n" if self.leaves else "")

    @classmethod
    def from_text(cls, text: str) -> "MerkleTree":
        leaves = [bytes.fromhex(line.strip()) for line in text.splitlines() if line.strip()]
        return cls(leaves)


def fold_proof(leaf_digest: bytes, siblings) -> bytes:
    """Combine a leaf with its siblings bottom-up into a root digest."""
    node = leaf_digest
    for sib, side in siblings:
        _check_digest(sib, "sibling")
        if side == "left":
            node = digest(sib + node)
        elif side == "right":
            node = digest(node + sib)
        else:
            raise ProofError(f"sibling side must be 'left' or 'right', got {side!r}")
    return node


def merkle_verify(proof: MerkleProof, leaf_digest: bytes) -> bool:
    """True iff the leaf folds through the siblings to the claimed root."""
    _check_digest(leaf_digest, "leaf")
    expected = tree_height(proof.n_leaves)
    if len(proof.siblings) != expected:
        raise ProofError(
            f"proof for a {proof.n_leaves}-leaf tree needs {expected} siblings, "
            f"got {len(proof.siblings)}"
        )
    return fold_proof(leaf_digest, proof.siblings) == proof.claimed_root


class OffChainStore:
    """Directory-backed byte store: one file per user id plus an index file."""

    def __init__(self, directory):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._index_path = self.directory / "index.json"
        if not self._index_path.exists():
            self._write_index([])

    def _read_index(self):
        return json.loads(self._index_path.read_text())

    def _write_index(self, users):
        self._index_path.write_text(json.dumps(sorted(users)))

    def _path(self, user: int) -> Path:
        return self.directory / f"{int(user)}.bin"

    def users(self):
        return [int(u) for u in self._read_index()]

    def put(self, user: int, payload: bytes):
        self._path(user).write_bytes(payload)
        users = set(self._read_index())
        users.add(int(user))
        self._write_index(users)

    def get(self, user: int) -> bytes:
        path = self._path(user)
        if not path.exists():
            raise AvailabilityError(f"off-chain data for user {user} is missing")
        return path.read_bytes()

    def delete(self, user: int):
        path = self._path(user)
        if not path.exists():
            raise AvailabilityError(f"off-chain data for user {user} is missing")
        path.unlink()
        users = set(self._read_index())
        users.discard(int(user))
        self._write_index(users)

    def tamper(self, user: int, byte_index: int, xor_mask: int = 0xFF):
        """Test hook: flip bits of one stored byte in place."""
        data = bytearray(self.get(user))
        if not 0 <= byte_index < len(data):
            raise RangeError(f"byte index {byte_index} outside payload of {len(data)} bytes")
        if not 1 <= xor_mask <= 0xFF:
            raise RangeError("xor mask must change at least one bit of one byte")
        data[byte_index] ^= xor_mask
        self._path(user).write_bytes(bytes(data))


class SchemeKind(enum.Enum):
    FULL_ONCHAIN = "onchain"
    DATA_HASHING = "hash"
    MERKLE_TREE = "merkle"

    @classmethod
    def parse(cls, name: str) -> "SchemeKind":
        for kind in cls:
            if kind.value == name:
                return kind
        raise RangeError(f"unknown scheme {name!r}; pick one of "
                         + ", ".join(k.value for k in cls))


class TemplateStore:
    """One storage scheme bound to a chain, an off-chain store and a Merkle tree."""

    def __init__(self, scheme: SchemeKind, chain: SimulatedChain,
                 offchain: OffChainStore | None = None, tree: MerkleTree | None = None,
                 root_key: int = MERKLE_ROOT_KEY):
        self.scheme = scheme
        self.chain = chain
        self.offchain = offchain
        self.tree = tree if tree is not None else MerkleTree()
        self.root_key = root_key
        self.leaf_index: dict[int, int] = {}
        if scheme is not SchemeKind.FULL_ONCHAIN and offchain is None:
            raise AvailabilityError(f"scheme {scheme.value} needs an off-chain store")

    def _ensure_anchor(self):
        if self.root_key not in self.chain.records:
            self.chain.create(self.root_key, self.tree.root)

    def store_template(self, user: int, payload: bytes, metadata: bytes = b"",
                       latency_class: str = "create") -> GasReceipt:
        """Store one template; returns the per-template on-chain receipt."""
        if self.scheme is SchemeKind.FULL_ONCHAIN:
            return self.chain.create(user, payload, metadata, latency_class)
        if self.scheme is SchemeKind.DATA_HASHING:
            self.offchain.put(user, payload)
            return self.chain.create(user, digest(payload), metadata, latency_class)
        # Merkle: the anchor transaction is one-time; the template itself
        # only ever costs a root update.
        if user in self.leaf_index:
            raise DuplicateUserError(f"user {user} already has a template leaf")
        self._ensure_anchor()
        self.offchain.put(user, payload)
        index = len(self.tree)
        new_root = self.tree.set(index, digest(payload))
        self.leaf_index[user] = index
        return self.chain.modify(self.root_key, new_root, latency_class="modify")

    def _require_known(self, user: int):
        if self.scheme is SchemeKind.MERKLE_TREE:
            if user not in self.leaf_index:
                raise UserNotFoundError(f"no template stored for user {user}")
        else:
            if user not in self.chain.records:
                raise UserNotFoundError(f"no template stored for user {user}")

    def verify_integrity(self, user: int) -> bool:
        """Check the off-chain payload against its on-chain anchor.

        Missing off-chain data raises :class:`AvailabilityError`; a False
        return always means the data was there but did not match.
        """
        self._require_known(user)
        if self.scheme is SchemeKind.FULL_ONCHAIN:
            self.chain.retrieve(user)
            return True
        if self.scheme is SchemeKind.DATA_HASHING:
            payload = self.offchain.get(user)
            record, _ = self.chain.retrieve(user)
            return digest(payload) == record.payload
        payload = self.offchain.get(user)
        proof = self.tree.prove(self.leaf_index[user])
        record, _ = self.chain.retrieve(self.root_key)
        return fold_proof(digest(payload), proof.siblings) == record.payload

    def load_template(self, user: int) -> bytes:
        self._require_known(user)
        if self.scheme is SchemeKind.FULL_ONCHAIN:
            record, _ = self.chain.retrieve(user)
            return record.payload
        return self.offchain.get(user)

    def delete_template(self, user: int) -> GasReceipt:
        self._require_known(user)
        if self.scheme is SchemeKind.FULL_ONCHAIN:
            return self.chain.delete(user)
        if self.scheme is SchemeKind.DATA_HASHING:
            receipt = self.chain.delete(user)
            self.offchain.delete(user)
            return receipt
        index = self.leaf_index.pop(user)
        new_root = self.tree.remove(index)
        for other, i in self.leaf_index.items():
            if i > index:
                self.leaf_index[other] = i - 1
        self.offchain.delete(user)
        return self.chain.modify(self.root_key, new_root, latency_class="modify")

    # -- persistence -----------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme.value,
            "leaves": [leaf.hex() for leaf in self.tree.leaves],
            "leaf_index": {str(u): i for u, i in sorted(self.leaf_index.items())},
        }

    @classmethod
    def restore(cls, data: dict, chain: SimulatedChain,
                offchain: OffChainStore | None = None,
                root_key: int = MERKLE_ROOT_KEY) -> "TemplateStore":
        scheme = SchemeKind.parse(data["scheme"])
        tree = MerkleTree(bytes.fromhex(h) for h in data["leaves"])
        store = cls(scheme, chain, offchain, tree, root_key)
        store.leaf_index = {int(u): i for u, i in data["leaf_index"].items()}
        return store
