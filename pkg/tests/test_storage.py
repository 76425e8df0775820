import random

import pytest

from biochain.chain import SimulatedChain
from biochain.errors import (
    AvailabilityError,
    ProofError,
    RangeError,
    UserNotFoundError,
)
from biochain.storage import (
    EMPTY_ROOT,
    MERKLE_ROOT_KEY,
    MerkleProof,
    MerkleTree,
    OffChainStore,
    SchemeKind,
    TemplateStore,
    digest,
    merkle_verify,
    tree_height,
)

# FIPS 202 test vector for the 256-bit member of the SHA-3 family.
SHA3_256_EMPTY = "a7ffc6f8bf1ed76651c14756a061d662f580ff4de43b49fa82d80a4b80f8434a"


def leaf(tag: int) -> bytes:
    return digest(tag.to_bytes(4, "big"))


class TestDigest:
    def test_empty_input_matches_published_vector(self):
        assert digest(b"").hex() == SHA3_256_EMPTY

    def test_deterministic(self):
        assert digest(b"template") == digest(b"template")

    def test_single_bit_flip_changes_digest(self):
        data = bytes([0b10110010]) * 16
        flipped = bytes([data[0] ^ 0b00000001]) + data[1:]
        assert digest(data) != digest(flipped)


class TestMerkleTree:
    def test_single_leaf_root_is_the_leaf(self):
        tree = MerkleTree()
        root = tree.set(0, leaf(1))
        assert root == leaf(1)

    def test_two_leaf_root(self):
        tree = MerkleTree([leaf(1), leaf(2)])
        assert tree.root == digest(leaf(1) + leaf(2))

    def test_three_leaves_duplicate_last(self):
        a, b, c = leaf(1), leaf(2), leaf(3)
        tree = MerkleTree([a, b, c])
        assert tree.root == digest(digest(a + b) + digest(c + c))

    def test_empty_tree_sentinel_root(self):
        assert MerkleTree().root == EMPTY_ROOT == digest(b"")

    def test_append_index_must_not_skip(self):
        tree = MerkleTree([leaf(1)])
        with pytest.raises(RangeError):
            tree.set(2, leaf(2))

    def test_remove_only_leaf_restores_sentinel(self):
        tree = MerkleTree([leaf(1)])
        assert tree.remove(0) == EMPTY_ROOT

    def test_remove_then_reappend_restores_root(self):
        tree = MerkleTree([leaf(7)])
        original = tree.root
        tree.remove(0)
        assert tree.set(0, leaf(7)) == original

    def test_remove_middle_equals_fresh_build(self):
        leaves = [leaf(i) for i in range(4)]
        tree = MerkleTree(leaves)
        tree.remove(1)
        fresh = MerkleTree([leaves[0], leaves[2], leaves[3]])
        assert tree.root == fresh.root

    def test_incremental_equals_rebuild_over_random_edits(self):
        # 1000 random append/overwrite edits; after every edit the
        # incrementally maintained root must equal a from-scratch rebuild.
        rng = random.Random(17)
        tree = MerkleTree()
        mirror = []
        for _ in range(1000):
            if mirror and rng.random() < 0.4:
                index = rng.randrange(len(mirror))
            else:
                index = len(mirror)
            new_leaf = leaf(rng.randrange(10 ** 6))
            if index == len(mirror):
                mirror.append(new_leaf)
            else:
                mirror[index] = new_leaf
            tree.set(index, new_leaf)
            assert tree.root == MerkleTree(mirror).root

    def test_any_single_leaf_change_changes_root(self):
        rng = random.Random(23)
        for _ in range(20):
            n = rng.randrange(1, 65)
            leaves = [leaf(rng.randrange(10 ** 9)) for _ in range(n)]
            tree = MerkleTree(leaves)
            index = rng.randrange(n)
            changed = list(leaves)
            changed[index] = leaf(rng.randrange(10 ** 9) + 10 ** 9)
            assert MerkleTree(changed).root != tree.root

    def test_text_round_trip(self):
        tree = MerkleTree([leaf(i) for i in range(5)])
        again = MerkleTree.from_text(tree.to_text())
        assert again.root == tree.root
        assert again.leaves == tree.leaves


class TestMerkleProofs:
    def test_every_leaf_of_a_seven_leaf_tree_verifies(self):
        tree = MerkleTree([leaf(i) for i in range(7)])
        for i in range(7):
            proof = tree.prove(i)
            assert merkle_verify(proof, leaf(i))

    def test_flipped_leaf_fails(self):
        tree = MerkleTree([leaf(i) for i in range(7)])
        proof = tree.prove(3)
        wrong = bytearray(leaf(3))
        wrong[0] ^= 1
        assert not merkle_verify(proof, bytes(wrong))

    def test_truncated_sibling_list_is_proof_error(self):
        tree = MerkleTree([leaf(i) for i in range(8)])
        proof = tree.prove(2)
        truncated = MerkleProof(proof.leaf_index, proof.n_leaves,
                                proof.siblings[:-1], proof.claimed_root)
        with pytest.raises(ProofError):
            merkle_verify(truncated, leaf(2))

    def test_proof_completeness_and_soundness_randomized(self):
        # Completeness: every honest proof of every tree verifies.
        # Soundness: 10^4 single-bit corruptions (of a sibling, the leaf or
        # the claimed root) all fail.
        rng = random.Random(5)
        trees = {n: MerkleTree([leaf(1000 * n + i) for i in range(n)])
                 for n in (1, 2, 3, 7, 16, 33, 64)}
        for n, tree in trees.items():
            for index in range(n):
                assert merkle_verify(tree.prove(index), leaf(1000 * n + index))
        sizes = sorted(trees)
        for _ in range(10_000):
            n = sizes[rng.randrange(len(sizes))]
            tree = trees[n]
            index = rng.randrange(n)
            proof = tree.prove(index)
            leaf_digest = leaf(1000 * n + index)
            target = rng.randrange(len(proof.siblings) + 2)
            flip = 1 << rng.randrange(8)
            byte = rng.randrange(32)
            if target < len(proof.siblings):
                siblings = list(proof.siblings)
                mangled_sib = bytearray(siblings[target][0])
                mangled_sib[byte] ^= flip
                siblings[target] = (bytes(mangled_sib), siblings[target][1])
                proof = MerkleProof(proof.leaf_index, proof.n_leaves,
                                    tuple(siblings), proof.claimed_root)
            elif target == len(proof.siblings):
                mangled_leaf = bytearray(leaf_digest)
                mangled_leaf[byte] ^= flip
                leaf_digest = bytes(mangled_leaf)
            else:
                mangled_root = bytearray(proof.claimed_root)
                mangled_root[byte] ^= flip
                proof = MerkleProof(proof.leaf_index, proof.n_leaves,
                                    proof.siblings, bytes(mangled_root))
            assert not merkle_verify(proof, leaf_digest)

    def test_height_matches_sibling_count(self):
        for n in [1, 2, 3, 4, 5, 8, 9, 31]:
            tree = MerkleTree([leaf(i) for i in range(n)])
            assert len(tree.prove(0).siblings) == tree_height(n) == tree.height


class TestOffChainStore:
    def test_put_get_round_trip(self, tmp_path):
        store = OffChainStore(tmp_path / "off")
        store.put(3, b"hello-template")
        assert store.get(3) == b"hello-template"
        assert store.users() == [3]

    def test_missing_user_is_availability_error(self, tmp_path):
        store = OffChainStore(tmp_path / "off")
        with pytest.raises(AvailabilityError):
            store.get(9)

    def test_delete_removes_data(self, tmp_path):
        store = OffChainStore(tmp_path / "off")
        store.put(1, b"x")
        store.delete(1)
        assert store.users() == []
        with pytest.raises(AvailabilityError):
            store.get(1)

    def test_tamper_flips_one_byte(self, tmp_path):
        store = OffChainStore(tmp_path / "off")
        store.put(1, bytes(range(10)))
        store.tamper(1, 4, 0x08)
        data = store.get(1)
        assert data[4] == 4 ^ 0x08
        assert data[:4] == bytes(range(4))


def make_store(scheme, tmp_path, **chain_kwargs):
    chain = SimulatedChain(**chain_kwargs)
    chain.deploy()
    offchain = OffChainStore(tmp_path / f"off-{scheme.value}")
    return TemplateStore(scheme, chain, offchain)


class TestTemplateStore:
    def test_full_onchain_delegates_to_create(self, tmp_path):
        store = make_store(SchemeKind.FULL_ONCHAIN, tmp_path)
        payload = bytes([7]) * 200
        receipt = store.store_template(1, payload)
        reference = SimulatedChain()
        reference.deploy()
        expected = reference.create(1, payload)
        assert receipt.gas_used == expected.gas_used
        assert receipt.breakdown == expected.breakdown
        assert store.load_template(1) == payload

    def test_data_hashing_gas_within_10_percent(self, tmp_path):
        store = make_store(SchemeKind.DATA_HASHING, tmp_path)
        receipt = store.store_template(1, bytes([1]) * 6174)
        assert abs(receipt.gas_used - 86_848) <= 0.10 * 86_848

    def test_merkle_first_and_thousandth_cost_the_same(self, tmp_path):
        store = make_store(SchemeKind.MERKLE_TREE, tmp_path)
        first = store.store_template(0, b"payload-0")
        gas = {first.gas_used}
        for user in range(1, 1000):
            gas.add(store.store_template(user, b"payload-%d" % user).gas_used)
        assert gas == {first.gas_used}

    def test_merkle_two_users_identical_gas(self, tmp_path):
        store = make_store(SchemeKind.MERKLE_TREE, tmp_path)
        r1 = store.store_template(1, b"alpha")
        r2 = store.store_template(2, b"beta")
        assert r1.gas_used == r2.gas_used

    def test_scheme_cost_ordering(self, tmp_path):
        payload = bytes([3]) * 64
        full = make_store(SchemeKind.FULL_ONCHAIN, tmp_path / "a")
        hashed = make_store(SchemeKind.DATA_HASHING, tmp_path / "b")
        merkle = make_store(SchemeKind.MERKLE_TREE, tmp_path / "c")
        g_full = full.store_template(1, payload).gas_used
        g_hash = hashed.store_template(1, payload).gas_used
        merkle.store_template(1, payload)
        g_merkle = merkle.store_template(2, payload).gas_used  # steady state
        assert g_full >= g_hash >= g_merkle

    def test_signature_full_to_hash_ratio_about_50(self, tmp_path):
        payload = bytes([1]) * 6174
        full = make_store(SchemeKind.FULL_ONCHAIN, tmp_path / "a")
        hashed = make_store(SchemeKind.DATA_HASHING, tmp_path / "b")
        ratio = full.store_template(1, payload).gas_used \
            / hashed.store_template(1, payload).gas_used
        assert abs(ratio - 50.2) <= 0.10 * 50.2


class TestVerifyIntegrity:
    @pytest.mark.parametrize("scheme", [SchemeKind.DATA_HASHING, SchemeKind.MERKLE_TREE])
    def test_untampered_verifies(self, tmp_path, scheme):
        store = make_store(scheme, tmp_path)
        for user in range(8):
            store.store_template(user, bytes([user + 1]) * 50)
        assert all(store.verify_integrity(user) for user in range(8))

    @pytest.mark.parametrize("scheme", [SchemeKind.DATA_HASHING, SchemeKind.MERKLE_TREE])
    def test_tampered_byte_fails(self, tmp_path, scheme):
        store = make_store(scheme, tmp_path)
        rng = random.Random(31)
        for user in range(8):
            store.store_template(user, bytes([user + 1]) * 50)
        for user in range(8):
            store.offchain.tamper(user, rng.randrange(50), 1 << rng.randrange(8))
            assert store.verify_integrity(user) is False

    def test_full_onchain_is_always_true(self, tmp_path):
        store = make_store(SchemeKind.FULL_ONCHAIN, tmp_path)
        store.store_template(1, b"anchored-by-itself")
        assert store.verify_integrity(1) is True

    @pytest.mark.parametrize("scheme", [SchemeKind.DATA_HASHING, SchemeKind.MERKLE_TREE])
    def test_missing_offchain_file_is_availability_error(self, tmp_path, scheme):
        store = make_store(scheme, tmp_path)
        store.store_template(1, b"will-vanish")
        store.offchain._path(1).unlink()
        with pytest.raises(AvailabilityError):
            store.verify_integrity(1)

    def test_unknown_user(self, tmp_path):
        store = make_store(SchemeKind.DATA_HASHING, tmp_path)
        with pytest.raises(UserNotFoundError):
            store.verify_integrity(404)


class TestMerkleDeletion:
    def test_delete_shifts_later_leaves(self, tmp_path):
        store = make_store(SchemeKind.MERKLE_TREE, tmp_path)
        for user in range(6):
            store.store_template(user, b"payload-%d" % user)
        store.delete_template(2)
        for user in [0, 1, 3, 4, 5]:
            assert store.verify_integrity(user)
        with pytest.raises(UserNotFoundError):
            store.verify_integrity(2)

    def test_root_record_tracks_tree(self, tmp_path):
        store = make_store(SchemeKind.MERKLE_TREE, tmp_path)
        store.store_template(1, b"only")
        store.delete_template(1)
        record, _ = store.chain.retrieve(MERKLE_ROOT_KEY)
        assert record.payload == EMPTY_ROOT


class TestStorePersistence:
    def test_round_trip(self, tmp_path):
        store = make_store(SchemeKind.MERKLE_TREE, tmp_path)
        for user in range(5):
            store.store_template(user, b"p%d" % user)
        data = store.to_dict()
        chain_data = store.chain.snapshot()
        chain = SimulatedChain.restore(chain_data)
        restored = TemplateStore.restore(data, chain, store.offchain)
        for user in range(5):
            assert restored.verify_integrity(user)
        assert restored.tree.root == store.tree.root
