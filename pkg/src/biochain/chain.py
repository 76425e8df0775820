"""Gas-metered smart-contract simulator for template records.

Costs are composed from pre-Istanbul Ethereum mainnet constants
(21,000 tx base; 20,000/5,000 SSTORE; 200 SLOAD; 68/4 calldata bytes;
15,000 clear refund capped at half the pre-refund gas). Records occupy
ceil(len(payload) / 32) data slots plus a fixed per-record overhead
(length + metadata slots). Contract deployment and the fixed-point
Euclidean match are carried as measured constants calibrated against a
reference testnet deployment rather than modeled from opcodes.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from types import MappingProxyType

import numpy as np

from .bits import BitString
from .errors import (
    ConfigurationError,
    DimensionError,
    DuplicateUserError,
    IntegerOverflowError,
    PayloadError,
    RangeError,
    StateError,
    UserNotFoundError,
)
from .matcher import DEFAULT_FIXED_POINT, FixedPointConfig, fixedpoint_euclidean, hamming

GWEI_PER_ETH = 10 ** 9


@dataclass(frozen=True)
class GasSchedule:
    tx_base: int = 21_000
    sstore_new: int = 20_000  # per fresh 256-bit slot
    sstore_update: int = 5_000
    sstore_clear: int = 5_000
    clear_refund: int = 15_000  # credited per cleared slot, then capped
    refund_cap_divisor: int = 2
    sload: int = 200
    sha3_base: int = 30
    sha3_per_word: int = 6
    calldata_nonzero: int = 68  # per byte
    calldata_zero: int = 4
    slots_overhead: int = 2  # length + metadata slots per record
    deploy_gas: int = 498_274  # measured constant
    match_base: int = 8_095  # calibrated so one 100-dim match totals 31,304
    match_per_sqrt: int = 23_209  # measured constant

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if value < 0:
                raise ConfigurationError(f"gas schedule field {name} must be nonnegative")
        if self.refund_cap_divisor < 1:
            raise ConfigurationError("refund_cap_divisor must be >= 1")


DEFAULT_LATENCY_MEANS = MappingProxyType({
    "deploy": 19.19,
    "create": 10.53,
    "modify": 10.53,
    "delete": 16.38,
    "retrieve": 0.0,
    "match": 0.0,
    "face.create": 10.53,
    "face.modify": 10.53,
    "signature.create": 12.61,
    "signature.modify": 12.85,
})


@dataclass(frozen=True)
class ChainConfig:
    gas_price_gwei: float = 1.0
    eth_usd: float = 170.0
    latency_means: MappingProxyType = DEFAULT_LATENCY_MEANS
    latency_jitter: float = 0.0  # relative spread around the mean

    def __post_init__(self):
        if self.gas_price_gwei <= 0 or self.eth_usd <= 0:
            raise ConfigurationError("gas price and ETH/USD rate must be positive")
        if self.latency_jitter < 0:
            raise ConfigurationError("latency jitter must be nonnegative")
        object.__setattr__(self, "latency_means", MappingProxyType(dict(self.latency_means)))


@dataclass(frozen=True)
class GasReceipt:
    op: str
    user: int | None
    gas_used: int
    eth_cost: float
    usd_cost: float
    latency_s: float
    breakdown: MappingProxyType  # base/calldata/storage/compute/refund; refund <= 0

    def __post_init__(self):
        object.__setattr__(self, "breakdown", MappingProxyType(dict(self.breakdown)))
        if sum(self.breakdown.values()) != self.gas_used:
            raise ConfigurationError("receipt breakdown must sum to gas_used")
        if self.gas_used < 0:
            raise RangeError("gas_used must be nonnegative")


@dataclass(frozen=True)
class TemplateRecord:
    payload: bytes
    metadata: bytes
    created_tx: int
    modified_tx: int

    def __post_init__(self):
        if not self.payload:
            raise PayloadError("template payload must be non-empty")


def slots_for(n_bytes: int) -> int:
    """256-bit storage slots needed for a byte string."""
    return (n_bytes + 31) // 32


def calldata_gas(data: bytes, schedule: GasSchedule) -> int:
    """Byte-exact calldata cost (zeros are cheaper)."""
    zeros = data.count(0)
    return zeros * schedule.calldata_zero + (len(data) - zeros) * schedule.calldata_nonzero


def payload_calldata_gas(data: bytes, schedule: GasSchedule) -> int:
    """Worst-case calldata cost: template bytes are costed as all nonzero,
    which keeps charges independent of payload content."""
    return len(data) * schedule.calldata_nonzero


def user_id_bytes(user: int) -> bytes:
    if not 0 <= user < (1 << 256):
        raise RangeError("user id must fit an unsigned 256-bit integer")
    return user.to_bytes(32, "big")


def estimate_storage_gas(n_bytes: int, direction: str, schedule: GasSchedule) -> int:
    """Pure slot cost of reading or writing n bytes, with no transaction overhead."""
    if n_bytes < 0:
        raise RangeError("byte count must be nonnegative")
    slots = slots_for(n_bytes)
    if direction == "write":
        return schedule.sstore_new * slots
    if direction == "read":
        return schedule.sload * slots
    raise ConfigurationError(f"direction must be 'read' or 'write', got {direction!r}")


def convert(gas: int, config: ChainConfig):
    """(eth, usd) for a gas amount; no rounding beyond float arithmetic."""
    eth = gas * config.gas_price_gwei / GWEI_PER_ETH
    return eth, eth * config.eth_usd


def sample_latency(op_class: str, config: ChainConfig, seed: int) -> float:
    """Seeded confirmation latency around the configured mean for an op class."""
    if op_class not in config.latency_means:
        raise ConfigurationError(f"unknown latency class {op_class!r}")
    mean = config.latency_means[op_class]
    if mean == 0.0:
        return 0.0
    rng = random.Random(seed)
    value = mean * (1.0 + config.latency_jitter * rng.uniform(-1.0, 1.0))
    return max(0.0, value)


class SimulatedChain:
    """Single-writer contract state machine with an append-only receipt log."""

    def __init__(self, schedule: GasSchedule | None = None, config: ChainConfig | None = None,
                 seed: int = 0):
        self.schedule = schedule or GasSchedule()
        self.config = config or ChainConfig()
        self.seed = seed
        self.deployed = False
        self.records: dict[int, TemplateRecord] = {}
        self.tx_log: list[GasReceipt] = []

    # -- helpers -------------------------------------------------------------

    def _receipt(self, op: str, user, breakdown: dict, latency_class: str) -> GasReceipt:
        gas = sum(breakdown.values())
        eth, usd = convert(gas, self.config)
        latency_seed = int(np.random.SeedSequence([self.seed, len(self.tx_log)]).generate_state(1)[0])
        latency = sample_latency(latency_class, self.config, latency_seed)
        return GasReceipt(op, user, gas, eth, usd, latency, breakdown)

    def _log(self, receipt: GasReceipt) -> GasReceipt:
        self.tx_log.append(receipt)
        return receipt

    def _require_deployed(self):
        if not self.deployed:
            raise StateError("contract is not deployed")

    def _require_user(self, user: int) -> TemplateRecord:
        self._require_deployed()
        if user not in self.records:
            raise UserNotFoundError(f"no record for user {user}")
        return self.records[user]

    # -- transactions ----------------------------------------------------------

    def deploy(self) -> GasReceipt:
        if self.deployed:
            raise StateError("contract already deployed")
        self.deployed = True
        breakdown = {"base": self.schedule.deploy_gas, "calldata": 0, "storage": 0,
                     "compute": 0, "refund": 0}
        return self._log(self._receipt("deploy", None, breakdown, "deploy"))

    def create(self, user: int, payload: bytes, metadata: bytes = b"",
               latency_class: str = "create") -> GasReceipt:
        self._require_deployed()
        if not payload:
            raise PayloadError("template payload must be non-empty")
        if user in self.records:
            raise DuplicateUserError(f"user {user} already has a record")
        sched = self.schedule
        breakdown = {
            "base": sched.tx_base,
            "calldata": payload_calldata_gas(payload, sched)
            + payload_calldata_gas(metadata, sched)
            + calldata_gas(user_id_bytes(user), sched),
            "storage": sched.sstore_new * (slots_for(len(payload)) + sched.slots_overhead),
            "compute": 0,
            "refund": 0,
        }
        receipt = self._log(self._receipt("create", user, breakdown, latency_class))
        tx = len(self.tx_log) - 1
        self.records[user] = TemplateRecord(payload, metadata, tx, tx)
        return receipt

    def modify(self, user: int, payload: bytes, latency_class: str = "modify") -> GasReceipt:
        old = self._require_user(user)
        if not payload:
            raise PayloadError("template payload must be non-empty")
        sched = self.schedule
        old_slots = slots_for(len(old.payload)) + sched.slots_overhead
        new_slots = slots_for(len(payload)) + sched.slots_overhead
        rewritten = min(old_slots, new_slots)
        grown = max(0, new_slots - old_slots)
        cleared = max(0, old_slots - new_slots)
        storage = sched.sstore_update * rewritten + sched.sstore_new * grown \
            + sched.sstore_clear * cleared
        calldata = payload_calldata_gas(payload, sched) + calldata_gas(user_id_bytes(user), sched)
        pre_refund = sched.tx_base + calldata + storage
        refund = min(sched.clear_refund * cleared, pre_refund // sched.refund_cap_divisor)
        breakdown = {
            "base": sched.tx_base,
            "calldata": calldata,
            "storage": storage,
            "compute": 0,
            "refund": -refund,
        }
        receipt = self._log(self._receipt("modify", user, breakdown, latency_class))
        tx = len(self.tx_log) - 1
        self.records[user] = TemplateRecord(payload, old.metadata, old.created_tx, tx)
        return receipt

    def delete(self, user: int) -> GasReceipt:
        record = self._require_user(user)
        sched = self.schedule
        slots = slots_for(len(record.payload)) + sched.slots_overhead
        breakdown = {
            "base": sched.tx_base,
            "calldata": calldata_gas(user_id_bytes(user), sched),
            "storage": sched.sstore_clear * slots,
            "compute": 0,
            "refund": 0,
        }
        pre_refund = sum(breakdown.values())
        refund = min(sched.clear_refund * slots, pre_refund // sched.refund_cap_divisor)
        assert refund * sched.refund_cap_divisor <= pre_refund
        breakdown["refund"] = -refund
        receipt = self._log(self._receipt("delete", user, breakdown, "delete"))
        del self.records[user]
        return receipt

    # -- calls (free, unlogged, state-neutral) ---------------------------------

    def retrieve(self, user: int):
        """(record, zero-gas receipt); a local call, so no latency either."""
        record = self._require_user(user)
        breakdown = {"base": 0, "calldata": 0, "storage": 0, "compute": 0, "refund": 0}
        eth, usd = convert(0, self.config)
        return record, GasReceipt("retrieve", user, 0, eth, usd,
                                  sample_latency("retrieve", self.config, 0), breakdown)

    def onchain_hamming(self, user: int, probe: BitString):
        """Hamming distance against the stored bit-packed template, at zero gas."""
        record = self._require_user(user)
        expected = (probe.length + 7) // 8
        if len(record.payload) != expected:
            raise DimensionError(
                f"stored payload is {len(record.payload)} bytes, probe of {probe.length} "
                f"bits needs {expected}"
            )
        stored = BitString.from_bytes(record.payload, probe.length)
        distance = hamming(stored, probe)
        breakdown = {"base": 0, "calldata": 0, "storage": 0, "compute": 0, "refund": 0}
        eth, usd = convert(0, self.config)
        receipt = GasReceipt("match.hamming", user, 0, eth, usd,
                             sample_latency("match", self.config, 0), breakdown)
        return distance, receipt

    # -- metered matching -------------------------------------------------------

    def onchain_euclidean(self, user: int, probe_scaled,
                          fp_cfg: FixedPointConfig = DEFAULT_FIXED_POINT):
        """Integer Euclidean match against the stored fixed-point vector.

        The stored payload holds 4-byte big-endian signed coordinates. Gas is
        the calibrated match constant plus one square-root evaluation.
        """
        record = self._require_user(user)
        stored = decode_fixed_vector(record.payload)
        probe = list(probe_scaled)
        if len(stored) != len(probe):
            raise DimensionError(f"stored vector has {len(stored)} coordinates, probe {len(probe)}")
        distance = fixedpoint_euclidean(stored, probe, fp_cfg)
        sched = self.schedule
        breakdown = {"base": 0, "calldata": 0, "storage": 0,
                     "compute": sched.match_base + sched.match_per_sqrt, "refund": 0}
        receipt = self._log(self._receipt("match.euclidean", user, breakdown, "match"))
        return distance, receipt

    # -- persistence -------------------------------------------------------------

    def snapshot(self) -> dict:
        """Deep, comparable image of the mutable state."""
        return {
            "deployed": self.deployed,
            "records": {
                str(u): {
                    "payload": r.payload.hex(),
                    "metadata": r.metadata.hex(),
                    "created_tx": r.created_tx,
                    "modified_tx": r.modified_tx,
                }
                for u, r in sorted(self.records.items())
            },
            "tx_log": [
                {
                    "op": t.op,
                    "user": t.user,
                    "gas_used": t.gas_used,
                    "eth_cost": t.eth_cost,
                    "usd_cost": t.usd_cost,
                    "latency_s": t.latency_s,
                    "breakdown": dict(t.breakdown),
                }
                for t in self.tx_log
            ],
        }

    @classmethod
    def restore(cls, data: dict, schedule: GasSchedule | None = None,
                config: ChainConfig | None = None, seed: int = 0) -> "SimulatedChain":
        chain = cls(schedule, config, seed)
        chain.deployed = data["deployed"]
        chain.records = {
            int(u): TemplateRecord(
                bytes.fromhex(r["payload"]), bytes.fromhex(r["metadata"]),
                r["created_tx"], r["modified_tx"],
            )
            for u, r in data["records"].items()
        }
        chain.tx_log = [
            GasReceipt(t["op"], t["user"], t["gas_used"], t["eth_cost"], t["usd_cost"],
                       t["latency_s"], t["breakdown"])
            for t in data["tx_log"]
        ]
        return chain


def encode_fixed_vector(values) -> bytes:
    """Pack integers as 4-byte big-endian signed coordinates."""
    out = bytearray()
    for v in values:
        v = int(v)
        if not -(1 << 31) <= v < (1 << 31):
            raise IntegerOverflowError(f"coordinate {v} does not fit 32 bits")
        out += v.to_bytes(4, "big", signed=True)
    return bytes(out)


def decode_fixed_vector(payload: bytes):
    if len(payload) % 4:
        raise DimensionError("fixed-point payload length must be a multiple of 4 bytes")
    return [int.from_bytes(payload[i:i + 4], "big", signed=True)
            for i in range(0, len(payload), 4)]
