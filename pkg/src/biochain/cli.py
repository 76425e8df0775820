"""Command-line front end.

Commands: train, enroll, verify, delete, evaluate, sweep, cost-report,
chain-log, synth. Global flags override config-file values, which
override built-in defaults. Persistent state (simulated chain, off-chain
store, model artifact) lives in the state directory; a file lock
serializes chain mutations.
"""

from __future__ import annotations

import json
import sys
import tempfile
from dataclasses import dataclass, fields, replace
from pathlib import Path

import click
from filelock import FileLock

from . import biohash, chain as chain_mod, evaluation, features, matcher, plots, storage
from .bits import BitString
from .errors import (
    BiochainError,
    ConfigurationError,
    PayloadError,
    TamperError,
    UserNotFoundError,
)


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    gas_price_gwei: float = 1.0
    eth_usd: float = 170.0
    scheme: str = "onchain"
    n: int = 100
    m: int = 4
    q: int = 3
    theta: int = 0
    target_d: int = 25
    scale: int = 100
    latency_jitter: float = 0.0
    threshold: float | None = None
    data: str | None = None
    state_dir: str = "biochain-state"
    model: str | None = None  # defaults to <state_dir>/model.json
    reports_dir: str | None = None  # defaults to <state_dir>/reports
    gas_schedule: tuple = ()  # ((field, value), ...) overrides from gas.* keys

    def schedule(self) -> chain_mod.GasSchedule:
        try:
            return chain_mod.GasSchedule(**dict(self.gas_schedule))
        except TypeError as exc:
            raise ConfigurationError(f"bad gas schedule override: {exc}") from None

    @property
    def state_path(self) -> Path:
        return Path(self.state_dir)

    @property
    def model_path(self) -> Path:
        return Path(self.model) if self.model else self.state_path / "model.json"

    @property
    def reports_path(self) -> Path:
        return Path(self.reports_dir) if self.reports_dir else self.state_path / "reports"


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}
_INT_KEYS = {"seed", "n", "m", "q", "theta", "target_d", "scale"}
_FLOAT_KEYS = {"gas_price_gwei", "eth_usd", "latency_jitter", "threshold"}


def load_config_file(path: str) -> dict:
    """Flat key = value lines; # starts a comment.

    Keys prefixed ``gas.`` override gas-schedule fields, e.g.
    ``gas.slots_overhead = 2``.
    """
    values = {}
    schedule = []
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"config line {raw!r} is not 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key.startswith("gas."):
            schedule.append((key[4:], int(value)))
        elif key not in _FIELD_TYPES:
            raise ConfigurationError(f"unknown config key {key!r}")
        elif key in _INT_KEYS:
            values[key] = int(value)
        elif key in _FLOAT_KEYS:
            values[key] = float(value)
        else:
            values[key] = value
    if schedule:
        values["gas_schedule"] = tuple(schedule)
    return values


def resolve_config(config_path, **flags) -> RunConfig:
    cfg = RunConfig()
    if config_path:
        cfg = replace(cfg, **load_config_file(config_path))
    overrides = {k: v for k, v in flags.items() if v is not None}
    return replace(cfg, **overrides)


class Workspace:
    """Persistent chain + scheme state under the configured state directory."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.scheme = storage.SchemeKind.parse(cfg.scheme)
        self.chain_config = chain_mod.ChainConfig(
            gas_price_gwei=cfg.gas_price_gwei,
            eth_usd=cfg.eth_usd,
            latency_jitter=cfg.latency_jitter,
        )
        self.chain_schedule = cfg.schedule()
        self.state_file = cfg.state_path / "chain.json"
        cfg.state_path.mkdir(parents=True, exist_ok=True)  # lock file needs the dir
        self.lock = FileLock(str(cfg.state_path / "chain.lock"))
        self.chain: chain_mod.SimulatedChain | None = None
        self.store: storage.TemplateStore | None = None
        self.modes: dict[int, str] = {}

    def _offchain(self) -> storage.OffChainStore:
        return storage.OffChainStore(self.cfg.state_path / "offchain")

    def load(self, create: bool = False, adopt_scheme: bool = False) -> bool:
        """Read persisted state; optionally start fresh (auto-deploy).

        adopt_scheme lets read-only commands follow whatever scheme the
        state was created under instead of requiring a match.
        """
        if self.state_file.exists():
            data = json.loads(self.state_file.read_text())
            if data["scheme"] != self.scheme.value:
                if not adopt_scheme:
                    raise ConfigurationError(
                        f"state directory was created with scheme {data['scheme']!r}, "
                        f"current config says {self.scheme.value!r}"
                    )
                self.scheme = storage.SchemeKind.parse(data["scheme"])
            self.chain = chain_mod.SimulatedChain.restore(
                data["chain"], self.chain_schedule, self.chain_config, self.cfg.seed
            )
            self.store = storage.TemplateStore.restore(
                data["store"], self.chain, self._offchain()
            )
            self.modes = {int(u): m for u, m in data["modes"].items()}
            return True
        if not create:
            return False
        self.cfg.state_path.mkdir(parents=True, exist_ok=True)
        self.chain = chain_mod.SimulatedChain(
            self.chain_schedule, self.chain_config, self.cfg.seed
        )
        receipt = self.chain.deploy()
        click.echo(f"deployed contract: {format_receipt(receipt)}")
        self.store = storage.TemplateStore(self.scheme, self.chain, self._offchain())
        self.modes = {}
        return True

    def save(self):
        self.cfg.state_path.mkdir(parents=True, exist_ok=True)
        payload = {
            "scheme": self.scheme.value,
            "chain": self.chain.snapshot(),
            "store": self.store.to_dict(),
            "modes": {str(u): m for u, m in self.modes.items()},
        }
        self.state_file.write_text(json.dumps(payload, indent=1))


def format_receipt(receipt: chain_mod.GasReceipt) -> str:
    return (f"gas={receipt.gas_used} eth={receipt.eth_cost:.9f} "
            f"usd=${receipt.usd_cost:.6f} latency={receipt.latency_s:.2f}s")


def read_sample(path: str, n: int) -> features.FeatureVector:
    dataset = features.load_feature_table(Path(path).read_text(), n)
    if not len(dataset):
        raise PayloadError(f"sample file {path} has no rows")
    return dataset[0]


def write_report(rows, header, reports_path: Path, stem: str, summary: dict):
    """Delimited table (parseable by the feature-table loader) plus a JSON twin."""
    reports_path.mkdir(parents=True, exist_ok=True)
    csv_path = reports_path / f"{stem}.csv"
    lines = ["# " + ",".join(header)]
    lines += [",".join(str(v) for v in row) for row in rows]
    csv_path.write_text("\n".join(lines) + "\n")
    json_path = reports_path / f"{stem}.json"
    json_path.write_text(json.dumps(summary, indent=1) + "\n")
    return csv_path, json_path


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="Flat key = value config file.")
@click.option("--seed", type=int, default=None)
@click.option("--gas-price", "gas_price_gwei", type=float, default=None,
              help="Gas price in gwei.")
@click.option("--eth-usd", type=float, default=None, help="Dollars per ETH.")
@click.option("--scheme", type=click.Choice(["onchain", "hash", "merkle"]), default=None)
@click.option("--state-dir", type=click.Path(), default=None)
@click.pass_context
def main(ctx, config_path, seed, gas_price_gwei, eth_usd, scheme, state_dir):
    """Biometric template protection on a simulated gas-metered blockchain."""
    ctx.obj = resolve_config(
        config_path,
        seed=seed,
        gas_price_gwei=gas_price_gwei,
        eth_usd=eth_usd,
        scheme=scheme,
        state_dir=state_dir,
    )


@main.command()
@click.option("--classes", "n_classes", type=int, default=10)
@click.option("--per-class", type=int, default=10)
@click.option("--dim", type=int, default=None, help="Feature dimension (defaults to N).")
@click.option("--intra", type=float, default=0.2, help="Within-class spread.")
@click.option("--inter", type=float, default=4.0, help="Between-class spread.")
@click.option("--out", type=click.Path(), required=True)
@click.pass_obj
def synth(cfg: RunConfig, n_classes, per_class, dim, intra, inter, out):
    """Generate a seeded synthetic feature table."""
    spec = features.SyntheticSpec(
        n_classes, per_class, dim if dim else cfg.n, intra, inter, cfg.seed
    )
    dataset = features.synth_dataset(spec)
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    Path(out).write_text(features.dump_feature_table(dataset))
    click.echo(f"wrote {len(dataset)} samples of dimension {dataset.dim} to {out}")


def _load_dataset(cfg: RunConfig, data):
    path = data or cfg.data
    if not path:
        raise ConfigurationError("no dataset path given (use --data or the config file)")
    if not Path(path).exists():
        raise ConfigurationError(f"dataset path {path} does not exist")
    return features.load_feature_table(Path(path).read_text(), cfg.n)


def _dev_pairs(dataset, cfg: RunConfig, requested: int):
    groups = dataset.subjects
    same_total = sum(len(v) * (len(v) - 1) // 2 for v in groups.values())
    cross_total = len(dataset) * (len(dataset) - 1) // 2 - same_total
    n = min(requested, same_total, cross_total)
    return features.make_pairs(dataset, n, n, cfg.seed)


@main.command()
@click.option("--data", type=click.Path(), default=None)
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Model artifact path (defaults to the configured model path).")
@click.option("--n", type=int, default=None)
@click.option("--m", type=int, default=None)
@click.option("--q", type=int, default=None)
@click.option("--theta", type=int, default=None)
@click.option("--target-d", type=int, default=None)
@click.option("--pool-size", type=int, default=None,
              help="Candidate pool for theta > 0 (default 4 * target_d).")
@click.option("--dev-pairs", type=int, default=100,
              help="Genuine and impostor development pairs (each).")
@click.pass_obj
def train(cfg: RunConfig, data, out_path, n, m, q, theta, target_d, pool_size, dev_pairs):
    """Train a biohash model and write its artifact."""
    overrides = {k: v for k, v in
                 dict(n=n, m=m, q=q, theta=theta, target_d=target_d).items() if v is not None}
    cfg = replace(cfg, **overrides)
    dataset = _load_dataset(cfg, data)
    devset = biohash.DevSet(dataset, _dev_pairs(dataset, cfg, dev_pairs))
    config = biohash.BioHashConfig(cfg.n, cfg.m, cfg.q, cfg.theta, cfg.target_d)
    model = biohash.train_model(devset, config, cfg.seed, pool_size=pool_size)
    target = Path(out_path) if out_path else cfg.model_path
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(biohash.model_to_json(model))
    click.echo(
        f"model {model.model_id}: L={model.output_bits} bits, D={model.plan.n_subsets}, "
        f"theta={cfg.theta}, dev EER={100 * model.dev_eer:.2f}% "
        f"(threshold {model.dev_threshold:.1f})"
    )
    click.echo(f"wrote {target}")


def _load_model(cfg: RunConfig) -> biohash.BioHashModel | None:
    if cfg.model_path.exists():
        return biohash.model_from_json(cfg.model_path.read_text())
    return None


@main.command()
@click.option("--user", type=int, required=True)
@click.option("--sample", type=click.Path(exists=True), required=True,
              help="One-row feature table holding the enrollment sample.")
@click.option("--protected/--unprotected", "protected", default=None,
              help="Default: protected when a model artifact is present.")
@click.pass_obj
def enroll(cfg: RunConfig, user, sample, protected):
    """Hash (if protected) and store one template under the configured scheme."""
    vector = read_sample(sample, cfg.n)
    model = _load_model(cfg)
    if protected is None:
        protected = model is not None
    if protected and model is None:
        raise ConfigurationError(f"no model artifact at {cfg.model_path}")

    ws = Workspace(cfg)
    with ws.lock:
        ws.load(create=True)
        if protected:
            template = biohash.hash_vector(vector, model)
            payload = template.bits.to_bytes()
            metadata = str(template.bits.length).encode()
            mode = "protected"
        else:
            scaled = matcher.scale_to_fixed(vector.values, matcher.FixedPointConfig(cfg.scale))
            payload = chain_mod.encode_fixed_vector(scaled)
            metadata = b""
            mode = "fixed"
        receipt = ws.store.store_template(user, payload, metadata)
        ws.modes[user] = mode
        ws.save()
    click.echo(f"enrolled user {user} ({mode}, {len(payload)} bytes): "
               f"{format_receipt(receipt)}")


@main.command()
@click.option("--user", type=int, required=True)
@click.option("--probe", type=click.Path(exists=True), required=True)
@click.option("--threshold", type=float, default=None)
@click.pass_obj
def verify(cfg: RunConfig, user, probe, threshold):
    """Check integrity, score the probe and print an accept/reject decision."""
    vector = read_sample(probe, cfg.n)
    ws = Workspace(cfg)
    with ws.lock:
        if not ws.load():
            raise UserNotFoundError("no chain state found; nothing is enrolled")
        if user not in ws.modes:
            raise UserNotFoundError(f"user {user} is not enrolled")
        if not ws.store.verify_integrity(user):
            raise TamperError(f"stored template for user {user} failed its integrity check")

        mode = ws.modes[user]
        if mode == "protected":
            model = _load_model(cfg)
            if model is None:
                raise ConfigurationError(f"no model artifact at {cfg.model_path}")
            bits = biohash.hash_vector(vector, model).bits
            if ws.scheme is storage.SchemeKind.FULL_ONCHAIN:
                distance, receipt = ws.chain.onchain_hamming(user, bits)
            else:
                stored = BitString.from_bytes(ws.store.load_template(user), bits.length)
                distance = matcher.hamming(stored, bits)
                _, receipt = chain_receipt_zero(ws, user)
            score = matcher.MatchScore(float(distance), "hamming")
            limit = threshold if threshold is not None else (
                cfg.threshold if cfg.threshold is not None else model.dev_threshold)
        else:
            fp_cfg = matcher.FixedPointConfig(cfg.scale)
            scaled = matcher.scale_to_fixed(vector.values, fp_cfg)
            if ws.scheme is storage.SchemeKind.FULL_ONCHAIN:
                distance, receipt = ws.chain.onchain_euclidean(user, scaled, fp_cfg)
                ws.save()  # the metered match lands in the transaction log
            else:
                stored = chain_mod.decode_fixed_vector(ws.store.load_template(user))
                distance = matcher.fixedpoint_euclidean(stored, scaled, fp_cfg)
                _, receipt = chain_receipt_zero(ws, user)
            score = matcher.MatchScore(float(distance), "fixedpoint_euclidean")
            limit = threshold if threshold is not None else cfg.threshold
            if limit is None:
                raise ConfigurationError(
                    "unprotected verification needs --threshold (or a config value)"
                )

    decision = "ACCEPT" if score.value <= limit else "REJECT"
    click.echo(f"user {user}: score={score.value:g} ({score.metric}) "
               f"threshold={limit:g} -> {decision} [{format_receipt(receipt)}]")


def chain_receipt_zero(ws: Workspace, user: int):
    """Zero-gas receipt for off-chain matching after an on-chain integrity read."""
    record, receipt = ws.chain.retrieve(
        user if ws.scheme is not storage.SchemeKind.MERKLE_TREE else storage.MERKLE_ROOT_KEY
    )
    return record, receipt


@main.command()
@click.option("--user", type=int, required=True)
@click.pass_obj
def delete(cfg: RunConfig, user):
    """Remove a template under the configured scheme."""
    ws = Workspace(cfg)
    with ws.lock:
        if not ws.load():
            raise UserNotFoundError("no chain state found; nothing is enrolled")
        receipt = ws.store.delete_template(user)
        ws.modes.pop(user, None)
        ws.save()
    click.echo(f"deleted user {user}: {format_receipt(receipt)}")


def _parse_configs(text: str):
    configs = []
    for part in text.split(","):
        theta, _, d = part.partition(":")
        configs.append((int(theta), int(d)))
    return configs


@main.command()
@click.option("--data", type=click.Path(), default=None)
@click.option("--configs", default="0:25,1:167,2:500",
              help="Comma-separated theta:target_d settings for the protected rows.")
@click.option("--pairs", "n_pairs", type=int, default=100,
              help="Genuine and impostor evaluation pairs (each).")
@click.option("--pool-size", type=int, default=None)
@click.pass_obj
def evaluate(cfg: RunConfig, data, configs, n_pairs, pool_size):
    """Protection table: unprotected baseline vs. protected configurations."""
    dataset = _load_dataset(cfg, data)
    dev_rows, eval_rows = [], []
    for indices in dataset.subjects.values():
        for k, i in enumerate(indices):
            (dev_rows if k % 2 == 0 else eval_rows).append(dataset[i])
    dev_ds = features.FeatureDataset(dev_rows)
    eval_ds = features.FeatureDataset(eval_rows)
    devset = biohash.DevSet(dev_ds, _dev_pairs(dev_ds, cfg, n_pairs))
    eval_pairs = _dev_pairs(eval_ds, cfg, n_pairs)

    parsed = _parse_configs(configs)
    rows = evaluation.protection_table(devset, eval_ds, eval_pairs, parsed,
                                       m=cfg.m, q=cfg.q, seed=cfg.seed)
    table = [(r.case, r.theta, r.n_features, 1 if r.feature_kind == "binary" else 0,
              round(100 * r.eer, 4)) for r in rows]
    summary = {"rows": [r.__dict__ for r in rows],
               "configs": parsed, "pairs_each": n_pairs, "seed": cfg.seed}
    csv_path, _ = write_report(table, ["case", "theta", "n_features", "binary", "eer_percent"],
                               cfg.reports_path, "protection", summary)
    plots.plot_protection(rows, cfg.reports_path / "protection.png")
    for r in rows:
        click.echo(f"{r.case:<18} theta={r.theta} features={r.n_features} "
                   f"{r.feature_kind:<6} EER={100 * r.eer:.2f}%")
    click.echo(f"wrote {csv_path} (+ .json, .png)")


@main.command()
@click.option("--data", type=click.Path(), default=None)
@click.option("--sizes", default=None,
              help="Comma-separated template sizes (default: N, N/2, N/4, ...).")
@click.option("--trials", type=int, default=5)
@click.option("--pairs", "n_pairs", type=int, default=100)
@click.pass_obj
def sweep(cfg: RunConfig, data, sizes, trials, n_pairs):
    """Template-size sweep: mean EER and accuracy per retained feature count."""
    dataset = _load_dataset(cfg, data)
    if sizes:
        size_list = [int(s) for s in sizes.split(",")]
    else:
        size_list, s = [], dataset.dim
        while s >= 4:
            size_list.append(s)
            s //= 2
    pairs = _dev_pairs(dataset, cfg, n_pairs)
    curve = evaluation.size_sweep(dataset, pairs, size_list, trials, cfg.seed)
    table = [(p.size, p.trials, round(p.mean_eer, 6), round(p.mean_accuracy, 6))
             for p in curve]
    summary = {"curve": [p.__dict__ for p in curve], "trials": trials, "seed": cfg.seed}
    csv_path, _ = write_report(table, ["size", "trials", "mean_eer", "mean_accuracy"],
                               cfg.reports_path, "sweep", summary)
    plots.plot_sweep(curve, cfg.reports_path / "sweep.png")
    for p in curve:
        click.echo(f"size={p.size:<6} EER={100 * p.mean_eer:.2f}% "
                   f"accuracy={100 * p.mean_accuracy:.2f}%")
    click.echo(f"wrote {csv_path} (+ .json, .png)")


def _cost_rows(cfg: RunConfig):
    """Reference cost table on synthetic payload sizes."""
    schedule = cfg.schedule()
    config = chain_mod.ChainConfig(gas_price_gwei=cfg.gas_price_gwei, eth_usd=cfg.eth_usd)
    scratch = tempfile.TemporaryDirectory(prefix="biochain-costs-")
    rows = []

    def add(case, operation, scheme, gas, latency_class):
        eth, usd = chain_mod.convert(gas, config)
        latency = chain_mod.sample_latency(latency_class, config, cfg.seed)
        rows.append({"case": case, "operation": operation, "scheme": scheme,
                     "gas": gas, "eth": eth, "usd": usd, "latency_s": latency})

    def run_scheme(case, payload, scheme, latency_prefix):
        sim = chain_mod.SimulatedChain(schedule, config, cfg.seed)
        sim.deploy()
        offchain = None
        if scheme is not storage.SchemeKind.FULL_ONCHAIN:
            offchain = storage.OffChainStore(Path(scratch.name))
        store = storage.TemplateStore(scheme, sim, offchain)
        created = store.store_template(1, payload)
        add(case, "create", scheme.value, created.gas_used, f"{latency_prefix}.create")
        if scheme is storage.SchemeKind.FULL_ONCHAIN:
            modified = sim.modify(1, payload)
            add(case, "modify", scheme.value, modified.gas_used, f"{latency_prefix}.modify")
        add(case, "retrieve", scheme.value, 0, "retrieve")
        deleted = store.delete_template(1)
        add(case, "delete", scheme.value, deleted.gas_used, "delete")

    add("-", "deploy", "-", schedule.deploy_gas, "deploy")

    signature = bytes([1]) * 6174  # 3087 x 16-bit time-function samples
    face = bytes([1]) * 400  # 100 x 32-bit embedding coordinates
    for scheme in storage.SchemeKind:
        run_scheme("signature-3087x16", signature, scheme, "signature")
        run_scheme("face-100x32", face, scheme, "face")

    for bits in (75, 500, 1500):
        payload = bytes([1]) * ((bits + 7) // 8)
        sim = chain_mod.SimulatedChain(schedule, config, cfg.seed)
        sim.deploy()
        created = sim.create(1, payload, latency_class="face.create")
        add(f"face-protected-{bits}b", "create", "onchain", created.gas_used, "face.create")
        add(f"face-protected-{bits}b", "match-hamming", "onchain", 0, "match")
        deleted = sim.delete(1)
        add(f"face-protected-{bits}b", "delete", "onchain", deleted.gas_used, "delete")

    match_gas = schedule.match_base + schedule.match_per_sqrt
    add("face-100x32", "match-euclidean", "onchain", match_gas, "match")
    add("face-100x32", "match-euclidean-10000-users", "onchain", match_gas * 10_000, "match")

    # One-time Merkle anchor vs. its steady-state update, reported separately.
    sim = chain_mod.SimulatedChain(schedule, config, cfg.seed)
    sim.deploy()
    anchor = sim.create(storage.MERKLE_ROOT_KEY, storage.EMPTY_ROOT)
    add("merkle-root", "anchor-create-one-time", "merkle", anchor.gas_used, "create")
    update = sim.modify(storage.MERKLE_ROOT_KEY, storage.digest(b"x"))
    add("merkle-root", "root-update-per-template", "merkle", update.gas_used, "modify")

    storage_rows = []
    for direction in ("read", "write"):
        gas = chain_mod.estimate_storage_gas(1024, direction, schedule)
        eth, usd = chain_mod.convert(gas, config)
        storage_rows.append({"operation": direction, "gas": gas, "eth": eth, "usd": usd})
    return rows, storage_rows


@main.command("cost-report")
@click.pass_obj
def cost_report(cfg: RunConfig):
    """Gas/ETH/USD/latency table for the reference template configurations."""
    rows, storage_rows = _cost_rows(cfg)
    table = [(f"{r['case']}.{r['operation']}.{r['scheme']}", r["gas"],
              round(r["eth"], 12), round(r["usd"], 8), round(r["latency_s"], 4))
             for r in rows]
    summary = {"rows": rows, "storage_per_kb": storage_rows,
               "gas_price_gwei": cfg.gas_price_gwei, "eth_usd": cfg.eth_usd}
    csv_path, _ = write_report(table, ["row", "gas", "eth", "usd", "latency_s"],
                               cfg.reports_path, "cost_report", summary)
    storage_table = [(r["operation"], r["gas"], round(r["eth"], 12), round(r["usd"], 8))
                     for r in storage_rows]
    write_report(storage_table, ["operation", "gas_per_kb", "eth_per_kb", "usd_per_kb"],
                 cfg.reports_path, "storage_costs", {"rows": storage_rows})
    plots.plot_cost_report(rows, storage_rows, cfg.reports_path / "cost_report.png")
    for r in storage_rows:
        click.echo(f"storage {r['operation']:<5} 1KB: gas={r['gas']:<8} "
                   f"eth={r['eth']:.6f} usd=${r['usd']:.4f}")
    for r in rows:
        click.echo(f"{r['case']:<24} {r['operation']:<28} [{r['scheme']:<7}] "
                   f"gas={r['gas']:<11} usd=${r['usd']:.5f} latency={r['latency_s']:.2f}s")
    click.echo(f"wrote {csv_path} (+ .json, .png, storage_costs.*)")


@main.command("chain-log")
@click.option("--out", "out_stem", default=None,
              help="Also write <reports>/<out>.csv and .json.")
@click.pass_obj
def chain_log(cfg: RunConfig, out_stem):
    """Print the transaction log of the persisted chain state."""
    ws = Workspace(cfg)
    with ws.lock:
        loaded = ws.load(adopt_scheme=True)
    if not loaded:
        click.echo("no chain state; the log is empty")
        return
    header = ["entry", "gas", "eth", "usd", "latency_s"]
    table = []
    for i, r in enumerate(ws.chain.tx_log):
        if r.user is None:
            user = "-"
        elif r.user == storage.MERKLE_ROOT_KEY:
            user = "merkle-root"
        else:
            user = r.user
        table.append((f"{i}.{r.op}.{user}", r.gas_used, round(r.eth_cost, 12),
                      round(r.usd_cost, 8), round(r.latency_s, 4)))
        click.echo(f"[{i:>3}] {r.op:<16} user={user:<6} {format_receipt(r)}")
    total = sum(r.gas_used for r in ws.chain.tx_log)
    eth, usd = chain_mod.convert(total, ws.chain.config)
    click.echo(f"total: gas={total} eth={eth:.9f} usd=${usd:.6f}")
    if out_stem:
        write_report(table, header, cfg.reports_path, out_stem,
                     {"log": ws.chain.snapshot()["tx_log"], "total_gas": total})


def run():
    try:
        main(standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        sys.exit(2)
    except click.exceptions.Abort:
        sys.exit(130)
    except BiochainError as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        sys.exit(1)


if __name__ == "__main__":
    run()
