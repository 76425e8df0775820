import json
import subprocess
import sys
from pathlib import Path

import pytest
from click.testing import CliRunner

from biochain.cli import main
from biochain.errors import (
    ConfigurationError,
    DuplicateUserError,
    PayloadError,
    TamperError,
    UserNotFoundError,
)
from biochain.features import load_feature_table
from biochain.storage import OffChainStore


@pytest.fixture()
def runner():
    return CliRunner()


def invoke(runner, args, **kwargs):
    result = runner.invoke(main, args, catch_exceptions=True, **kwargs)
    return result


def make_dataset(runner, path="data.csv", dim=100, classes=4, per_class=6, seed=3):
    result = invoke(runner, [
        "--seed", str(seed), "synth", "--classes", str(classes),
        "--per-class", str(per_class), "--dim", str(dim),
        "--intra", "0.2", "--inter", "5.0", "--out", path,
    ])
    assert result.exit_code == 0, result.output
    return path


def write_sample(src_csv, row, out):
    lines = Path(src_csv).read_text().splitlines()
    Path(out).write_text(lines[row] + "\n")
    return out


class TestTrain:
    def test_reports_75_bits_and_writes_artifact(self, runner):
        with runner.isolated_filesystem():
            make_dataset(runner)
            result = invoke(runner, ["train", "--data", "data.csv", "--dev-pairs", "20"])
            assert result.exit_code == 0, result.output
            assert "L=75 bits" in result.output
            assert Path("biochain-state/model.json").exists()

    def test_same_seed_gives_byte_identical_artifacts(self, runner):
        with runner.isolated_filesystem():
            make_dataset(runner)
            invoke(runner, ["train", "--data", "data.csv", "--out", "m1.json",
                            "--dev-pairs", "20"])
            invoke(runner, ["train", "--data", "data.csv", "--out", "m2.json",
                            "--dev-pairs", "20"])
            assert Path("m1.json").read_bytes() == Path("m2.json").read_bytes()

    def test_missing_dataset_names_the_path(self, runner):
        with runner.isolated_filesystem():
            result = invoke(runner, ["train", "--data", "nowhere.csv"])
            assert result.exit_code != 0
            assert isinstance(result.exception, ConfigurationError)
            assert "nowhere.csv" in str(result.exception)


class TestEnrollVerify:
    def setup_state(self, runner, scheme="merkle"):
        make_dataset(runner)
        invoke(runner, ["train", "--data", "data.csv", "--dev-pairs", "20"])
        write_sample("data.csv", 0, "sample.csv")
        write_sample("data.csv", 1, "genuine.csv")  # same subject, other sample
        write_sample("data.csv", 7, "impostor.csv")  # different subject
        result = invoke(runner, ["--scheme", scheme, "enroll",
                                 "--user", "1", "--sample", "sample.csv"])
        assert result.exit_code == 0, result.output
        return result

    def test_self_match_scores_zero(self, runner):
        with runner.isolated_filesystem():
            self.setup_state(runner)
            result = invoke(runner, ["--scheme", "merkle", "verify",
                                     "--user", "1", "--probe", "sample.csv"])
            assert result.exit_code == 0, result.output
            assert "score=0 " in result.output
            assert "ACCEPT" in result.output

    def test_genuine_accepts_impostor_rejects(self, runner):
        with runner.isolated_filesystem():
            self.setup_state(runner)
            genuine = invoke(runner, ["--scheme", "merkle", "verify",
                                      "--user", "1", "--probe", "genuine.csv"])
            impostor = invoke(runner, ["--scheme", "merkle", "verify",
                                       "--user", "1", "--probe", "impostor.csv"])
            assert "ACCEPT" in genuine.output
            assert "REJECT" in impostor.output
            assert impostor.exit_code == 0  # a reject is a verdict, not an error

    def test_merkle_enrollments_cost_identical_gas(self, runner):
        with runner.isolated_filesystem():
            self.setup_state(runner)
            second = invoke(runner, ["--scheme", "merkle", "enroll",
                                     "--user", "2", "--sample", "impostor.csv"])
            state = json.loads(Path("biochain-state/chain.json").read_text())
            stores = [t for t in state["chain"]["tx_log"] if t["op"] == "modify"]
            assert len(stores) == 2
            assert stores[0]["gas_used"] == stores[1]["gas_used"]
            assert second.exit_code == 0

    def test_duplicate_enroll_fails(self, runner):
        with runner.isolated_filesystem():
            self.setup_state(runner)
            result = invoke(runner, ["--scheme", "merkle", "enroll",
                                     "--user", "1", "--sample", "sample.csv"])
            assert result.exit_code != 0
            assert isinstance(result.exception, DuplicateUserError)

    def test_empty_sample_is_payload_error(self, runner):
        with runner.isolated_filesystem():
            make_dataset(runner)
            Path("empty.csv").write_text("")
            result = invoke(runner, ["enroll", "--user", "1", "--sample", "empty.csv"])
            assert result.exit_code != 0
            assert isinstance(result.exception, PayloadError)

    def test_tamper_verdict_distinct_from_reject(self, runner):
        with runner.isolated_filesystem():
            self.setup_state(runner)
            OffChainStore("biochain-state/offchain").tamper(1, 2, 0x04)
            result = invoke(runner, ["--scheme", "merkle", "verify",
                                     "--user", "1", "--probe", "genuine.csv"])
            assert result.exit_code != 0
            assert isinstance(result.exception, TamperError)

    def test_unknown_user(self, runner):
        with runner.isolated_filesystem():
            self.setup_state(runner)
            result = invoke(runner, ["--scheme", "merkle", "verify",
                                     "--user", "9", "--probe", "genuine.csv"])
            assert result.exit_code != 0
            assert isinstance(result.exception, UserNotFoundError)

    def test_unprotected_onchain_match_is_metered(self, runner):
        with runner.isolated_filesystem():
            make_dataset(runner)
            write_sample("data.csv", 0, "sample.csv")
            invoke(runner, ["enroll", "--user", "1", "--sample", "sample.csv",
                            "--unprotected"])
            result = invoke(runner, ["verify", "--user", "1", "--probe", "sample.csv",
                                     "--threshold", "50"])
            assert result.exit_code == 0, result.output
            assert "score=0 " in result.output and "gas=31304" in result.output
            state = json.loads(Path("biochain-state/chain.json").read_text())
            assert state["chain"]["tx_log"][-1]["op"] == "match.euclidean"

    def test_scheme_mismatch_detected(self, runner):
        with runner.isolated_filesystem():
            self.setup_state(runner, scheme="merkle")
            result = invoke(runner, ["--scheme", "hash", "verify",
                                     "--user", "1", "--probe", "genuine.csv"])
            assert result.exit_code != 0
            assert isinstance(result.exception, ConfigurationError)

    def test_delete_then_verify_is_not_found(self, runner):
        with runner.isolated_filesystem():
            self.setup_state(runner)
            assert invoke(runner, ["--scheme", "merkle", "delete", "--user", "1"]).exit_code == 0
            result = invoke(runner, ["--scheme", "merkle", "verify",
                                     "--user", "1", "--probe", "genuine.csv"])
            assert isinstance(result.exception, UserNotFoundError)


class TestReports:
    def test_evaluate_row_count_and_synthetic_performance(self, runner):
        with runner.isolated_filesystem():
            make_dataset(runner, classes=2, per_class=12)
            result = invoke(runner, ["evaluate", "--data", "data.csv",
                                     "--configs", "0:25,1:30", "--pairs", "20"])
            assert result.exit_code == 0, result.output
            table = load_feature_table(Path("biochain-state/reports/protection.csv").read_text(), 4)
            assert len(table) == 3  # configs + baseline
            for row in table:
                assert row.values[3] < 5.0  # EER percent column

    def test_sweep_full_size_equals_direct_evaluation(self, runner):
        with runner.isolated_filesystem():
            make_dataset(runner)
            result = invoke(runner, ["sweep", "--data", "data.csv", "--sizes", "100",
                                     "--trials", "3", "--pairs", "20"])
            assert result.exit_code == 0, result.output
            rows = load_feature_table(Path("biochain-state/reports/sweep.csv").read_text(), 3)
            from biochain import evaluation, features
            dataset = load_feature_table(Path("data.csv").read_text(), 100)
            pairs = features.make_pairs(dataset, 20, 20, 3)
            report = evaluation.evaluate_scores(evaluation.euclidean_scores(dataset, pairs))
            assert rows[0].values[1] == pytest.approx(round(report.eer, 6))
            assert rows[0].values[2] == pytest.approx(round(report.accuracy, 6))

    def test_sweep_deterministic_given_seed(self, runner):
        with runner.isolated_filesystem():
            make_dataset(runner)
            invoke(runner, ["--state-dir", "s1", "sweep", "--data", "data.csv",
                            "--sizes", "100,50", "--trials", "2", "--pairs", "10"])
            invoke(runner, ["--state-dir", "s2", "sweep", "--data", "data.csv",
                            "--sizes", "100,50", "--trials", "2", "--pairs", "10"])
            assert Path("s1/reports/sweep.csv").read_bytes() \
                == Path("s2/reports/sweep.csv").read_bytes()

    def test_cost_report_key_values(self, runner):
        with runner.isolated_filesystem():
            result = invoke(runner, ["cost-report"])
            assert result.exit_code == 0, result.output
            summary = json.loads(Path("biochain-state/reports/cost_report.json").read_text())
            by_kb = {r["operation"]: r["gas"] for r in summary["storage_per_kb"]}
            assert by_kb == {"read": 6_400, "write": 640_000}
            rows = {(r["case"], r["operation"], r["scheme"]): r for r in summary["rows"]}
            sig = rows[("signature-3087x16", "create", "onchain")]
            assert abs(sig["gas"] - 4_358_990) <= 0.05 * 4_358_990
            bulk = rows[("face-100x32", "match-euclidean-10000-users", "onchain")]
            assert 50.0 <= bulk["usd"] <= 56.0
            assert Path("biochain-state/reports/cost_report.png").exists()

    def test_reports_are_parseable_by_the_feature_loader(self, runner):
        with runner.isolated_filesystem():
            invoke(runner, ["cost-report"])
            text = Path("biochain-state/reports/cost_report.csv").read_text()
            table = load_feature_table(text, 4)
            assert len(table) > 10
            storage_text = Path("biochain-state/reports/storage_costs.csv").read_text()
            assert len(load_feature_table(storage_text, 3)) == 2

    def test_figures_written_alongside_tables(self, runner):
        with runner.isolated_filesystem():
            make_dataset(runner, classes=2, per_class=12)
            invoke(runner, ["sweep", "--data", "data.csv", "--sizes", "100,50",
                            "--trials", "2", "--pairs", "10"])
            invoke(runner, ["evaluate", "--data", "data.csv", "--configs", "0:10",
                            "--pairs", "10"])
            reports = Path("biochain-state/reports")
            for stem in ["sweep", "protection"]:
                assert (reports / f"{stem}.csv").exists()
                assert (reports / f"{stem}.json").exists()
                assert (reports / f"{stem}.png").exists()


class TestConfigPrecedence:
    def test_flags_override_file_values(self, runner):
        with runner.isolated_filesystem():
            Path("run.conf").write_text("gas_price_gwei = 5.0\nseed = 9\n")
            make_dataset(runner)
            write_sample("data.csv", 0, "sample.csv")
            result = invoke(runner, ["--config", "run.conf", "--gas-price", "2.0",
                                     "enroll", "--user", "1", "--sample", "sample.csv",
                                     "--unprotected"])
            assert result.exit_code == 0, result.output
            state = json.loads(Path("biochain-state/chain.json").read_text())
            create = state["chain"]["tx_log"][-1]
            assert create["eth_cost"] == pytest.approx(create["gas_used"] * 2.0 * 1e-9)

    def test_gas_schedule_overrides_from_config(self, runner):
        with runner.isolated_filesystem():
            Path("run.conf").write_text("gas.sstore_new = 10000\n")
            result = invoke(runner, ["--config", "run.conf", "cost-report"])
            assert result.exit_code == 0, result.output
            summary = json.loads(Path("biochain-state/reports/cost_report.json").read_text())
            by_kb = {r["operation"]: r["gas"] for r in summary["storage_per_kb"]}
            assert by_kb["write"] == 320_000  # 32 slots at the overridden rate

    def test_unknown_config_key_rejected(self, runner):
        with runner.isolated_filesystem():
            Path("run.conf").write_text("warp_speed = 11\n")
            result = invoke(runner, ["--config", "run.conf", "cost-report"])
            assert result.exit_code != 0
            assert isinstance(result.exception, ConfigurationError)


class TestChainLog:
    def test_empty_state_message(self, runner):
        with runner.isolated_filesystem():
            result = invoke(runner, ["chain-log"])
            assert result.exit_code == 0
            assert "empty" in result.output

    def test_log_lists_operations_and_total(self, runner):
        with runner.isolated_filesystem():
            make_dataset(runner)
            write_sample("data.csv", 0, "sample.csv")
            invoke(runner, ["enroll", "--user", "1", "--sample", "sample.csv",
                            "--unprotected"])
            result = invoke(runner, ["chain-log", "--out", "log"])
            assert result.exit_code == 0
            assert "deploy" in result.output and "create" in result.output
            assert "total:" in result.output
            assert Path("biochain-state/reports/log.csv").exists()


class TestErrorStream:
    def test_one_line_code_on_stderr(self, tmp_path):
        # The installed entry point maps library errors to one-line codes.
        proc = subprocess.run(
            [sys.executable, "-m", "biochain.cli", "--state-dir", str(tmp_path / "s"),
             "verify", "--user", "1", "--probe", str(tmp_path / "missing.csv")],
            capture_output=True, text=True,
        )
        assert proc.returncode == 2  # click validates the missing probe path
        proc = subprocess.run(
            [sys.executable, "-m", "biochain.cli", "--state-dir", str(tmp_path / "s"),
             "delete", "--user", "1"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 1
        assert proc.stderr.splitlines()[-1].startswith("error: user-not-found:")
