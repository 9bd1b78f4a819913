# test_cli.py

import json

import numpy as np
import pytest

from conftest import write_pdb
from dod_cli import build_parser, main, parse_space
from spaces import Family, SpaceSpec

SQUARE = SpaceSpec.unit_square().to_json()
DISC = SpaceSpec.disc(0.5).to_json()


def run_json(capsys, argv):
    assert main(argv) == 0
    return json.loads(capsys.readouterr().out)


class TestParseSpace:
    def test_inline(self):
        assert parse_space(DISC) == SpaceSpec.disc(0.5)

    def test_file(self, tmp_path):
        path = tmp_path / "space.json"
        path.write_text(SpaceSpec.square_cap_disc(0.6).to_json())
        assert parse_space(str(path)).family is Family.SQUARE_CAP_DISC


class TestCommands:
    def test_sample_csv(self, capsys):
        assert main(["sample", "--space-a", SQUARE, "--n", "5", "--seed", "1", "--format", "csv"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "x,y"
        assert len(lines) == 6

    def test_sample_json_to_file(self, tmp_path):
        out = tmp_path / "points.json"
        main(["sample", "--space-a", DISC, "--n", "4", "--seed", "2", "--out", str(out)])
        records = json.loads(out.read_text())
        assert len(records) == 4 and set(records[0]) == {"x", "y"}

    def test_dod(self, capsys):
        records = run_json(capsys, ["dod", "--space-a", SQUARE, "--space-b", DISC, "--n", "20", "--seed", "1"])
        assert records[0]["n"] == 20 and records[0]["statistic"] >= 0

    def test_dod_independent(self, capsys):
        records = run_json(capsys, ["dod", "--space-a", SQUARE, "--space-b", DISC, "--n", "20", "--m", "30",
                                    "--seed", "1", "--method", "dod-ind"])
        assert (records[0]["n"], records[0]["m"]) == (10, 15)

    def test_bootstrap_test(self, capsys):
        records = run_json(capsys, ["test", "--space-a", SQUARE, "--space-b", DISC, "--n", "25", "--seed", "3",
                                    "--bootstrap-reps", "20", "--calibrate-from-y"])
        assert records[0]["calibration"] == "bootstrap"
        assert isinstance(records[0]["reject"], bool)

    def test_bootstrap_test_first_order(self, capsys):
        records = run_json(capsys, ["test", "--space-a", SQUARE, "--space-b", DISC, "--n", "25", "--seed", "3",
                                    "--bootstrap-reps", "20", "--p", "1"])
        assert records[0]["scaled_statistic"] > 0

    def test_power_csv(self, capsys):
        assert main(["power", "--space-a", SQUARE, "--space-b", DISC, "--n", "20", "--reps", "3",
                     "--bootstrap-reps", "20", "--seed", "4", "--format", "csv"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "n,rejection_rate,replications,mc_stderr"
        assert lines[1].startswith("20,")

    def test_power_bootstrap_options(self, capsys):
        records = run_json(capsys, ["power", "--space-a", SQUARE, "--space-b", DISC, "--n", "30", "--reps", "2",
                                    "--bootstrap-reps", "20", "--seed", "4", "--p", "1", "--n-b", "20",
                                    "--resample-rule", "power", "--calibrate-from-y"])
        assert records[0]["n"] == 30 and records[0]["replications"] == 2

    def test_power_plan_file(self, tmp_path, capsys):
        plan = {"name": "file", "space_a": json.loads(SQUARE), "space_b": json.loads(DISC), "n_list": [15],
                "replications": 2, "bootstrap_reps": 20, "seed": 5}
        path = tmp_path / "plan.json"
        path.write_text(json.dumps(plan))
        records = run_json(capsys, ["power", "--plan", str(path), "--seed", "0"])
        assert records[0]["replications"] == 2

    def test_power_unknown_preset(self):
        with pytest.raises(SystemExit):
            main(["power", "--preset", "no-such-plan", "--seed", "0"])

    def test_power_needs_design(self):
        with pytest.raises(SystemExit):
            main(["power", "--seed", "0"])

    def test_null_dist(self, capsys):
        assert main(["null-dist", "--space-a", SQUARE, "--n", "15", "--reps", "5", "--seed", "6",
                     "--format", "csv"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "value" and len(lines) == 6

    def test_alternative_dist(self, capsys):
        records = run_json(capsys, ["null-dist", "--space-a", SQUARE, "--space-b", DISC, "--n", "15", "--reps", "4",
                                    "--seed", "6"])
        assert len(records) == 4 and all(record["value"] >= 0 for record in records)

    def test_bootstrap_draws_csv(self, capsys):
        assert main(["bootstrap-draws", "--space-a", SQUARE, "--n", "20", "--bootstrap-reps", "6", "--seed", "7",
                     "--format", "csv"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "value" and len(lines) == 7
        values = [float(line) for line in lines[1:]]
        assert values == sorted(values)

    def test_limit_sample(self, capsys):
        records = run_json(capsys, ["limit-sample", "--grid-size", "32", "--draws", "10", "--seed", "7"])
        assert len(records) == 10
        assert all(record["value"] >= 0 for record in records)

    def test_limit_sample_disc(self, capsys):
        records = run_json(capsys, ["limit-sample", "--law", "disc-euclid", "--grid-size", "16", "--draws", "5",
                                    "--mc-draws", "150", "--seed", "8"])
        assert len(records) == 5

    def test_dtm_test(self, capsys):
        records = run_json(capsys, ["dtm-test", "--space-a", SQUARE, "--space-b", DISC, "--n", "60",
                                    "--bootstrap-reps", "20", "--seed", "9"])
        assert records[0]["calibration"] == "dtm-resample"

    def test_pdb_compare(self, tmp_path, capsys):
        coords = np.random.default_rng(3).uniform(0.0, 10.0, size=(50, 3))
        a = write_pdb(tmp_path / "a.pdb", coords)
        b = write_pdb(tmp_path / "b.pdb", coords + 1.0)
        records = run_json(capsys, ["pdb-compare", "--pdb-a", str(a), "--pdb-b", str(b), "--n", "30",
                                    "--reps", "2", "--bootstrap-reps", "20", "--seed", "10"])
        assert records[0]["n"] == 30

    def test_pdb_compare_dtm(self, tmp_path, capsys):
        coords = np.random.default_rng(4).uniform(0.0, 10.0, size=(80, 3))
        a = write_pdb(tmp_path / "a.pdb", coords)
        records = run_json(capsys, ["pdb-compare", "--pdb-a", str(a), "--pdb-b", str(a), "--n", "60", "--reps", "2",
                                    "--bootstrap-reps", "20", "--method", "dtm", "--kappa", "0.05", "--seed", "11"])
        assert records[0]["replications"] == 2

    def test_failure_is_reraised(self, capsys):
        with pytest.raises(ValueError):
            main(["dod", "--space-a", SQUARE, "--space-b", DISC, "--n", "20", "--seed", "1", "--beta", "0.7"])


def test_seed_is_required():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["dod", "--space-a", SQUARE, "--space-b", DISC, "--n", "5"])
