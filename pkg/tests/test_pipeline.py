import pandas as pd
import pytest

from pipeline import build_parser, run


def test_capacity_bound(tmp_path, capsys):
    code = run(["--output-dir", str(tmp_path), "capacity", "bound", "--arch", "1,1,1"])
    assert code == 0
    assert "U=6" in capsys.readouterr().out
    frame = pd.read_csv(tmp_path / "reports" / "bound_1_1_1.csv")
    assert frame["U"].tolist() == [6]
    assert (tmp_path / "manifest_capacity-bound.json").exists()


def test_unknown_command_is_usage_error():
    assert run(["frobnicate"]) == 2
    assert run([]) == 2


def test_invalid_input_exits_with_one(tmp_path, capsys):
    code = run(["--output-dir", str(tmp_path), "build", "--kind", "step", "--K", "4", "--delta", "0.5"])
    assert code == 1
    assert "InvalidInputError" in capsys.readouterr().err


def test_build_writes_network(tmp_path):
    assert run(["--output-dir", str(tmp_path), "build", "--kind", "requ-square"]) == 0
    assert (tmp_path / "networks" / "requ-square_d1_N1_L1.json").exists()


def test_reruns_are_byte_identical(tmp_path):
    argv = ["capacity", "shatter", "--arch", "1,2,1", "--m", "2", "--samples", "5000"]
    assert run(["--output-dir", str(tmp_path / "a"), "--seed", "7"] + argv) == 0
    assert run(["--output-dir", str(tmp_path / "b"), "--seed", "7", "--threads", "2"] + argv) == 0
    name = "reports/shatter_1_2_1_m2.csv"
    assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_shatter_records_sampler(tmp_path):
    argv = ["--output-dir", str(tmp_path), "capacity", "shatter", "--arch", "1,1,1", "--m", "2",
            "--samples", "2000", "--sampler", "grid", "--search-m"]
    assert run(argv) == 0
    frame = pd.read_csv(tmp_path / "reports" / "shatter_1_1_1_m2.csv")
    assert set(frame["sampler"]) == {"grid"}
    assert frame["m"].tolist()[0] == 1


def test_replay_reproduces_training(tmp_path):
    argv = ["--output-dir", str(tmp_path / "a"), "--seed", "3", "train", "--steps", "5", "--M", "16",
            "--hidden", "4"]
    assert run(argv) == 0
    manifest = tmp_path / "a" / "manifest_train.json"
    assert run(["--replay", str(manifest), "--output-dir", str(tmp_path / "b")]) == 0
    name = "reports/train_sin1d_M16_seed3_trajectory.csv"
    assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_parser_defaults():
    args = build_parser().parse_args(["gap-sweep", "--Ms", "2^6..2^7"])
    assert args.Ms == [64, 128]
    assert args.replicas == 20
    with pytest.raises(SystemExit):
        build_parser().parse_args(["-v", "-q", "train"])
