import csv
import json
import shutil

import pytest

import main
from charges.cli import RunOptions, collect_inputs, run, solve_instance, verify_verdict
from charges.instances import VerdictStore, load_instance
from charges.selftest import run_selftest

from conftest import INSTANCES_DIR


@pytest.fixture
def batch(tmp_path):
    "Copies bundled instances into tmp_path and returns their paths by name."
    def _copy(*names):
        paths = {}
        for name in names:
            paths[name] = tmp_path / f"{name}.json"
            shutil.copy(INSTANCES_DIR / f"{name}.json", paths[name])
        return paths
    return _copy


def read_verdict(path):
    return json.loads(path.with_name(path.stem + ".verdict.json").read_text())


def test_check_without_representation_exits_one(batch):
    path = batch("check_no_representation")["check_no_representation"]
    assert run("check", [path], RunOptions()) == 1
    verdict = read_verdict(path)
    assert verdict["outcome"] == "infeasible"
    assert verdict["witness"]["certificate"] == {"h1": "1/1"}
    assert verify_verdict(load_instance(path), verdict)[0]


def test_represent_mixture(batch):
    path = batch("check_mixture")["check_mixture"]
    assert run("represent", [path], RunOptions()) == 0
    verdict = read_verdict(path)
    assert verdict["witness"]["mu"] == {"a": "1/2", "b": "0/1", "c": "1/2"}
    assert verdict["witness"]["residual"] == {"h1": "0/1", "h2": "0/1"}
    assert verify_verdict(load_instance(path), verdict)[0]


def test_tampered_certificate_fails_verification(batch):
    path = batch("check_no_representation")["check_no_representation"]
    run("check", [path], RunOptions())
    verdict = read_verdict(path)
    verdict["witness"]["certificate"] = {"h1": "-1/1"}
    assert not verify_verdict(load_instance(path), verdict)[0]


def test_integral_value(batch):
    path = batch("integral_uniform")["integral_uniform"]
    assert run("integrate", [path], RunOptions()) == 0
    verdict = read_verdict(path)
    assert verdict["witness"]["value"] == "2/1"
    assert verify_verdict(load_instance(path), verdict)[0]


def test_companion_with_nulls(batch):
    path = batch("companion_nulls")["companion_nulls"]
    assert run("companion", [path], RunOptions()) == 0
    verdict = read_verdict(path)
    assert verdict["witness"]["mu"] == {"1": "1/2", "2": "1/2", "3": "0/1"}
    assert verify_verdict(load_instance(path), verdict)[0]


def test_companion_emits_minimal_ring(batch):
    path = batch("companion_extend")["companion_extend"]
    assert run("companion", [path], RunOptions(emit_minimal_ring=True)) == 0
    assert "minimal_ring" in read_verdict(path)["witness"]


def test_disintegration_takeout(batch):
    path = batch("disintegration_takeout")["disintegration_takeout"]
    assert run("disintegrate", [path], RunOptions()) == 0
    verdict = read_verdict(path)
    assert verdict["witness"]["mu"] == {"A": "1/2", "B": "1/2"}
    assert verdict["witness"]["takeout"]["holds"] is True
    assert verify_verdict(load_instance(path), verdict)[0]


def test_decompose_instances(batch):
    paths = batch("convex_hinge", "convex_square_sampled")
    assert run("decompose", list(paths.values()), RunOptions()) == 0
    hinge = read_verdict(paths["convex_hinge"])
    assert hinge["witness"]["max_error"] == "0/1"
    assert hinge["witness"]["stieltjes"]["consistent"] is True
    sampled = read_verdict(paths["convex_square_sampled"])
    assert sampled["outcome"] == "value"
    assert sampled["witness"]["stieltjes"]["consistent"] is True


def test_skorohod_verdict_is_reproducible(batch):
    path = batch("skorohod_three_points")["skorohod_three_points"]
    assert run("skorohod", [path], RunOptions(seed=99)) == 0
    verdict = read_verdict(path)
    assert verdict["witness"]["sample"]["samples"] == 20000
    assert verify_verdict(load_instance(path), verdict)[0]


def test_malformed_file_gets_an_error_verdict(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{oops")
    assert run("check", [path], RunOptions()) == 2
    verdict = read_verdict(path)
    assert verdict["outcome"] == "error"
    assert verdict["witness"]["location"] == "$"


def test_kind_mismatch_is_an_error(batch):
    path = batch("integral_uniform")["integral_uniform"]
    verdict, code = solve_instance("decompose", load_instance(path), RunOptions())
    assert code == 2
    assert verdict["witness"]["location"] == "$.kind"


def test_batch_takes_the_worst_exit_code(batch, tmp_path):
    batch("check_mixture", "check_no_representation")
    summary = tmp_path / "summary.csv"
    assert run("check", [tmp_path], RunOptions(summary=summary, workers=2)) == 1
    with open(summary, newline="") as f:
        rows = list(csv.DictReader(f))
    assert {r["id"]: r["outcome"] for r in rows} == {
        "check_mixture": "feasible",
        "check_no_representation": "infeasible",
    }


def test_concurrent_summary_follows_input_order(write_instance, tmp_path):
    names = [f"i{k:02d}" for k in range(12)]
    for k, name in enumerate(names):
        width = 12 if k % 2 == 0 else 1
        T = [[(r * 7 + c * 3) % 5 - 2 for c in range(width)] for r in range(3)]
        write_instance(name, "conglomerability", {
            "basis": ["h1", "h2", "h3"],
            "omega": [f"w{c}" for c in range(width)],
            "T": T,
            "phi": [1, -1, 2],
        })
    first, second = tmp_path / "first.csv", tmp_path / "second.csv"
    run("represent", [tmp_path], RunOptions(workers=8, summary=first))
    run("represent", [tmp_path], RunOptions(workers=8, summary=second))
    assert first.read_bytes() == second.read_bytes()
    with open(first, newline="") as f:
        assert [row["id"] for row in csv.DictReader(f)] == names


def test_directories_skip_verdict_files(batch, tmp_path):
    batch("integral_uniform")
    run("integrate", [tmp_path], RunOptions())
    files, found = collect_inputs([tmp_path], VerdictStore())
    assert found
    assert [f.name for f in files] == ["integral_uniform.json"]


def test_missing_input(tmp_path):
    assert run("check", [tmp_path / "absent.json"], RunOptions()) == 2


def test_main_reads_its_config(batch, tmp_path):
    path = batch("skorohod_three_points")["skorohod_three_points"]
    config = tmp_path / "settings.ini"
    config.write_text("[Logging]\nlevel = WARNING\n\n[Sampler]\nseed = 4\nsamples = 500\n")
    assert main.main(["skorohod", str(path), "--config", str(config)]) == 0
    assert read_verdict(path)["witness"]["sample"]["seed"] == 4


def test_main_creates_a_default_config(tmp_path):
    config = tmp_path / "fresh.ini"
    assert main.main(["check", "--config", str(config)]) == 2
    assert "[Sampler]" in config.read_text()


def test_flags_override_config(tmp_path):
    config = tmp_path / "fresh.ini"
    main.load_config(str(config))
    options = main.options_from_config(main.load_config(str(config)))
    assert options.seed == 12345 and options.summary is None
    args = main.build_parser().parse_args(["skorohod", "x.json", "--seed", "7", "--tolerance", "1/100"])
    assert args.seed == 7 and str(args.tolerance) == "1/100"


def test_selftest_suites():
    results = run_selftest(only=["null_ideal", "two_measure_consistency"])
    assert [name for name, _, _ in results] == ["null_ideal", "two_measure_consistency"]
    assert all(ok for _, ok, _ in results), results
