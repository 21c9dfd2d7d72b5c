import json

import pytest
import yaml

from dualgrasp import __version__
from dualgrasp.cli import main
from dualgrasp.config import (
    ConfigError,
    PipelineConfig,
    dump_config,
    from_dict,
    leaf_paths,
    load_config,
    with_overrides,
)
from dualgrasp.dataset_io import read_dataset, tree_digest
from dualgrasp.geometry import primitives
from oracles import write_obj


# -- config ---------------------------------------------------------------------

def test_yaml_round_trip(tmp_path):
    cfg = from_dict({"objects": [{"path": "a.obj", "scale": 0.5}, "b.obj"], "seed": 3,
                     "pairing": {"budget": 10, "max_eval_pairs": 200}, "solver": {"adaptive_rho": False}})
    path = tmp_path / "c.yaml"
    path.write_text(dump_config(cfg))
    back = load_config(path)
    assert back == cfg
    assert back.objects[1].key == "b" and back.objects[0].scale == 0.5
    assert back.hash() == cfg.hash()


def test_overrides_coerce_strings():
    cfg = with_overrides(PipelineConfig(), {"mu": "0.7", "pairing.max_eval_pairs": "none",
                                            "solver.adaptive_rho": "false", "sampler.n_grasps": "12"})
    assert cfg.mu == 0.7 and cfg.pairing.max_eval_pairs is None
    assert cfg.solver.adaptive_rho is False and cfg.sampler.n_grasps == 12


@pytest.mark.parametrize("data,match", [
    ({"bogus": 1}, "unknown key"),
    ({"solver": {"rho_maxx": 1}}, "unknown key"),
    ({"mu": "lots"}, "cannot read"),
    ({"sampler": {"n_grasps": 1.5}}, "cannot read"),
    ({"pairing": {"strategy": "best"}}, "strategy"),
    ({"threads": 0}, "threads"),
    ({"gripper": {"standoff": 1.0}}, "standoff"),
    ({"objects": ["a.obj", "dir/a.obj"]}, "unique"),
])
def test_bad_configs(data, match):
    with pytest.raises(ConfigError, match=match):
        from_dict(data)


def test_bad_yaml(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("mu: [1, 2\n")
    with pytest.raises(ConfigError, match="invalid YAML"):
        load_config(path)
    with pytest.raises(ConfigError, match="cannot read config"):
        load_config(tmp_path / "missing.yaml")


def test_hash_ignores_out_and_threads():
    base = PipelineConfig()
    assert with_overrides(base, {"out": "elsewhere", "threads": 8}).hash() == base.hash()
    assert with_overrides(base, {"seed": 1}).hash() != base.hash()
    assert with_overrides(base, {"solver.eps_abs": 1e-9}).hash() != base.hash()


def test_every_leaf_is_overridable():
    paths = dict(leaf_paths())
    assert "solver.adapt_every" in paths and "gripper.f_high" in paths and "objects" not in paths
    cfg = PipelineConfig()
    for path in paths:
        node = cfg.to_dict()
        for part in path.split("."):
            node = node[part]
        assert with_overrides(cfg, {path: node}) == cfg


# -- CLI ------------------------------------------------------------------------

@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    write_obj(root / "cube.obj", *primitives.box((0.06, 0.06, 0.06)))
    write_obj(root / "prism.obj", *primitives.l_prism(0.03))
    cfg = {"objects": [{"path": str(root / "cube.obj")}, {"path": str(root / "prism.obj"), "density": 80000.0}],
           "density": 40000.0, "sampler": {"n_grasps": 30}, "pairing": {"budget": 40}}
    (root / "cfg.yaml").write_text(yaml.safe_dump(cfg))
    return root


@pytest.fixture(scope="module")
def generated(workspace):
    dirs = []
    for name, threads in (("run_a", "1"), ("run_b", "3")):
        out = workspace / name
        code = main(["generate", "--config", str(workspace / "cfg.yaml"), "--seed", "7", "--out", str(out),
                     "--threads", threads])
        assert code == 0
        dirs.append(out)
    return dirs


def test_generate_is_reproducible(generated):
    a, b = generated
    assert tree_digest(a) == tree_digest(b)
    manifest, records = read_dataset(a)
    assert manifest.config["seed"] == 7
    assert set(records) == {"cube", "prism"}
    assert manifest.counts["pass"] > 0


def test_header_and_summary(workspace, capsys):
    code = main(["sample", "--config", str(workspace / "cfg.yaml"), "--out", str(workspace / "s"),
                 "--sampler.n_grasps", "5"])
    assert code == 0
    cap = capsys.readouterr()
    head = cap.err.splitlines()[0]
    assert head.startswith(f"# dualgrasp {__version__} command=sample seed=0 config_hash=")
    assert "#   sampler:" in cap.err and "n_grasps: 5" in cap.err
    summary = json.loads(cap.out)
    assert summary["cube"]["grasps"] == 5
    lines = (workspace / "s" / "grasps" / "cube.grasps").read_text().splitlines()
    assert len(lines) == 5 and "transform" in json.loads(lines[0])


def test_config_error_exit_code(workspace, capsys):
    assert main(["generate", "--mesh", str(workspace / "cube.obj"), "--mu", "abc"]) == 2
    err = capsys.readouterr().err.strip().splitlines()[-1]
    assert err.startswith("dualgrasp: error code=2 kind=config message=")
    assert main(["generate", "--out", str(workspace / "x")]) == 2  # no objects


def test_missing_mesh_exit_code(workspace, capsys):
    assert main(["sample", "--mesh", str(workspace / "nope.obj"), "--out", str(workspace / "y")]) == 3
    assert "code=3 kind=io" in capsys.readouterr().err
    assert main(["stats", str(workspace / "no_dataset")]) == 3


def test_stats_json(generated, capsys, tmp_path):
    assert main(["stats", str(generated[0]), "--json", "-"]) == 0
    out = capsys.readouterr().out
    data = json.loads(out[out.index("{"):])
    assert data["cube"]["total"] == data["cube"]["pass"] + data["cube"]["fail"]
    assert main(["stats", str(generated[0]), "--json", str(tmp_path / "s.json")]) == 0
    assert json.loads((tmp_path / "s.json").read_text()) == data


def test_viz_default_path(generated, capsys):
    assert main(["viz", str(generated[0]), "--object", "prism", "--index", "1"]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["path"] == str(generated[0] / "viz" / "prism_1.ply") and res["markers"] == 6
    assert (generated[0] / "viz" / "prism_1.ply").exists()
    assert main(["viz", str(generated[0]), "--index", "100000"]) == 2


def test_evaluate_higher_friction_keeps_passes(generated, capsys):
    assert main(["evaluate", str(generated[0]), "--mu", "0.8"]) == 0
    report = json.loads(capsys.readouterr().out)
    for row in report.values():
        assert row["pass_after"] >= row["pass_before"]
    assert main(["evaluate", str(generated[0]), "--mass-scale", "1000"]) == 0
    heavy = json.loads(capsys.readouterr().out)
    assert all(r["pass_after"] <= r["pass_before"] for r in heavy.values())


def test_ablate_table(workspace, capsys):
    out = workspace / "abl"
    assert main(["ablate", "--config", str(workspace / "cfg.yaml"), "--out", str(out),
                 "--sampler.n_grasps", "20"]) == 0
    table = capsys.readouterr().out.splitlines()
    assert table[0].split() == ["object", "force_closure", "random_pair", "farthest_pair"]
    assert {line.split()[0] for line in table[2:]} == {"cube", "prism"}
    report = json.loads((out / "ablation.json").read_text())
    assert set(report["cube"]) == {"force_closure", "random_pair", "farthest_pair"}
