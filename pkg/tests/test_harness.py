import json
import os
import subprocess
import sys

import pytest

from kschaos.diagnostics.report import read_csv
from kschaos.errors import ConfigError
from kschaos.harness import run_experiment, validate_config
from kschaos.harness.cli import main
from kschaos.harness.runner import MANIFEST, sha256_file
from kschaos.particles import simulate

SMALL_SIM = {"n_particles": 16, "dt": 0.01, "t_end": 0.05}


def spec_text(kind, **sections):
    doc = {"schema_version": 1, "kind": kind}
    doc.update(sections)
    return json.dumps(doc)


def write_spec(tmp_path, text, name="spec.json"):
    p = tmp_path / name
    p.write_text(text if isinstance(text, str) else json.dumps(text))
    return str(p)


def checksums(manifest):
    return {a["path"]: a["sha256"] for a in manifest.data["artifacts"]}


# ---- validation ----------------------------------------------------------------


def test_minimal_particle_run_gets_defaults():
    spec = validate_config(spec_text("particle_run"))
    sim = spec.document["sim"]
    assert sim["n_particles"] == 64 and sim["alpha"] == 0.5 and sim["initial"]["kind"] == "gaussian"
    assert list(spec.seeds) == [0] and spec.output_dir.endswith("particle_run")
    assert spec.spec_hash == validate_config(json.dumps(spec.document)).spec_hash


def test_alpha_one_rejected_with_reason():
    with pytest.raises(ConfigError) as ei:
        validate_config(spec_text("particle_run", sim={"alpha": 1.0}))
    assert ei.value.pointer == "/sim/alpha"
    assert "sub-critical" in str(ei.value)


@pytest.mark.parametrize(
    "text, pointer",
    [
        ('{"schema_version": 1, "kind": "pde_run", "kind": "pde_run"}', ""),
        (spec_text("particle_run", sim={"nparticles": 3}), "/sim/nparticles"),
        (spec_text("particle_run", sim={"chi": True}), "/sim/chi"),
        (spec_text("particle_run", pde={}), "/pde"),
        (spec_text("particle_run", seeds=[-1]), "/seeds/0"),
        (spec_text("pde_run", pde={"grid": {"n": 1}}), "/pde/grid/n"),
        (spec_text("chaos_table", options={"n_list": [4096]}), "/options/n_list/0"),
        (spec_text("coupling_check", sim={"eps": 0.01}), "/sim/eps"),
        (spec_text("bogus"), "/kind"),
    ],
)
def test_invalid_specs_point_at_field(text, pointer):
    with pytest.raises(ConfigError) as ei:
        validate_config(text)
    assert ei.value.pointer == pointer


def test_nan_and_garbage_rejected():
    with pytest.raises(ConfigError):
        validate_config('{"schema_version": 1, "kind": "particle_run", "sim": {"chi": NaN}}')
    with pytest.raises(ConfigError):
        validate_config("{not json")
    with pytest.raises(ConfigError):
        validate_config(spec_text("particle_run", schema_version=2))


# ---- CLI ------------------------------------------------------------------------


def test_cli_exit_codes(tmp_path, capsys):
    good = write_spec(tmp_path, spec_text("particle_run", sim=SMALL_SIM), "good.json")
    assert main(["validate", good]) == 0
    assert json.loads(capsys.readouterr().out)["sim"]["n_particles"] == 16
    bad = write_spec(tmp_path, spec_text("particle_run", sim={"alpha": 1.0}), "bad.json")
    assert main(["validate", bad]) == 2
    assert "/sim/alpha" in capsys.readouterr().err
    assert main(["validate", str(tmp_path / "missing.json")]) == 2
    unstable = write_spec(
        tmp_path,
        spec_text("pde_run", pde={"grid": {"n": 32, "half_width": 5.0}, "dt": 0.05, "t_end": 0.1}),
        "cfl.json",
    )
    assert main(["run", unstable, "--out", str(tmp_path / "cfl")]) == 3
    assert not (tmp_path / "cfl" / MANIFEST).exists()


def test_cli_run_and_inspect(tmp_path, capsys):
    sp = write_spec(tmp_path, spec_text("particle_run", sim=SMALL_SIM, seeds=[3]))
    out = tmp_path / "out"
    assert main(["run", sp, "--out", str(out)]) == 0
    capsys.readouterr()
    assert main(["inspect", str(out / "trajectory_seed3.kstraj")]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["format"] == "KSTRAJ1" and info["n_particles"] == 16 and info["records"] == 6

    pde = write_spec(
        tmp_path,
        spec_text("pde_run", pde={"grid": {"n": 32, "half_width": 5.0}, "dt": 0.01, "t_end": 0.02}),
        "pde.json",
    )
    assert main(["run", pde, "--out", str(tmp_path / "pde")]) == 0
    capsys.readouterr()
    frames = sorted(p for p in os.listdir(tmp_path / "pde" / "frames") if p.endswith(".ksgrid"))
    assert main(["inspect", str(tmp_path / "pde" / "frames" / frames[-1])]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["format"] == "KSGRID1" and info["nx"] == 32 and info["mass"] == pytest.approx(1.0, rel=1e-12)

    junk = tmp_path / "junk.bin"
    junk.write_bytes(b"hello world")
    assert main(["inspect", str(junk)]) == 1


def test_console_script_entry_point(tmp_path):
    sp = write_spec(tmp_path, spec_text("particle_run", sim=SMALL_SIM))
    res = subprocess.run([sys.executable, "-m", "kschaos.harness.cli", "validate", sp], capture_output=True, text=True)
    assert res.returncode == 0 and '"n_particles": 16' in res.stdout


# ---- runs ---------------------------------------------------------------------


def test_manifest_truthful_and_rerun_identical(tmp_path):
    spec = validate_config(spec_text("particle_run", sim=SMALL_SIM, seeds=[0, 1, 2]))
    m1 = run_experiment(spec, out_dir=tmp_path / "a")
    m2 = run_experiment(spec, out_dir=tmp_path / "b", jobs=2)
    assert checksums(m1) == checksums(m2)
    on_disk = json.loads((tmp_path / "a" / MANIFEST).read_text())
    assert on_disk["spec_hash"] == spec.spec_hash and on_disk["spec"] == spec.document
    for a in on_disk["artifacts"]:
        assert sha256_file(tmp_path / "a" / a["path"]) == a["sha256"]
    assert {"particles.csv", "events.csv", "trajectory_seed0.kstraj"} <= set(checksums(m1))


def test_resume_reproduces_artifacts(tmp_path):
    spec = validate_config(spec_text("particle_run", sim=SMALL_SIM, seeds=[0, 1]))
    ref = checksums(run_experiment(spec, out_dir=tmp_path))
    os.remove(tmp_path / "trajectory_seed1.kstraj")
    with open(tmp_path / "trajectory_seed0.kstraj", "r+b") as fh:
        fh.truncate(os.path.getsize(tmp_path / "trajectory_seed0.kstraj") - 40)
    assert checksums(run_experiment(spec, out_dir=tmp_path, resume=True)) == ref
    assert checksums(run_experiment(spec, out_dir=tmp_path, resume=True)) == ref


def test_failed_run_leaves_no_manifest(tmp_path):
    ok = validate_config(spec_text("pde_run", pde={"grid": {"n": 32, "half_width": 5.0}, "dt": 0.01, "t_end": 0.02}))
    run_experiment(ok, out_dir=tmp_path)
    assert (tmp_path / MANIFEST).exists()
    bad = validate_config(spec_text("pde_run", pde={"grid": {"n": 32, "half_width": 5.0}, "dt": 0.05, "t_end": 0.1}))
    with pytest.raises(Exception):
        run_experiment(bad, out_dir=tmp_path)
    assert not (tmp_path / MANIFEST).exists()


def test_chaos_table_row_count(tmp_path):
    spec = validate_config(
        spec_text(
            "chaos_table",
            seeds=list(range(8)),
            sim={"dt": 0.05},
            pde={"grid": {"n": 64, "half_width": 6.0}, "dt": 0.002},
            options={"n_list": [128, 512, 2048], "t": 0.05},
        )
    )
    run_experiment(spec, out_dir=tmp_path)
    header, rows = read_csv(tmp_path / "chaos_table.csv")
    kinds = [r[header.index("row")] for r in rows]
    assert kinds.count("run") == 24 and kinds.count("mean") == 3
    runs = [r for r in rows if r[0] == "run"]
    keys = [(r[header.index("n")], r[header.index("seed")]) for r in runs]
    assert keys == sorted(keys)


def test_collision_scan_blank_fields(tmp_path):
    sim = {"n_particles": 16, "dt": 1e-3, "t_end": 0.05, "taming": 1.0}
    spec = validate_config(
        spec_text("collision_scan", seeds=list(range(16)), sim=sim, options={"eps_list": [1e-2, 1e-3, 1e-4]})
    )
    run_experiment(spec, out_dir=tmp_path, jobs=2)
    header, rows = read_csv(tmp_path / "collision_scan.csv")
    assert len(rows) == 48
    col = {c: i for i, c in enumerate(header)}
    blanks = 0
    for r in rows[::5]:
        eps, seed = r[col["eps"]], r[col["seed"]]
        cfg = spec.sim.replace(seed=seed, params=spec.sim.params.__class__(0.5, 1.0, eps))
        traj = simulate(cfg)
        assert r[col["first_below_eps"]] == traj.first_crossing(eps)
        assert r[col["run_min_dist"]] == traj.min_distance
    for r in rows:
        assert r[col["first_below_1e-6"]] is None
        blanks += r[col["first_below_eps"]] is None
    assert blanks > 0
