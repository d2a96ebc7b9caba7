import subprocess
import sys

import pytest

from vquemodes import cli

SCENES = """\
[DEFAULT]
width = 128
height = 128
frame_count = 3
motion = 1,1
disparity = 3
disparity_range = 8
"""


def _scene_file(path, n_scenes=3, levels=(0, 8, 20)):
    text = SCENES
    for s in range(n_scenes):
        for lv in levels:
            text += (f"\n[s{s}_n{lv}]\ntexture_seed = {s + 1}\nscene = s{s}\n"
                     f"dmos = {lv}\ndistortion = additive_noise({lv})\n")
    path.write_text(text)
    return path


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Scenes, pristine model and feature cache built through the CLI."""
    d = tmp_path_factory.mktemp("cli")
    assert cli.main(["synth", "--spec", str(_scene_file(d / "scenes.ini")),
                     "--out", str(d / "videos")]) == 0
    manifest = d / "videos" / "manifest.txt"
    assert cli.main(["train-pristine", "--manifest", str(manifest), "--out", str(d / "pristine"),
                     "--frames-per-video", "1", "--patch-size", "32"]) == 0
    assert cli.main(["extract", "--manifest", str(manifest), "--out", str(d / "feat.cache"),
                     "--pristine", str(d / "pristine"), "--patch-size", "32",
                     "--disparity-range", "8"]) == 0
    return d


def test_train_and_predict(workspace, capsys):
    d = workspace
    (d / "split.txt").write_text("# training ids\ns0_n0\ns0_n20\ns1_n8\ns1_n20\n")
    assert cli.main(["train", "--cache", str(d / "feat.cache"), "--split-file",
                     str(d / "split.txt"), "--model", str(d / "m.model")]) == 0
    capsys.readouterr()
    assert cli.main(["predict", "--model", str(d / "m.model"), "--video", "s2_n8",
                     "--cache", str(d / "feat.cache")]) == 0
    vid, mean, std = capsys.readouterr().out.split()
    assert vid == "s2_n8" and float(std) >= 0
    assert cli.main(["predict", "--model", str(d / "m.model"), "--video", "s2_n8",
                     "--manifest", str(d / "videos" / "manifest.txt"),
                     "--pristine", str(d / "pristine"), "--patch-size", "32",
                     "--disparity-range", "8"]) == 0
    _, mean2, _ = capsys.readouterr().out.split()
    assert float(mean2) == pytest.approx(float(mean), abs=1e-5)


def test_evaluate_writes_report(workspace, capsys):
    d = workspace
    args = ["evaluate", "--cache", str(d / "feat.cache"), "--trials", "3", "--seed", "2",
            "--group-by-content", "--report", str(d / "r.txt")]
    assert cli.main(args) == 0
    out = capsys.readouterr().out
    assert out == (d / "r.txt").read_text()
    assert "split mode: content-level" in out
    rows = out.split("trial_id lcc srocc rmse\n")[1].splitlines()
    assert [r.split()[0] for r in rows] == ["0", "1", "2"]


@pytest.mark.parametrize("argv", [
    [],
    ["frobnicate"],
    ["extract", "--manifest", "m.txt"],
    ["predict", "--model", "m", "--video", "v"],
    ["evaluate", "--cache", "c", "--trials", "ten"],
])
def test_usage_errors_exit_2(argv, capsys):
    assert cli.main(argv) == 2


def test_invalid_inputs_exit_2(workspace, tmp_path):
    d = workspace
    assert cli.main(["evaluate", "--cache", str(tmp_path / "missing")]) == 2
    (tmp_path / "junk.cache").write_text("not a cache\n")
    assert cli.main(["evaluate", "--cache", str(tmp_path / "junk.cache")]) == 2
    (tmp_path / "empty.txt").write_text("# nothing\n")
    assert cli.main(["train", "--cache", str(d / "feat.cache"), "--split-file",
                     str(tmp_path / "empty.txt"), "--model", str(tmp_path / "m")]) == 2
    (tmp_path / "bad.model").write_text("vquemodes-svr v1\nsha256 00\n")
    assert cli.main(["predict", "--model", str(tmp_path / "bad.model"), "--video", "x",
                     "--cache", str(d / "feat.cache")]) == 2
    assert cli.main(["extract", "--manifest", str(d / "videos" / "manifest.txt"),
                     "--out", str(tmp_path / "c")]) == 2  # no pristine model


def test_runtime_failure_exits_3(workspace, tmp_path, capsys):
    d = workspace
    (tmp_path / "ext.txt").write_text("s0_n0 0 1.0 1.0\ns0_n0 1 1.0 1.0\n")
    rc = cli.main(["extract", "--manifest", str(d / "videos" / "manifest.txt"), "--out",
                   str(tmp_path / "c"), "--external-scores", str(tmp_path / "ext.txt"),
                   "--disparity-range", "8"])
    assert rc == 3
    assert "s0_n8 frame 0" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "vquemodes.cli", "evaluate", "--cache",
                        str(tmp_path / "none")], capture_output=True, text=True)
    assert r.returncode == 2 and "invalid input" in r.stderr
