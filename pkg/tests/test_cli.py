"""CLI tests using typer.testing.CliRunner."""

import json

import pandas as pd
import pytest
from typer.testing import CliRunner

from lesionrank import __version__
from lesionrank.cli import app

runner = CliRunner()


def _phantom(tmp_path, name, *args):
    gt, pred = tmp_path / f"{name}_gt.nii.gz", tmp_path / f"{name}_pred.nii.gz"
    result = runner.invoke(app, ["phantom", str(gt), str(pred), "--dims", "24", "24", "24", "--radius-max", "4", *args])
    assert result.exit_code == 0, result.output
    return gt, pred


def _eval(gt, pred):
    result = runner.invoke(app, ["eval", str(gt), str(gt if pred is None else pred)])
    assert result.exit_code == 0, result.output
    return json.loads(result.stdout)


def test_version():
    result = runner.invoke(app, ["--version"])
    assert result.exit_code == 0
    assert __version__ in result.output


def test_eval_identical_files(tmp_path):
    gt, _ = _phantom(tmp_path, "p", "--seed", "1")
    metrics = _eval(gt, None)
    assert set(metrics) == {"ET", "TC", "WT"}
    for region in metrics.values():
        assert region["lesionwise_dice"] == 1.0
        assert region["lesionwise_hd95_mm"] == 0.0
        assert region["fp"] == 0 and region["fn"] == 0


def test_eval_tiny_case_against_itself(tiny_case):
    metrics = _eval(tiny_case, None)
    # every lesion is under the 50-voxel cutoff: nothing to count, perfect score
    assert metrics["WT"]["lesionwise_dice"] == 1.0
    assert (metrics["WT"]["tp"], metrics["WT"]["fn"], metrics["WT"]["fp"]) == (0, 0, 0)
    assert metrics["WT"]["volumewise_dice"] == 1.0


def test_eval_geometry_mismatch(tiny_case, examples_dir):
    result = runner.invoke(app, ["eval", str(tiny_case), str(examples_dir / "other_grid.rawvol")])
    assert result.exit_code == 2
    assert "geometry mismatch" in result.output


def test_eval_bad_label(tiny_case, examples_dir):
    result = runner.invoke(app, ["eval", str(tiny_case), str(examples_dir / "bad_label.rawvol")])
    assert result.exit_code == 2
    assert "Error:" in result.output


def test_eval_missing_file(tmp_path, tiny_case):
    result = runner.invoke(app, ["eval", str(tiny_case), str(tmp_path / "nope.nii.gz")])
    assert result.exit_code == 2


def test_dropped_region_gets_penalty(tmp_path):
    gt, pred = _phantom(tmp_path, "p", "--seed", "2", "--perturbation", "drop_region", "--region", "ET")
    metrics = _eval(gt, pred)
    assert metrics["ET"]["lesionwise_dice"] == 0.0
    assert metrics["ET"]["lesionwise_hd95_mm"] == 374.0
    assert metrics["WT"]["lesionwise_dice"] > 0.0


def test_empty_phantom_scores_perfect(tmp_path):
    gt, pred = _phantom(tmp_path, "p", "--n-lesions", "0")
    for region in _eval(gt, pred).values():
        assert (region["lesionwise_dice"], region["lesionwise_hd95_mm"]) == (1.0, 0.0)


def test_phantom_is_reproducible(tmp_path):
    args = ["--seed", "7", "--perturbation", "shift", "--shift", "1", "0", "0"]
    a = runner.invoke(app, ["phantom", str(tmp_path / "a_gt.rawvol"), str(tmp_path / "a_pred.rawvol"), *args])
    b = runner.invoke(app, ["phantom", str(tmp_path / "b_gt.rawvol"), str(tmp_path / "b_pred.rawvol"), *args])
    assert a.exit_code == b.exit_code == 0
    assert a.stdout == b.stdout and len(a.stdout.strip()) == 64
    assert (tmp_path / "a_gt.rawvol").read_bytes() == (tmp_path / "b_gt.rawvol").read_bytes()
    assert (tmp_path / "a_pred.rawvol").read_bytes() == (tmp_path / "b_pred.rawvol").read_bytes()


def test_phantom_invalid_spec(tmp_path):
    result = runner.invoke(app, ["phantom", str(tmp_path / "g.nii"), str(tmp_path / "p.nii"),
                                 "--radius-min", "5", "--radius-max", "2"])
    assert result.exit_code == 2
    assert "invalid phantom spec" in result.output


def test_pipeline(tmp_path):
    gt_dir, teams_dir = tmp_path / "gt", tmp_path / "teams"
    gt_dir.mkdir()
    for team, extra in (("good", []), ("shifty", ["--perturbation", "shift", "--shift", "2", "0", "0"])):
        (teams_dir / team).mkdir(parents=True)
        for seed in range(3):
            gt, pred = _phantom(tmp_path, f"{team}{seed}", "--seed", str(seed), *extra)
            gt.rename(gt_dir / f"case{seed}.nii.gz")
            pred.rename(teams_dir / team / f"case{seed}.nii.gz")

    metrics = tmp_path / "metrics.csv"
    result = runner.invoke(app, ["batch", str(gt_dir), str(teams_dir), str(metrics), "--jobs", "1"])
    assert result.exit_code == 0, result.output
    assert "Wrote 36 rows" in result.output

    out = tmp_path / "rank"
    result = runner.invoke(app, ["rank", str(metrics), str(out), "-n", "200", "--seed", "3"])
    assert result.exit_code == 0, result.output
    assert {p.name for p in out.iterdir()} == {"ranks.csv", "frs.csv", "pvalues.csv"}
    frs = pd.read_csv(out / "frs.csv")
    assert frs.team.tolist() == ["good", "shifty"]

    result = runner.invoke(app, ["summary", str(metrics), str(tmp_path / "summary.md")])
    assert result.exit_code == 0, result.output
    assert "## WT" in (tmp_path / "summary.md").read_text()

    result = runner.invoke(app, ["boxplot", str(metrics), "WT", "dice", str(tmp_path / "wt.svg")])
    assert result.exit_code == 0, result.output
    assert "Wrote 2 box(es)" in result.output


def test_batch_flags_missing_prediction(tmp_path):
    gt_dir, team = tmp_path / "gt", tmp_path / "teams" / "solo"
    gt_dir.mkdir()
    team.mkdir(parents=True)
    gt, _ = _phantom(tmp_path, "p", "--seed", "4")
    gt.rename(gt_dir / "case0.nii.gz")
    result = runner.invoke(app, ["batch", str(gt_dir), str(tmp_path / "teams"), str(tmp_path / "m.csv")])
    assert result.exit_code == 0, result.output
    assert "Flagged 1 missing prediction(s)" in result.output


def test_batch_empty_dir(tmp_path):
    (tmp_path / "gt").mkdir()
    (tmp_path / "teams").mkdir()
    result = runner.invoke(app, ["batch", str(tmp_path / "gt"), str(tmp_path / "teams"), str(tmp_path / "m.csv")])
    assert result.exit_code == 2


def test_rank_single_team(tmp_path, metrics_csv):
    df = pd.read_csv(metrics_csv)
    df[df.team == "team_a"].to_csv(tmp_path / "one.csv", index=False)
    result = runner.invoke(app, ["rank", str(tmp_path / "one.csv"), str(tmp_path / "out"), "-n", "10"])
    assert result.exit_code == 0, result.output
    assert "team_a" in result.stdout and "3.00" in result.stdout


def test_rank_leaderboard_order(tmp_path, metrics_csv):
    result = runner.invoke(app, ["rank", str(metrics_csv), str(tmp_path / "out"), "-n", "50"])
    assert result.exit_code == 0, result.output
    lines = [line.split() for line in result.stdout.splitlines()[1:4]]
    assert [(row[0], row[1], row[-1]) for row in lines] == [
        ("1", "team_a", "3.00"),
        ("2", "team_b", "6.00"),
        ("3", "team_c", "9.00"),
    ]


def test_rank_unranked_team(tmp_path, metrics_csv):
    result = runner.invoke(app, ["rank", str(metrics_csv), str(tmp_path / "out"), "-n", "10", "--unranked", "team_a"])
    assert result.exit_code == 0, result.output
    first = result.stdout.splitlines()[1].split()
    assert first[:2] == ["-", "team_a"]


def test_rank_unknown_unranked_team(tmp_path, metrics_csv):
    result = runner.invoke(app, ["rank", str(metrics_csv), str(tmp_path / "out"), "--unranked", "ghost"])
    assert result.exit_code == 2
    assert "ghost" in result.output


def test_rank_duplicate_rows(tmp_path, metrics_csv):
    df = pd.read_csv(metrics_csv)
    pd.concat([df, df.head(1)]).to_csv(tmp_path / "dup.csv", index=False)
    result = runner.invoke(app, ["rank", str(tmp_path / "dup.csv"), str(tmp_path / "out")])
    assert result.exit_code == 2
    assert "duplicate" in result.output


def test_rank_missing_rows(tmp_path, metrics_csv):
    pd.read_csv(metrics_csv).iloc[1:].to_csv(tmp_path / "short.csv", index=False)
    result = runner.invoke(app, ["rank", str(tmp_path / "short.csv"), str(tmp_path / "out")])
    assert result.exit_code == 2
    assert "missing" in result.output


@pytest.mark.parametrize("flag, value", [("--exceedance", "gte"), ("--alternative", "less")])
def test_rank_bad_choice(tmp_path, metrics_csv, flag, value):
    result = runner.invoke(app, ["rank", str(metrics_csv), str(tmp_path / "out"), flag, value])
    assert result.exit_code == 2
    assert flag in result.output


def test_permtest_exact(metrics_csv):
    result = runner.invoke(app, ["permtest", str(metrics_csv), "team_a", "team_c", "--exact"])
    assert result.exit_code == 0, result.output
    payload = json.loads(result.stdout)
    assert payload["exact"] is True
    assert payload["n_permutations"] == 2 ** 4
    assert payload["observed_gap"] == 6.0
    assert 0.0 < payload["p_value"] <= 1.0


def test_permtest_sampled_is_seeded(metrics_csv):
    args = ["permtest", str(metrics_csv), "team_b", "team_a", "-n", "300", "--seed", "11"]
    first, second = runner.invoke(app, args), runner.invoke(app, args)
    assert first.exit_code == 0, first.output
    assert first.stdout == second.stdout


def test_permtest_unknown_team(metrics_csv):
    result = runner.invoke(app, ["permtest", str(metrics_csv), "team_a", "nobody"])
    assert result.exit_code == 2
    assert "unknown team" in result.output


def test_summary_bad_ddof(tmp_path, metrics_csv):
    result = runner.invoke(app, ["summary", str(metrics_csv), str(tmp_path / "s.md"), "--ddof", "2"])
    assert result.exit_code == 2


def test_boxplot_unknown_metric(tmp_path, metrics_csv):
    result = runner.invoke(app, ["boxplot", str(metrics_csv), "ET", "jaccard", str(tmp_path / "x.svg")])
    assert result.exit_code == 2


def test_config_prints_defaults():
    result = runner.invoke(app, ["config"])
    assert result.exit_code == 0
    assert "min_lesion_voxels: 50" in result.stdout
    assert "dilation_iterations: 3" in result.stdout


def test_config_output_file(tmp_path):
    path = tmp_path / "eval.yaml"
    result = runner.invoke(app, ["config", "-o", str(path)])
    assert result.exit_code == 0
    again = runner.invoke(app, ["config", "-c", str(path)])
    assert again.stdout == path.read_text()


def test_config_bad_file(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("connectivity: 5\n")
    result = runner.invoke(app, ["config", "-c", str(path)])
    assert result.exit_code == 2
    assert "invalid config" in result.output
