"""Cross-implementation acceptance: the metric engine must reproduce the
exporter's torch-side forward pass on exported weights, and the
anti-aliased preset must keep its rank-stability advantage under
exported (non-random-init) features.

The engine is driven only through its public surfaces: the STPW file
format and the command line.
"""

import csv
import subprocess
import sys

import pytest

from stsim_exporter import FIXTURE_TOLERANCE, export, verify_fixture


def run_engine(*args):
    proc = subprocess.run(
        [sys.executable, "-m", "stsim", *args],
        capture_output=True,
        text=True,
        timeout=570,
    )
    assert proc.returncode == 0, f"stsim {' '.join(args)} failed:\n{proc.stderr}"
    return proc.stdout


def test_engine_matches_exporter_forward_on_three_fixtures(checkpoint, tmp_path):
    weights = tmp_path / "alex_full.stpw"
    worst = 0.0
    for seed in (1, 2, 3):
        fixture = export(checkpoint, "alex-baseline-full", weights, fixture_seed=seed)
        got = tmp_path / f"engine{seed}.stpw"
        run_engine(
            "forward",
            "--input", fixture.input,
            "--backbone", "alex-baseline-full",
            "--weights", str(weights),
            "--out", str(got),
        )
        worst = max(worst, verify_fixture(fixture, str(got)))
    print(f"\n[{'PASS' if worst <= FIXTURE_TOLERANCE else 'FAIL'}] "
          f"exporter parity on 3 fixtures: worst |delta|={worst:.2e}")
    assert worst <= FIXTURE_TOLERANCE


def overall_row(csv_text):
    rows = list(csv.DictReader(csv_text.splitlines()))
    (overall,) = [r for r in rows if r["category"] == "overall"]
    return overall


@pytest.mark.slow
def test_exported_weights_keep_rank_stability_advantage(checkpoint, tmp_path):
    weights = tmp_path / "alex_quarter.stpw"
    export(checkpoint, "alex-baseline", weights)
    data_dir = tmp_path / "synth"
    run_engine("synth", "--seed", "1", "--n", "200", "--size", "64",
               "--out", str(data_dir))
    manifest = data_dir / "manifest.csv"

    flips = {}
    for preset in ("alex-baseline", "alex-st"):
        trained = tmp_path / f"{preset}.trained.stpw"
        run_engine(
            "train-head",
            "--manifest", str(manifest),
            "--backbone", preset,
            "--weights", str(weights),
            "--seed", "1",
            "--steps", "1000",
            "--out", str(trained),
        )
        out = run_engine(
            "eval",
            "--manifest", str(manifest),
            "--backbone", preset,
            "--weights", str(trained),
            "--shifts", "1,2,3",
            "--format", "csv",
        )
        flips[preset] = float(overall_row(out)["r_rf@1"])
    ok = flips["alex-st"] <= flips["alex-baseline"]
    print(f"\n[{'PASS' if ok else 'FAIL'}] exported-weights rank stability: "
          f"r_rf@1px anti-aliased={flips['alex-st']:.2f} "
          f"baseline={flips['alex-baseline']:.2f}")
    assert ok
