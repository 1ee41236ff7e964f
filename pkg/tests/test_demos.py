import filecmp
import subprocess
import sys
from pathlib import Path

import pytest

from qfieldlab.lab import EXPERIMENT_IDS, default_config_path

ROOT = Path(__file__).resolve().parents[1]
DEMOS = sorted((ROOT / "demos").glob("*.py"))


@pytest.mark.parametrize("script", DEMOS, ids=lambda p: p.stem)
def test_demo_runs(script):
    proc = subprocess.run([sys.executable, str(script)], capture_output=True, text=True, timeout=300)
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.strip()


def test_top_level_configs_match_packaged():
    for exp in EXPERIMENT_IDS:
        assert filecmp.cmp(ROOT / "configs" / f"{exp}.toml", default_config_path(exp), shallow=False)
