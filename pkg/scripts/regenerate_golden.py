"""Rewrite tests/golden/*.csv from configs/golden.json.

Only run this after the oracle tests pass; the goldens freeze current output.
"""
import shutil
import sys
import tempfile
from pathlib import Path

from spectral_lab.cli import run
from spectral_lab.config import load_config

ROOT = Path(__file__).resolve().parents[1]


def main() -> int:
    config = load_config(ROOT / "configs" / "golden.json")
    with tempfile.TemporaryDirectory() as tmp:
        code, manifest = run(config, Path(tmp))
        if code != 0:
            print("golden run failed; goldens left untouched", file=sys.stderr)
            return code
        dest = ROOT / "tests" / "golden"
        dest.mkdir(exist_ok=True)
        for entry in manifest["experiments"]:
            shutil.copy(Path(tmp) / entry["csv"], dest / entry["csv"])
            print(f"wrote {dest / entry['csv']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
