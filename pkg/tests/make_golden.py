"""Regenerate the frozen journey trace.

Run from the repository root:

    python3 tests/make_golden.py

Review the diff by hand before committing; the acceptance suite treats the
frozen file as the source of truth.
"""
import json
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from journey import run_journey

GOLDEN = Path(__file__).parent / "golden" / "journey_trace.json"


def main() -> int:
    with tempfile.TemporaryDirectory() as tmp:
        result = run_journey(Path(tmp))
    GOLDEN.parent.mkdir(parents=True, exist_ok=True)
    GOLDEN.write_text(json.dumps(result, indent=2, sort_keys=True) + "\n")
    print(f"wrote {GOLDEN} ({GOLDEN.stat().st_size} bytes)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
