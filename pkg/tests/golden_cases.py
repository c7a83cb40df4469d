"""Golden-output cases for the CLI.

Regenerate with ``python3 tests/golden_cases.py --regen`` after an intended
output change, then review the diff.
"""

import io
import json
import sys
from pathlib import Path

HERE = Path(__file__).resolve().parent
GOLDEN = HERE / "golden"
PROBLEMS = HERE.parent / "problems"
MANIFEST = GOLDEN / "manifest.json"

COMMANDS = (
    "linearize",
    "adjoint",
    "euler",
    "reduce",
    "kt-check",
    "kt-homology",
    "cosymmetries",
    "conservation-check",
    "to-cosymmetry",
    "compare",
)
FILES = ("kdv", "heat", "burgers", "grad")

EXTRA = [
    ("heat", "cosymmetries", ["--jet-order", "0", "--degree", "0", "--base-degree", "2"]),
    ("grad", "kt-check", ["--antighost", "2", "--jet-order", "2"]),
    ("grad", "kt-homology", ["--antighost", "2", "--jet-order", "1", "--degree", "1"]),
    ("kdv", "compare", ["--bound", "2"]),
    ("kdv", "cosymmetries", ["--jet-order", "2", "--degree", "2"]),
]


def _slug(args) -> str:
    return "".join(a.lstrip("-").replace("-", "") + "_" for a in args).rstrip("_")


def build_cases() -> list:
    cases = []
    for f in FILES:
        for c in COMMANDS:
            for fmt in ("json", "txt"):
                cases.append((f, c, [], fmt))
    for f, c, args in EXTRA:
        cases.append((f, c, args, "json"))
    out = []
    for f, c, args, fmt in cases:
        argv = [c, f"{f}.eq"] + args + (["--json"] if fmt == "json" else [])
        name = f"{f}.{c}" + (f".{_slug(args)}" if args else "") + f".{fmt}"
        out.append({"argv": argv, "golden": name})
    return out


def run_case(case) -> tuple:
    """Run one case from the problems directory; returns (exit code, stdout)."""
    from jetkt.cli import run

    argv = list(case["argv"])
    argv[1] = str(PROBLEMS / argv[1])
    out, err = io.StringIO(), io.StringIO()
    code = run(argv, out, err)
    return code, out.getvalue()


def load_manifest() -> list:
    return json.loads(MANIFEST.read_text(encoding="utf-8"))


def regenerate():
    GOLDEN.mkdir(exist_ok=True)
    manifest = []
    for case in build_cases():
        code, text = run_case(case)
        (GOLDEN / case["golden"]).write_text(text, encoding="utf-8")
        manifest.append(dict(case, exit=code))
    MANIFEST.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {len(manifest)} golden files")


if __name__ == "__main__":
    if "--regen" in sys.argv:
        regenerate()
    else:
        print(__doc__)
