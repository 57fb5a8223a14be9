"""Drive the ``lamerobin`` command line on the reference configuration.

Runs validate, solve, series, sweep and eval into ``out/reference`` and
prints the head of each CSV.  Equivalent shell commands:

    lamerobin validate --config demos/configs/reference.json
    lamerobin series --config demos/configs/reference.json --order 8

    python demos/cli_walkthrough.py
"""

from pathlib import Path

from lamerobin.cli import main

here = Path(__file__).parent
config = str(here / "configs" / "reference.json")
out = Path("out") / "reference"

for command, csv_name in [("validate", "validate.csv"), ("solve", "solve.csv"),
                          ("series", "series.csv"), ("sweep", "sweep.csv"),
                          ("eval", "eval_direct.csv")]:
    code = main([command, "--config", config, "--output", str(out)])
    print(f"$ lamerobin {command}  -> exit {code}")
    for line in (out / csv_name).read_text().splitlines()[:6]:
        print("   ", line)
print(f"\nrun log with config hash and tolerances: {out / 'run.jsonl'}")
