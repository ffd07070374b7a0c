"""Run a few small experiments through the CLI and validate the JSON against the schema."""
import json
import subprocess
import sys

import jsonschema

tool, schema_path = sys.argv[1], sys.argv[2]
with open(schema_path) as f:
    schema = json.load(f)

runs = [
    ["moment", "k=2", "--samples", "500"],
    ["localtime", "k=2", "lambda=0.5", "--samples", "500"],
    ["chaos", "N=6"],
    ["alpha", "k=2", "points=1024", "--eps", "0,0.01"],
    ["bounds", "--samples", "300"],
    ["field", "realizations=4", "inner_B=4", "report.timing=true"],
    ["crosscheck", "stratonovich-factor", "H=0.8", "t=0.5", "--samples", "300", "--eps", "0.01"],
]
failed = 0
for args in runs:
    out = subprocess.run([tool] + args, capture_output=True, text=True)
    if out.returncode != 0:
        print("FAIL", args, out.stderr.strip())
        failed += 1
        continue
    try:
        jsonschema.validate(json.loads(out.stdout), schema)
        print("ok  ", " ".join(args))
    except jsonschema.ValidationError as e:
        print("FAIL", args, e.message)
        failed += 1
sys.exit(1 if failed else 0)
