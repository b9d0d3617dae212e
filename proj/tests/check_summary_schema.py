"""Validate summary.json documents from full and partial runs against the published schema."""

import json
import os
import pathlib
import shutil
import subprocess
import sys
import tempfile

import jsonschema

tradenet = os.environ["TRADENET"]
source = pathlib.Path(os.environ["SOURCE_DIR"])
schema = json.loads((source / "schemas/summary.schema.json").read_text())
validator = jsonschema.Draft202012Validator(schema)
config = source / "data/synthetic20/config.json"


def run(out, *args):
    subprocess.run([tradenet, "--config", str(config), "--out", str(out), *args],
                   check=True, stdout=subprocess.DEVNULL)
    return json.loads((out / "2007/summary.json").read_text())


def validate(doc, label):
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.path))
    for e in errors:
        print(f"FAIL {label}: {'/'.join(map(str, e.path))}: {e.message}")
    if not errors:
        print(f"ok   {label}")
    return not errors


work = pathlib.Path(tempfile.mkdtemp())
try:
    ok = True
    full = run(work / "full", "run")
    ok &= validate(full, "full run validates")
    ok &= full["network"] is not None
    for rel in full["files"].values():
        ok &= (work / "full" / rel).is_file()

    partial = run(work / "partial", "run", "--stages", "report")
    ok &= validate(partial, "run without network validates")
    ok &= partial["network"] is None
    ok &= partial["stages_run"] == ["ingest", "gravity", "mixture", "report"]

    again = run(work / "again", "run")
    same = (work / "full/2007/summary.json").read_bytes() == (work / "again/2007/summary.json").read_bytes()
    print(("ok   " if same else "FAIL ") + "identical runs give identical documents")
    ok &= same

    broken = dict(full, schema_version=2)
    ok &= not validator.is_valid(broken)
finally:
    shutil.rmtree(work)

sys.exit(0 if ok else 1)
