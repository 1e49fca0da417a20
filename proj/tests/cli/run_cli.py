"""Run a garchtail subcommand, check its exit code, validate its JSON and its determinism.

usage: run_cli.py BINARY SCHEMA_DIR EXPECTED_EXIT -- subcommand args...
"""
import json
import pathlib
import subprocess
import sys

import jsonschema


def main() -> int:
    binary, schema_dir, expected = sys.argv[1], pathlib.Path(sys.argv[2]), int(sys.argv[3])
    args = sys.argv[sys.argv.index("--") + 1:]
    command = args[0]

    first = subprocess.run([binary, *args], capture_output=True, text=True)
    if first.returncode != expected:
        print(f"exit code {first.returncode}, expected {expected}\n{first.stderr}")
        return 1
    if expected == 2:
        if not first.stderr:
            print("config error produced no message on stderr")
            return 1
        return 0

    doc = json.loads(first.stdout)
    schema = json.loads((schema_dir / f"{command}.schema.json").read_text())
    jsonschema.validate(doc, schema)

    second = subprocess.run([binary, *args], capture_output=True, text=True)
    if second.stdout != first.stdout:
        print("two runs with the same seed and workers differ")
        return 1
    print(f"{command}: exit {expected}, schema ok, deterministic")
    return 0


if __name__ == "__main__":
    sys.exit(main())
