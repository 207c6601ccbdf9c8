import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import entb92

SCHEMA_DIR = Path(entb92.__file__).parent / "schemas"
FIXTURE_DIR = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def schema_validator():
    """Factory building a draft-07 validator with cross-file refs resolved."""
    from jsonschema import Draft7Validator
    from referencing import Registry, Resource

    resources = []
    for path in SCHEMA_DIR.glob("*.json"):
        contents = json.loads(path.read_text())
        resources.append((path.name, Resource.from_contents(contents)))
    registry = Registry().with_resources(resources)

    def factory(name):
        schema = json.loads((SCHEMA_DIR / f"{name}.json").read_text())
        return Draft7Validator(schema, registry=registry)

    return factory


@pytest.fixture()
def run_cli(capsys):
    """Invoke the command line entry point in process, returning exit status."""
    from entb92.cli import main

    def runner(*argv):
        try:
            code = main(list(argv))
        except SystemExit as exc:  # argparse error paths
            code = exc.code if isinstance(exc.code, int) else 2
        captured = capsys.readouterr()
        return code, captured.out, captured.err

    return runner
