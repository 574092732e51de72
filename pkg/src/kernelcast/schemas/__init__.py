"""JSON schemas for every document the command line emits."""
from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources

SCHEMA_NAMES = ("ablation", "forecast_meta", "grid", "hyperparams", "model", "rff_report",
                "rolling", "score_report", "search_report", "synth_spec")


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    if name not in SCHEMA_NAMES:
        raise KeyError(f"no schema named {name!r}")
    return json.loads(resources.files(__name__).joinpath(f"{name}.json").read_text())


def validate(doc, name: str) -> None:
    """Raise ``jsonschema.ValidationError`` if ``doc`` does not match schema ``name``."""
    import jsonschema

    jsonschema.validate(doc, load_schema(name), cls=jsonschema.Draft202012Validator)
