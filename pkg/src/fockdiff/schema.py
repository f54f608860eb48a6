"""JSON schema of ``fockdiff evolve --format json`` output."""

EVOLVE_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["config", "results"],
    "additionalProperties": False,
    "properties": {
        "config": {
            "type": "object",
            "required": ["state", "kappa", "times", "dim", "method", "n_report", "deficit_target"],
            "properties": {
                "state": {"enum": ["number", "chaotic", "nbs", "lwcs"]},
                "s": {"type": "integer", "minimum": 0},
                "gamma": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "l": {"type": "integer", "minimum": 0},
                "lam": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "kappa": {"type": "number", "minimum": 0},
                "times": {"type": "array", "items": {"type": "number", "minimum": 0}},
                "dim": {"type": ["integer", "null"], "minimum": 2},
                "method": {"enum": ["kraus", "ode", "analytic", "all"]},
                "n_report": {"type": "integer", "minimum": 1},
                "deficit_target": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "results": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["t", "method", "mean", "trace", "trace_deficit", "distribution"],
                "additionalProperties": False,
                "properties": {
                    "t": {"type": "number", "minimum": 0},
                    "method": {"enum": ["kraus", "ode", "analytic"]},
                    "mean": {"type": "number"},
                    "trace": {"type": "number"},
                    "trace_deficit": {"type": "number"},
                    "distribution": {"type": "array", "items": {"type": "number"}},
                },
            },
        },
    },
}
