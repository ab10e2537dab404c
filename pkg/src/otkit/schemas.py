"""JSON schemas for CLI reports (draft 2020-12)."""

_num = {"type": "number"}
_num_or_inf = {"anyOf": [{"type": "number"}, {"enum": ["inf", "-inf", "nan"]}]}
_vec = {"type": "array", "items": _num}
_entries = {"type": "array", "items": {"type": "array", "prefixItems": [{"type": "integer"}, {"type": "integer"}, _num], "minItems": 3, "maxItems": 3}}

MEASURE = {
    "type": "object",
    "required": ["dim", "points", "weights"],
    "properties": {
        "dim": {"type": "integer", "minimum": 1},
        "points": {"type": "array", "minItems": 1, "items": _vec},
        "weights": {"type": "array", "items": {"type": "number", "minimum": 0}},
    },
}

OPTIMALITY = {
    "type": "object",
    "required": ["primal_value", "dual_value", "gap", "max_constraint_violation", "max_slackness_violation", "max_marginal_violation", "optimal"],
    "properties": {"optimal": {"type": "boolean"}},
}

DUALS = {
    "type": "object",
    "required": ["phi", "psi", "unique", "components"],
    "properties": {"phi": _vec, "psi": _vec, "unique": {"type": "boolean"}, "components": {"type": "integer"}},
}

RESULTS = {
    "solve": {"type": "object", "required": ["entries", "cost"], "properties": {"entries": _entries, "cost": _num, "duals": DUALS}},
    "duals": {"type": "object", "required": ["duals", "report"], "properties": {"duals": DUALS, "report": OPTIMALITY}},
    "verify": {"type": "object", "required": ["report"], "properties": {"report": OPTIMALITY}},
    "wasserstein": {"type": "object", "required": ["p", "value"], "properties": {"p": _num_or_inf, "value": _num}},
    "interpolate": {
        "type": "object",
        "required": ["times", "speeds", "samples", "canonical"],
        "properties": {"times": _vec, "speeds": _vec, "canonical": {"type": "boolean"}},
    },
    "convexity": {
        "type": "object",
        "required": ["variant", "times", "values", "second_differences", "tol", "passed"],
        "properties": {"values": _vec, "second_differences": _vec, "passed": {"type": "boolean"}},
    },
    "beckmann": {
        "type": "object",
        "required": ["edges", "mass", "kantorovich_value", "gap", "max_divergence_residual"],
        "properties": {"edges": _entries, "mass": _num, "gap": _num},
    },
    "ma-check": {
        "type": "object",
        "required": ["levels", "ratios"],
        "properties": {
            "levels": {
                "type": "array",
                "items": {"type": "object", "required": ["n", "h", "max_residual", "l1_residual", "boundary_residuals", "monotone"]},
            },
            "ratios": {"type": "array", "items": {"type": ["number", "null"]}},
        },
    },
    "ctransform": {
        "type": "object",
        "required": ["values", "argmins"],
        "properties": {"values": _vec, "argmins": {"type": "array", "items": {"type": "array", "items": {"type": "integer"}}}},
    },
}


def report_schema(command: str) -> dict:
    """Envelope shared by every subcommand, with the command's result schema."""
    return {
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "type": "object",
        "required": ["tool", "version", "command", "config", "inputs", "result"],
        "properties": {
            "tool": {"const": "otkit"},
            "version": {"type": "string"},
            "command": {"const": command},
            "config": {
                "type": "object",
                "required": ["feasibility_tol", "optimality_tol", "convexity_tol", "output_format", "seed", "verbosity"],
            },
            "inputs": {"type": "object", "additionalProperties": {"type": "string", "pattern": "^[0-9a-f]{64}$"}},
            "result": RESULTS[command],
        },
    }
