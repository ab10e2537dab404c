import json
import subprocess
import sys

import jsonschema
import numpy as np
import pytest

from otkit import cli
from otkit.config import RunConfig, load_config
from otkit.errors import ParseError, SchemaViolation, ValidationError
from otkit.io import load_json, parse_density_csv, parse_measure, serialize_measure
from otkit.measures import new_discrete
from otkit.schemas import report_schema


def _write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


@pytest.fixture
def pair(tmp_path):
    mu = _write(tmp_path / "mu.json", {"dim": 2, "points": [[0, 0], [1, 0], [0, 1]], "weights": [0.5, 0.25, 0.25]})
    nu = _write(tmp_path / "nu.json", {"dim": 2, "points": [[1, 1], [0.5, 0.2]], "weights": [0.4, 0.6]})
    return mu, nu


def run(capsys, *argv):
    code = cli.dispatch(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.parametrize("suffix", [".json", ".csv"])
def test_round_trip_bit_exact(tmp_path, suffix):
    rng = np.random.default_rng(0)
    m = new_discrete(rng.random((7, 3)), rng.random(7) + 0.1)
    p = tmp_path / f"m{suffix}"
    serialize_measure(m, p)
    back = parse_measure(p)
    assert back.points.tobytes() == m.points.tobytes()
    assert back.weights.tobytes() == m.weights.tobytes()


def test_csv_two_dims(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("0,0,1\n1,2,3\n")
    m = parse_measure(p)
    assert m.dim == 2 and np.array_equal(m.weights, [0.25, 0.75])


def test_nan_reports_path(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"dim": 1, "points": [[NaN]], "weights": [1]}')
    with pytest.raises(SchemaViolation) as err:
        parse_measure(p)
    assert err.value.path == "$.points[0][0]"


@pytest.mark.parametrize(
    "obj,path",
    [
        ({"points": [[0]], "weights": [1]}, "$.dim"),
        ({"dim": 1, "points": [[0, 1]], "weights": [1]}, "$.points[0]"),
        ({"dim": 1, "points": [[0]], "weights": ["a"]}, "$.weights[0]"),
        ({"dim": 1, "points": [[0], [1]], "weights": [1, -1]}, "$.weights[1]"),
    ],
)
def test_schema_violations(tmp_path, obj, path):
    with pytest.raises(SchemaViolation) as err:
        parse_measure(_write(tmp_path / "m.json", obj))
    assert err.value.path == path


def test_parse_errors(tmp_path):
    with pytest.raises(ParseError):
        load_json(tmp_path / "missing.json")
    p = tmp_path / "bad.csv"
    p.write_text("0,1\n1\n")
    with pytest.raises(ParseError):
        parse_measure(p)
    d = tmp_path / "u.csv"
    d.write_text("0,1,3\n1,1\n")
    with pytest.raises(ParseError):
        parse_density_csv(d)


def test_config(tmp_path, monkeypatch):
    assert load_config().seed == 42
    cfg = _write(tmp_path / "c.json", {"seed": 7, "output_format": "csv"})
    monkeypatch.setenv("OT_KERNEL_CONFIG", cfg)
    assert load_config().seed == 7 and load_config().output_format == "csv"
    with pytest.raises(ValidationError):
        RunConfig.from_json({"sede": 1})
    with pytest.raises(ValidationError):
        RunConfig(feasibility_tol=-1)


def test_exit_codes(capsys, pair, tmp_path, monkeypatch):
    mu, nu = pair
    assert run(capsys, "wasserstein", "--mu", mu, "--nu", nu, "--p", "2")[0] == 0
    code, _, err = run(capsys, "frobnicate")
    assert code == 2 and "unknown subcommand" in err
    assert run(capsys)[0] == 2
    assert run(capsys, "wasserstein", "--mu", mu, "--nu", nu, "--p", "0.5")[0] == 2
    bad = tmp_path / "nan.json"
    bad.write_text('{"dim": 1, "points": [[NaN]], "weights": [1]}')
    code, _, err = run(capsys, "solve", "--mu", str(bad), "--nu", nu, "--cost", '{"kind":"power","p":2}')
    assert code == 2 and "$.points[0][0]" in err

    def boom(args, cfg):
        raise RuntimeError("boom")

    monkeypatch.setattr(cli, "cmd_wasserstein", boom)
    code, _, err = run(capsys, "wasserstein", "--mu", mu, "--nu", nu, "--p", "2")
    assert code == 1 and "internal error" in err
    assert run(capsys, "--version")[0] == 0


def test_subprocess_entry_point(pair):
    mu, nu = pair
    proc = subprocess.run([sys.executable, "-m", "otkit.cli", "wasserstein", "--mu", mu, "--nu", nu, "--p", "inf"], capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["result"]["p"] == "inf"


def _write_density(path, a, b, vals):
    path.write_text(f"{a},{b},{len(vals)}\n" + "\n".join(repr(float(v)) for v in vals) + "\n")
    return str(path)


@pytest.fixture
def commands(pair, tmp_path):
    mu, nu = pair
    cost = '{"kind":"power","p":2}'
    plan = tmp_path / "plan.json"
    u = _write_density(tmp_path / "u.csv", 0, 1, np.linspace(1, 2, 20) / 1.5)
    v = _write_density(tmp_path / "v.csv", 0, 2, np.full(20, 0.5))
    return {
        "solve": ["solve", "--mu", mu, "--nu", nu, "--cost", cost, "--duals"],
        "duals": ["duals", "--mu", mu, "--nu", nu, "--cost", cost],
        "wasserstein": ["wasserstein", "--mu", mu, "--nu", nu, "--p", "2", "--plan-out", str(plan)],
        "interpolate": ["interpolate", "--mu", mu, "--nu", nu, "--samples", "5"],
        "convexity": ["convexity", "--mu", mu, "--nu", nu, "--functional", '{"variant":"J2","V":{"family":"power","q":2}}'],
        "convexity-grid": ["convexity", "--grid", "--mu", u, "--nu", v, "--functional", '{"variant":"J1","f":{"family":"power","m":2}}', "--samples", "9"],
        "beckmann": ["beckmann", "--mu", mu, "--nu", nu, "--bbox", "0,1,0,1", "--res", "5"],
        "ma-check": ["ma-check", "--u", u, "--v", v, "--refine", "2"],
        "ctransform": ["ctransform", "--chi", "[0, 0.5, 1]", "--x", mu, "--y", nu, "--cost", cost],
    }


def test_every_report_matches_schema(capsys, commands):
    for name, argv in commands.items():
        code, out, err = run(capsys, *argv)
        assert code == 0, (name, err)
        report = json.loads(out)
        jsonschema.validate(report, report_schema(argv[0]))
        assert set(report["inputs"]) >= {a for a in argv if a.endswith((".json", ".csv")) and "plan" not in a}


def test_verify_round_trip(capsys, commands, tmp_path, pair):
    mu, nu = pair
    assert run(capsys, *commands["wasserstein"])[0] == 0
    plan = str(tmp_path / "plan.json")
    code, out, _ = run(capsys, "verify", "--mu", mu, "--nu", nu, "--cost", '{"kind":"power","p":2}', "--plan", plan)
    assert code == 0
    report = json.loads(out)
    jsonschema.validate(report, report_schema("verify"))
    assert report["result"]["report"]["optimal"] is True


def test_deterministic_output(capsys, commands):
    for name, argv in commands.items():
        first = run(capsys, *argv)[1]
        assert run(capsys, *argv)[1] == first, name


def test_interpolate_out_dir(capsys, pair, tmp_path):
    mu, nu = pair
    out = tmp_path / "geo"
    assert run(capsys, "interpolate", "--mu", mu, "--nu", nu, "--samples", "3", "--out", str(out))[0] == 0
    assert sorted(p.name for p in out.iterdir()) == ["diagnostics.json", "sample_0.json", "sample_1.json", "sample_2.json"]
    assert parse_measure(out / "sample_0.json").same_as(parse_measure(mu))


def test_csv_output_mode(capsys, pair, tmp_path):
    mu, nu = pair
    cfg = _write(tmp_path / "c.json", {"output_format": "csv"})
    code, out, _ = run(capsys, "--config", cfg, "solve", "--mu", mu, "--nu", nu, "--cost", '{"kind":"power","p":1}')
    assert code == 0 and out.splitlines()[0] == "i,j,mass"


def test_out_file(capsys, pair, tmp_path):
    mu, nu = pair
    target = tmp_path / "r.json"
    assert run(capsys, "--out-file", str(target), "wasserstein", "--mu", mu, "--nu", nu, "--p", "1")[0] == 0
    assert json.loads(target.read_text())["command"] == "wasserstein"
