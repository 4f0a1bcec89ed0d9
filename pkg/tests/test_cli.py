"""Manifest loading, task execution, report rendering and the exit-code contract."""

import textwrap

import pytest

from kscurv import cli
from kscurv import manifest as mf

RANK1 = """
[manifold]
name = "rank-one plane wave"
coordinates = ["u", "v", "x", "y"]

[metric]
g_uv = "1"
g_uu = "2*u*x^2"
g_xx = "1"
g_yy = "1"

[points]
values = [[0.5, 0.1, 0.2, -0.1], [1.2, 0.0, -0.3, 0.4]]
"""

WAVE = """
[manifold]
name = "plane wave"
dimension = 4
coordinates = ["u", "v", "x", "y"]

[parameters]
b = 1.5

[metric]
g_uv = "1"
g_uu = "2*(u*x^2 - u*y^2)"
g_xx = "1"
g_yy = "1"

[points]
values = [[0.5, 0.0, 0.2, -0.1]]
box = { u = [-1, 1], v = [-1, 1], x = [-1, 1], y = [-1, 1] }
count = 2
seed = 7

[[tasks]]
task = "check"
kind = "r_symmetric"
r = 2
"""


def write(tmp_path, text, name="m.toml"):
    p = tmp_path / name
    p.write_text(textwrap.dedent(text))
    return str(p)


def with_tasks(base, *tasks):
    return base + "".join("\n[[tasks]]\n" + t + "\n" for t in tasks)


# ---------------------------------------------------------------------------
# manifests
# ---------------------------------------------------------------------------

def test_minimal_flat_manifest():
    m = mf.loads('[manifold]\ncoordinates = ["x", "y"]\n[metric]\ng_xx = "1"\ng_yy = "1"\n')
    assert m.tasks == [] and m.dimension == 2
    assert m.chart().dimension == 2


def test_round_trip():
    m = mf.loads(WAVE)
    again = mf.loads(mf.dumps(m))
    for attr in ("name", "coordinates", "parameters", "metric", "points", "box", "count", "seed", "tasks"):
        assert getattr(again, attr) == getattr(m, attr), attr
    assert again.sample_points() == m.sample_points()


def test_undeclared_coordinate_is_named():
    with pytest.raises(mf.ManifestError, match="'z'"):
        mf.loads(RANK1.replace('"2*u*x^2"', '"2*z*x^2"'))


def test_parse_error_has_line_number():
    with pytest.raises(mf.ManifestError, match="line 3"):
        mf.loads('[manifold]\ncoordinates = ["x"]\ng_xx = \n')


@pytest.mark.parametrize("text,msg", [
    (RANK1 + '\n[[tasks]]\ntask = "frobnicate"\n', "unknown task"),
    (RANK1.replace("[0.5, 0.1, 0.2, -0.1]", "[0.5, 0.1]"), "expected 4"),
    (RANK1.replace('g_xx = "1"', 'g_xq = "1"'), "g_xq"),
    ('[manifold]\ncoordinates = ["x"]\n[metric]\ng_xx = "1"\n[[tasks]]\ntask = "classify"\n',
     "at least one point"),
])
def test_semantic_errors(text, msg):
    with pytest.raises(mf.ManifestError, match=msg):
        mf.loads(text)


def test_metric_key_split():
    assert mf.split_metric_key("g_uv", ("u", "v")) == (0, 1)
    assert mf.split_metric_key("g_thph", ("th", "ph")) == (0, 1)
    with pytest.raises(mf.ManifestError):
        mf.split_metric_key("g_aab", ("a", "aa", "ab", "b"))


def test_box_resampling():
    m = mf.loads(WAVE)
    assert len(m.sample_points()) == 3
    pts = m.sample_points(count=5, seed=1)
    assert len(pts) == 5 and pts == m.sample_points(count=5, seed=1)
    assert all(-1 <= c <= 1 for p in pts for c in p)


# ---------------------------------------------------------------------------
# running tasks
# ---------------------------------------------------------------------------

def test_classify_rank_one(tmp_path, capsys):
    path = write(tmp_path, RANK1)
    assert cli.main(["classify", path]) == 0
    assert "II_N1" in capsys.readouterr().out


def test_classify_expectation_mismatch(tmp_path, capsys):
    path = write(tmp_path, RANK1)
    assert cli.main(["classify", path, "--expect", "I_N"]) == 1


def test_exit_codes(tmp_path, capsys):
    ok = write(tmp_path, with_tasks(RANK1, 'task = "check"\nkind = "r_symmetric"\nr = 2'), "ok.toml")
    bad = write(tmp_path, with_tasks(RANK1, 'task = "check"\nkind = "r_symmetric"\nr = 1'), "bad.toml")
    assert cli.main(["report", ok]) == 0
    capsys.readouterr()
    assert cli.main(["report", bad]) == 1
    out = capsys.readouterr().out
    assert "FAIL" in out and "relative_residual" in out and "tol=1e-09" in out
    assert cli.main(["report", write(tmp_path, RANK1.replace("x^2", "z^2"), "z.toml")]) == 2
    assert "'z'" in capsys.readouterr().err


def test_execution_error_names_task(tmp_path, capsys):
    path = write(tmp_path, with_tasks(RANK1, 'task = "classify"', 'task = "check"\nkind = "r_symmetric"\nr = 2'))
    assert cli.main(["report", path, "--jet-order", "3"]) == 2
    err = capsys.readouterr().err
    assert "task 1" in err and "jet-order" in err


def test_check_subcommand(tmp_path, capsys):
    path = write(tmp_path, RANK1)
    assert cli.main(["check", path, "--kind", "r_symmetric", "--r", "2"]) == 0
    assert cli.main(["check", path, "--kind", "semi_symmetric"]) == 0
    assert cli.main(["check", path, "--kind", "nonsense"]) == 2


def test_ldc_check_with_tensor_fields(tmp_path, capsys):
    # A = exp(2u) x^2 satisfies A' - 2A = 0: t1 = -2 du
    text = RANK1.replace('"2*u*x^2"', '"2*exp(2*u)*x^2"')
    path = write(tmp_path, with_tasks(text, 'task = "check"\nkind = "ldc"\nr = 1\nt = [["-2", "0", "0", "0"]]'))
    assert cli.main(["report", path]) == 0


def test_tsv_is_deterministic(tmp_path, capsys):
    path = write(tmp_path, with_tasks(WAVE, 'task = "classify"', 'task = "report"'))
    a, b = tmp_path / "a.tsv", tmp_path / "b.tsv"
    assert cli.main(["report", path, "--tsv", str(a), "--quiet"]) == 0
    assert cli.main(["report", path, "--tsv", str(b), "--quiet"]) == 0
    assert a.read_bytes() == b.read_bytes()
    lines = a.read_text().splitlines()
    assert lines[0].split("\t") == list(cli.TSV_FIELDS)
    rows = [l.split("\t") for l in lines[1:]]
    assert all(len(r) == len(cli.TSV_FIELDS) for r in rows)
    # every pass/fail carries the value and the tolerance used
    for r in rows:
        if r[7] in ("pass", "fail"):
            assert r[5] != "" and r[6] != ""
    assert capsys.readouterr().out == ""


def test_float_format():
    assert cli.fmt_float(0.1) == "0.10000000000000001"
    assert cli.fmt_float(2.0) == "2"
    assert cli.fmt_float(float("inf")) == "inf"


def test_oracle_subcommand(tmp_path, capsys):
    sphere = """
    [manifold]
    coordinates = ["th", "ph"]
    [metric]
    g_thth = "1"
    g_phph = "sin(th)^2"
    [points]
    values = [[0.8, 0.3], [1.9, -1.0]]
    """
    assert cli.main(["oracle", write(tmp_path, sphere)]) == 0
    out = capsys.readouterr().out
    assert out.count("finite_difference") == 2 and out.count("second_bianchi") == 2


# ---------------------------------------------------------------------------
# model and penrose subcommands
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("argv", [
    ["cahen_wallach", "--set", "A=[[1,0],[0,-1]]"],
    ["poly_symmetric", "--set", "D=[[1,0],[0,0]]"],
    ["recurrent_ksym", "--set", "k=2"],
    ["family", "--set", 'A=[["u^2","0"],["0","1"]]', "--set", 'a=["0","0","0"]'],
])
def test_model_subcommand(argv, capsys):
    assert cli.main(["model"] + argv) == 0


def test_model_family_mismatch_fails(capsys):
    argv = ["model", "family", "--set", 'A=[["u^2","0"],["0","1"]]', "--set", 'a=["0","0"]']
    assert cli.main(argv) == 1


def test_walker_sign_is_reported(capsys):
    assert cli.main(["model", "walker", "--set", 'F="exp(u)"', "--set", "M=[[1,0],[0,0]]"]) == 0
    out = capsys.readouterr().out
    assert "sign discrepancy" in out and "sigma_sign" in out


def test_model_emit_round_trip(tmp_path, capsys):
    out = tmp_path / "model.toml"
    # A = (1 + u) diag(1, 0) stays rank one on the interior sample points
    argv = ["model", "poly_symmetric", "--set", "B=[[1,0],[0,0]]", "--set", "C=[[1,0],[0,0]]"]
    assert cli.main(argv + ["--emit", str(out)]) == 0
    capsys.readouterr()
    assert cli.main(["classify", str(out), "--expect", "II_N1"]) == 0


def test_penrose_subcommand(tmp_path, capsys):
    cw = write(tmp_path, RANK1.replace('"2*u*x^2"', '"2*(x^2 - y^2)"'))
    emitted = tmp_path / "limit.toml"
    code = cli.main(["penrose", cw, "--x0", "[0,0,0,0]", "--v0", "[1,0,0,0]", "--samples", "9",
                     "--range", "-1", "1", "--emit", str(emitted), "--tsv", "-", "--quiet"])
    assert code == 0
    out = capsys.readouterr().out
    assert "P[0,0](0)\t1" in out and "P[1,1](0)\t-1" in out
    limit = mf.load_manifest(emitted)
    assert limit.metric["g_uu"]
