import json

import pytest
from click.testing import CliRunner

from bitour import make_blowup_cycle, one_flipped_c4, random_regular_bitournament
from bitour.cli import ParseError, format_edge_list, instance_hash, main, parse_edge_list


@pytest.fixture
def runner():
    return CliRunner()


def write(tmp_path, name, D):
    p = tmp_path / name
    p.write_text(format_edge_list(D))
    return str(p)


# parsing ----------------------------------------------------------------
@pytest.mark.parametrize(
    "text",
    [
        "",
        "graph 2 2\n",
        "bitour 2 2\nclass 0 1\n",
        "bitour 2 2\nclass 0 1\nclass 1 2\n0 0\n",
        "bitour 2 2\nclass 0 1\nclass 1 2\n0 1\n0 1\n",
        "bitour 2 2\nclass 0 1\nclass 1 3\n",
        "bitour 2 2\nclass 0 1\nclass 1 2\n0 x\n",
        "bitour 2 2\nclass 0 1\nclass 1 1\n0 1\n",
        "bitour 2 2\nclass 0 1\nclass 0 2\n",
    ],
)
def test_parse_errors(text):
    with pytest.raises(ParseError):
        parse_edge_list(text)


def test_round_trip_and_comments():
    for D in (make_blowup_cycle(4, 3), one_flipped_c4(2), random_regular_bitournament(3, 9, 4)):
        E = parse_edge_list("# comment\n" + format_edge_list(D))
        assert E.classes == D.classes and set(E.arcs()) == set(D.arcs())
        assert instance_hash(E) == instance_hash(D)
    assert instance_hash(make_blowup_cycle(4, 2)) != instance_hash(one_flipped_c4(2))
    assert len(instance_hash(one_flipped_c4(2))) == 16


def test_gen_blowup(runner):
    res = runner.invoke(main, ["gen", "blowup", "--n", "2"])
    assert res.exit_code == 0
    D = parse_edge_list(res.output)
    assert D.n_vertices == 8 and D.n_arcs() == 16


def test_gen_bad_size(runner):
    assert runner.invoke(main, ["gen", "flipped", "--n", "0"]).exit_code == 2
    assert runner.invoke(main, ["gen", "nope", "--n", "2"]).exit_code == 2


# run ---------------------------------------------------------------------
def test_parse_error_exit_code(runner, tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("bitour 2 2\n")
    res = runner.invoke(main, ["run", "partition", str(p)])
    assert res.exit_code == 2 and "parse error" in res.output


def test_bad_parameter_is_usage_error(runner, tmp_path):
    p = write(tmp_path, "b.txt", make_blowup_cycle(4, 2))
    assert runner.invoke(main, ["run", "classify", p, "--gamma", "abc"]).exit_code == 2
    assert runner.invoke(main, ["run", "classify", p, "--gamma", "3/2"]).exit_code == 2


def test_partition_task(runner, tmp_path):
    p = write(tmp_path, "f.txt", one_flipped_c4(3))
    res = runner.invoke(main, ["run", "partition", p])
    assert res.exit_code == 0
    rep = json.loads(res.output)
    assert rep["diagnostics"]["backward"] == 4
    assert rep["diagnostics"]["balance"]["ok"]


def test_classify_blowup(runner, tmp_path):
    p = write(tmp_path, "b.txt", make_blowup_cycle(4, 3))
    res = runner.invoke(main, ["run", "classify", p])
    assert res.exit_code == 0
    cert = json.loads(res.output)["certificate"]
    assert cert["kind"] == "close" and cert["backward"] == 0


def test_non_tournament_exit_3(runner, tmp_path):
    res = runner.invoke(main, ["gen", "tripartite", "--n", "2"])
    p = tmp_path / "t.txt"
    p.write_text(res.output)
    assert runner.invoke(main, ["run", "classify", str(p)]).exit_code == 3


def test_decompose_then_verify(runner, tmp_path):
    p = write(tmp_path, "b.txt", make_blowup_cycle(4, 3))
    out = tmp_path / "rep.json"
    res = runner.invoke(main, ["run", "decompose", p, "--out", str(out)])
    assert res.exit_code == 0
    rep = json.loads(out.read_text())
    assert rep["diagnostics"]["status"] == "complete" and len(rep["cycles"]) == 3
    res = runner.invoke(main, ["run", "verify", p, "--report", str(out)])
    assert res.exit_code == 0
    assert json.loads(res.output)["diagnostics"]["verify"]["ok"]
    # drop one arc from one cycle: verification must fail with code 1
    rep["cycles"][0] = rep["cycles"][0][1:]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(rep))
    res = runner.invoke(main, ["run", "verify", p, "--report", str(bad)])
    assert res.exit_code == 1
    # a report for another instance is rejected by hash
    q = write(tmp_path, "f.txt", one_flipped_c4(3))
    assert runner.invoke(main, ["run", "verify", q, "--report", str(out)]).exit_code == 1


def test_verify_needs_report(runner, tmp_path):
    p = write(tmp_path, "b.txt", make_blowup_cycle(4, 1))
    assert runner.invoke(main, ["run", "verify", p]).exit_code == 2
    junk = tmp_path / "junk.json"
    junk.write_text("{not json")
    assert runner.invoke(main, ["run", "verify", p, "--report", str(junk)]).exit_code == 2


def test_infeasible_decompose_exit_3(runner, tmp_path):
    p = write(tmp_path, "f.txt", one_flipped_c4(3))
    res = runner.invoke(main, ["run", "decompose", p])
    assert res.exit_code == 3
    assert json.loads(res.output)["diagnostics"]["status"] == "infeasible"


def test_size_limit_exit_3(runner, tmp_path):
    p = write(tmp_path, "b.txt", make_blowup_cycle(4, 3))
    assert runner.invoke(main, ["run", "decompose", p, "--cap", "8"]).exit_code == 3


def test_several_inputs_to_directory(runner, tmp_path):
    ps = [write(tmp_path, f"i{k}.txt", make_blowup_cycle(4, k)) for k in (1, 2)]
    outdir = tmp_path / "reports"
    res = runner.invoke(main, ["run", "partition", *ps, "--out", str(outdir), "--jobs", "2"])
    assert res.exit_code == 0
    assert sorted(x.name for x in outdir.iterdir()) == ["i1.json", "i2.json"]


def test_deterministic_output(runner, tmp_path):
    p = write(tmp_path, "r.txt", random_regular_bitournament(2, 5, 7))
    a = runner.invoke(main, ["run", "decompose", p, "--seed", "3"])
    b = runner.invoke(main, ["run", "decompose", p, "--seed", "3"])
    assert a.output == b.output and a.exit_code == b.exit_code
