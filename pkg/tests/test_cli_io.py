import csv
import io
import json

import numpy as np
import pytest

from newton_atlas import export
from newton_atlas.cli import (EXIT_DEGENERATE, EXIT_FAIL, EXIT_IO, EXIT_OK, EXIT_USAGE,
                              main, parse_res, parse_viewport, UsageError)
from newton_atlas.config import ConfigError, load_config, parse_family, parse_map
from newton_atlas.dynamics import Viewport, basin_grid, quadratic_family, param_scan

CUBIC = {"p": [[0, 0], [-1, 0], [0, 0], [1, 0]]}
FAMILY = {"family": {"p": [[[0, 0], [0, 0], [1, 0]], [[1, 0]]], "q": [[[0, 0], [1, 0]]]}}


def write(tmp_path, name, data):
    path = tmp_path / name
    path.write_text(json.dumps(data) if name.endswith(".json") else data)
    return str(path)


def member(c):
    cfg = json.loads(json.dumps(FAMILY))
    cfg["family"]["c"] = [c.real, c.imag]
    return cfg


# -- configs ---------------------------------------------------------------------------

def test_toml_and_json_agree(tmp_path):
    toml = write(tmp_path, "m.toml", "p = [[0, 0], [-1, 0], [0, 0], [1, 0]]\n")
    js = write(tmp_path, "m.json", CUBIC)
    a, b = parse_map(load_config(toml)), parse_map(load_config(js))
    assert a.p == b.p and a.d == b.d == 3


def test_family_member_config():
    spec = parse_map(member(-0.25))
    assert (spec.m, spec.n, spec.d) == (2, 1, 3)
    assert np.allclose(sorted(spec.root_points.real), [-0.5, 0.5])


def test_family_matches_quadratic_family():
    fam = parse_family(FAMILY)
    p, q = fam.at(2)
    ref_p, ref_q = quadratic_family().at(2)
    assert p == ref_p and q == ref_q


@pytest.mark.parametrize("cfg", [{}, {"p": [[1, 0]]}, {"p": "abc"},
                                 {"family": {"p": [[[1, 0]], [[1, 0]], [[1, 0]]]}},
                                 FAMILY])
def test_bad_configs(cfg):
    with pytest.raises(ConfigError):
        parse_map(cfg)


def test_unreadable_config(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.toml")
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, "bad.toml", "p = [[0, \n"))


def test_parse_helpers():
    assert parse_viewport("-1,0.5,4,2") == Viewport(-1 + 0.5j, 4, 2)
    assert parse_res("30x20") == (30, 20)
    for bad in ("1,2,3", "0,0,-1,1"):
        with pytest.raises(UsageError):
            parse_viewport(bad)
    for bad in ("10", "10x-1", "99999x2"):
        with pytest.raises(UsageError):
            parse_res(bad)


# -- PPM / CSV --------------------------------------------------------------------------

def test_ppm_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    img = rng.integers(0, 256, size=(7, 5, 3), dtype=np.uint8)
    img[0, 0] = (10, 32, 9)          # whitespace bytes right after the header
    path = tmp_path / "a.ppm"
    export.write_ppm(path, img)
    assert np.array_equal(export.read_ppm(path), img)


def test_ppm_one_pixel(tmp_path, cubic):
    g = basin_grid(cubic, Viewport(1 + 0j, 0.1, 0.1), (1, 1))
    img = export.colourize(g)
    export.write_ppm(tmp_path / "one.ppm", img)
    assert export.read_ppm(tmp_path / "one.ppm").shape == (1, 1, 3)


def test_read_ppm_rejects_other_formats(tmp_path):
    (tmp_path / "x.ppm").write_bytes(b"P3\n1 1\n255\n0 0 0\n")
    with pytest.raises(ValueError):
        export.read_ppm(tmp_path / "x.ppm")


def test_scan_csv_header_only():
    scan = param_scan(quadratic_family(), (0, 0, 0, 0), (4, 4))
    buf = io.StringIO()
    export.write_scan_csv(buf, scan)
    rows = list(csv.reader(io.StringIO(buf.getvalue())))
    assert rows == [export.scan_header(2)]


def test_scan_csv_rows():
    scan = param_scan(quadratic_family(), (1.9, 2.1, -0.1, 0.1), (2, 2))
    buf = io.StringIO()
    export.write_scan_csv(buf, scan)
    rows = list(csv.DictReader(io.StringIO(buf.getvalue())))
    assert len(rows) == 4 and set(rows[0]) == set(export.scan_header(2))


def test_legend_and_sidecar(quarter):
    g = basin_grid(quarter, Viewport(-0.5 + 0j, 5, 4), (50, 40))
    side = export.sidecar(g)
    names = {e["meaning"] for e in side["legend"]}
    assert {"Root(0)", "Root(1)", "Petal(0)"} <= names
    assert abs(sum(side["fractions"].values()) - 1) < 1e-12
    json.dumps(side, default=export._json_default)


# -- command line ---------------------------------------------------------------------------

def test_cli_classify(tmp_path, capsys):
    assert main(["classify", "--map", write(tmp_path, "c.json", CUBIC)]) == EXIT_OK
    rep = json.loads(capsys.readouterr().out)
    assert rep["d"] == 3 and rep["infinity"]["kind"] == "repelling"


def test_cli_classify_degenerate(tmp_path):
    # p = z - 1 with q = 0 gives the constant Newton map 1
    assert main(["classify", "--map", write(tmp_path, "l.json", {"p": [[-1, 0], [1, 0]]})]) \
        == EXIT_DEGENERATE


def test_cli_render(tmp_path):
    out = tmp_path / "r.ppm"
    code = main(["render", "--map", write(tmp_path, "c.json", CUBIC), "--viewport", "-1,0,4,4",
                 "--res", "40x30", "--overlay", "fixed,critical", "--out", str(out)])
    assert code == EXIT_OK
    assert export.read_ppm(out).shape == (30, 40, 3)
    side = json.loads((tmp_path / "r.ppm.json").read_text())
    assert side["viewport"]["center"] == [-1, 0] and side["resolution"] == [40, 30]


def test_cli_render_is_deterministic(tmp_path):
    cfg = write(tmp_path, "q.json", member(-0.25))
    outs = []
    for i in range(2):
        out = tmp_path / f"r{i}.ppm"
        assert main(["render", "--map", cfg, "--res", "30x30", "--out", str(out)]) == EXIT_OK
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_cli_render_bad_overlay(tmp_path):
    cfg = write(tmp_path, "c.json", CUBIC)
    assert main(["render", "--map", cfg, "--overlay", "petals"]) == EXIT_USAGE


def test_cli_scan(tmp_path):
    cfg = write(tmp_path, "f.json", FAMILY)
    out = tmp_path / "s.csv"
    flag = tmp_path / "s.ppm"
    code = main(["scan", "--family", cfg, "--viewport", "2,0,0.1,0.1", "--res", "2x2",
                 "--out", str(out), "--flagmap", str(flag)])
    assert code == EXIT_OK
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 4 and any(r["pcm_flag"] == "1" for r in rows)
    assert export.read_ppm(flag).shape == (2, 2, 3)


def test_cli_area(tmp_path, capsys):
    cfg = write(tmp_path, "c.json", CUBIC)
    assert main(["area", "--map", cfg, "--root", "0", "--radii", "2,4", "--size", "40"]) == EXIT_OK
    rep = json.loads(capsys.readouterr().out)
    assert len(rep["areas"]) == 2 and rep["areas"][0] <= rep["areas"][1]
    assert main(["area", "--map", cfg, "--root", "7"]) == EXIT_USAGE


def test_cli_audit(tmp_path, capsys):
    cubic = write(tmp_path, "c.json", CUBIC)
    quarter = write(tmp_path, "q.json", member(-0.25))
    two = write(tmp_path, "t.json", member(2))
    # basins are ordered by real part: -1, 0, +1
    assert main(["audit", "--map", cubic, "--pcm", quarter, "--marking", "2:0"]) == EXIT_OK
    assert main(["audit", "--map", cubic, "--pcm", two, "--marking", "1:0"]) == EXIT_OK
    assert main(["audit", "--map", cubic, "--pcm", two, "--marking", "2:0"]) == EXIT_FAIL
    assert main(["audit", "--map", cubic, "--pcm", two, "--marking", "1:0,1:1"]) == EXIT_USAGE
    assert main(["audit", "--map", cubic, "--pcm", two, "--marking", "1:5"]) == EXIT_USAGE
    capsys.readouterr()


def test_cli_conjugacy(tmp_path, capsys):
    a = write(tmp_path, "a.json", member(-0.25))
    b = write(tmp_path, "b.json", member(2))
    assert main(["conjugacy", "--map", a, "--other", a]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["conjugate"] is True
    assert main(["conjugacy", "--map", a, "--other", b]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["conjugate"] is False


def test_cli_verify(capsys):
    assert main(["verify", "mobius"]) == EXIT_OK
    assert "[PASS]" in capsys.readouterr().out
    assert main(["verify", "nosuch"]) == EXIT_USAGE


def test_cli_usage_errors(tmp_path):
    assert main([]) == EXIT_USAGE
    assert main(["render"]) == EXIT_USAGE
    assert main(["render", "--map", str(tmp_path / "missing.toml")]) == EXIT_USAGE
    assert main(["render", "--map", write(tmp_path, "c.json", CUBIC), "--res", "0x"]) == EXIT_USAGE


def test_cli_io_failure(tmp_path):
    cfg = write(tmp_path, "c.json", CUBIC)
    bad = tmp_path / "no" / "such" / "dir" / "r.ppm"
    assert main(["render", "--map", cfg, "--res", "4x4", "--out", str(bad)]) == EXIT_IO


def test_cli_negative_viewport(tmp_path):
    out = tmp_path / "neg.ppm"
    code = main(["render", "--map", write(tmp_path, "c.json", CUBIC), "--viewport",
                 "-1.5,-0.5,2,2", "--res", "8x8", "--out", str(out)])
    assert code == EXIT_OK and out.exists()
