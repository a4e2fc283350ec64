import pytest

from tracefem.config import ConfigError, SCHEMA, load_config, make_config, parse_config


def test_empty_file_gives_defaults(tmp_path):
    p = tmp_path / "empty.cfg"
    p.write_text("")
    cfg = load_config(p)
    assert cfg["surface"] == "sphere" and cfg["model"] == "ch" and cfg["mesh.level"] == 3
    assert cfg["phys.epsilon"] == 0.02 and cfg["phys.D"] == 0.02 and cfg["ic.a"] == 0.5
    assert cfg["mesh.box_half_width"] == pytest.approx(5 / 3)
    assert cfg.mobility == "degenerate"
    assert cfg.tol_dt == pytest.approx(0.002)


def test_negative_epsilon_names_key():
    with pytest.raises(ConfigError) as exc:
        parse_config("phys.epsilon = -1\n")
    assert exc.value.key == "phys.epsilon" and "phys.epsilon" in str(exc.value)


def test_torus_defaults():
    cfg = parse_config("surface = torus")
    assert (cfg["torus.R"], cfg["torus.r_min"], cfg["torus.r_max"]) == (1.0, 0.3, 0.6)


@pytest.mark.parametrize("text,line", [
    ("# comment\nmesh.level = 2\nfoo.bar = 1\n", 3),
    ("mesh.level = 2\nmesh.level = 3\n", 2),
    ("mesh.level = two\n", 1),
    ("\n\njust words\n", 3),
    ("time.adaptive = maybe", 1),
])
def test_parse_errors_carry_line(text, line):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert exc.value.line == line


@pytest.mark.parametrize("vals", [
    {"phys.rho1": 0.5}, {"ic.a": 1.5}, {"torus.r_min": 0.7}, {"time.dt_min": 2.0},
    {"quadrature.surface_order": 3}, {"mesh.level": -1}, {"phys.eta2": 0.0},
])
def test_validation(vals):
    with pytest.raises(ConfigError):
        make_config(vals)


def test_comments_and_types():
    cfg = parse_config("model = nsch  # two-phase flow\ntime.adaptive = off\ntime.tol_dt = 0.01\n")
    assert cfg.mobility == "constant"
    assert cfg["time.adaptive"] is False and cfg.tol_dt == 0.01


def test_hash_ignores_output_dir():
    a = make_config({"output.dir": "x"})
    b = make_config({"output.dir": "y"})
    c = make_config({"ic.seed": 1})
    assert a.hash == b.hash != c.hash and len(a.hash) == 16


def test_with_updates():
    cfg = make_config().with_updates(ic__seed=4, **{"mesh.level": 2})
    assert cfg["ic.seed"] == 4 and cfg["mesh.level"] == 2
    with pytest.raises(ConfigError):
        cfg.with_updates(bogus=1)


def test_non_utf8(tmp_path):
    p = tmp_path / "bad.cfg"
    p.write_bytes(b"mesh.level = \xff\n")
    with pytest.raises(ConfigError):
        load_config(p)


def test_every_key_has_valid_default():
    cfg = make_config()
    assert set(cfg.values) == set(SCHEMA)
