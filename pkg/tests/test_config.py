from __future__ import annotations

import io

import pytest

from gie import config as cf
from gie.constants import ERBIUM

GOOD = """\
# two touching spheres
species = erbium
atoms = 1e6
a_m = 0.01   # m
c_m = 0.01
d_m = 0.02
time_s = 1e4
reps = 1000
"""


def write(tmp_path, text):
    p = tmp_path / "run.cfg"
    p.write_text(text, encoding="utf-8")
    return str(p)


def test_load_good_file(tmp_path):
    echo = io.StringIO()
    cfg = cf.load_config(write(tmp_path, GOOD), echo=echo)
    assert cfg.species == ERBIUM
    assert cfg.n_atoms == 10**6 and cfg.geom.d == 0.02
    assert cfg.scheme == "one-open" and cfg.setups == 1
    assert echo.getvalue().startswith("# resolved config")
    assert "atoms = 1000000" in echo.getvalue()


def test_override_wins(tmp_path):
    cfg = cf.load_config(write(tmp_path, GOOD), ["atoms=2e6", "squeeze_db = 20"], echo=None)
    assert cfg.n_atoms == 2 * 10**6 and cfg.squeeze_db == 20


def test_overrides_alone_build_a_config():
    keys = ["species=erbium", "atoms=10", "a_m=1", "c_m=1", "d_m=2", "time_s=1", "reps=2"]
    cfg = cf.load_config(None, keys, echo=None)
    assert cfg.n_atoms == 10


def test_missing_keys_are_all_listed():
    with pytest.raises(cf.ConfigError) as info:
        cf.load_config(None, ["species=erbium", "atoms=10"], echo=None)
    assert set(info.value.keys) == {"a_m", "c_m", "d_m", "time_s", "reps"}
    for key in info.value.keys:
        assert key in str(info.value)


def test_unknown_key_is_named(tmp_path):
    with pytest.raises(cf.ConfigError, match="atomz") as info:
        cf.load_config(write(tmp_path, GOOD + "atomz = 3\n"), echo=None)
    assert info.value.keys == ("atomz",)


def test_bad_values_name_their_key(tmp_path):
    cases = [("atoms=ten", "atoms"), ("atoms=2.5", "atoms"), ("time_s=inf", "time_s"), ("reps=1", "reps")]
    for item, key in cases:
        with pytest.raises(cf.ConfigError, match=key) as info:
            cf.load_config(write(tmp_path, GOOD), [item], echo=None)
        assert key in info.value.keys


def test_geometry_and_scheme_errors(tmp_path):
    with pytest.raises(cf.ConfigError, match="overlap"):
        cf.load_config(write(tmp_path, GOOD), ["d_m=0.01"], echo=None)
    with pytest.raises(cf.ConfigError, match="scheme"):
        cf.load_config(write(tmp_path, GOOD), ["scheme=sideways"], echo=None)


def test_syntax_and_duplicates():
    with pytest.raises(cf.ConfigError, match=":2:"):
        cf.parse_lines(["species = erbium", "atoms 10"])
    with pytest.raises(cf.ConfigError, match="duplicate"):
        cf.parse_lines(["atoms = 1", "atoms = 2"])
    with pytest.raises(cf.ConfigError, match="key=value"):
        cf.parse_overrides(["atoms"])
    assert cf.parse_lines(["", "   # only a comment", "x = 1 # trailing"]) == {"x": "1"}


def test_missing_file():
    with pytest.raises(cf.ConfigError, match="cannot read"):
        cf.load_config("/nonexistent/run.cfg", echo=None)


def test_custom_species_needs_mass(tmp_path):
    with pytest.raises(cf.ConfigError, match="mass_kg"):
        cf.load_config(write(tmp_path, GOOD), ["species=dysprosium"], echo=None)
    cfg = cf.load_config(write(tmp_path, GOOD), ["species=dysprosium", "mass_kg=2.7e-25"], echo=None)
    assert cfg.species.name == "dysprosium" and cfg.species.loss_coefficient is None


def test_dump_round_trip(tmp_path):
    cfg = cf.load_config(write(tmp_path, GOOD), ["scheme=both-closed", "setups=3", "a_s_m=1e-12"], echo=None)
    buf = io.StringIO()
    cf.dump(cfg, buf)
    again = cf.load_config(write(tmp_path, buf.getvalue()), echo=None)
    assert again == cfg


def test_key_docs_cover_known_keys():
    documented = {d.key for d in cf.KEY_DOCS}
    for key in cf.KNOWN:
        assert key in documented or key.startswith("phases.")
