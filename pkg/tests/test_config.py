import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from obsconst import config
from obsconst.config import ConfigError, RunConfig, from_dict, load, loads, number, preset
from obsconst.geometry import Arc, Band, ManifoldSpec, Polygon, Region
from obsconst.raytrace import SearchConfig


@pytest.mark.parametrize("name", list(config.PRESETS))
def test_presets_load_and_round_trip(name):
    run = preset(name)
    assert run.preset == name
    assert len(run.times) >= 3
    assert loads(run.dumps()) == run


def test_preset_values():
    half = preset("circle-halfarc")
    assert half.region.primitives == (Arc(0.0, math.pi),)
    assert half.cutoff == 8.0 and half.times == (25.0, 50.0, 100.0)
    hemi = preset("sphere-hemisphere")
    assert hemi.cutoff == pytest.approx(math.sqrt(72))
    assert hemi.times[0] == pytest.approx(2 * math.pi)
    tor = preset("torus-triangles")
    assert len(tor.region.primitives) == 4
    assert tor.search == SearchConfig.coarse()
    assert sum(p.measure() for p in tor.region.primitives) == pytest.approx(0.5)


def test_defaults_without_preset():
    run = from_dict({})
    assert run.manifold.kind == "circle"
    assert sum(p.measure() for p in run.region.primitives) == pytest.approx(2 * math.pi)


def test_override_on_top_of_preset():
    run = loads("preset: circle-halfarc\nspectral:\n  cutoff: 4\ntime:\n  T: [1, 2, 3]\n")
    assert run.cutoff == 4.0 and run.times == (1.0, 2.0, 3.0)
    assert run.region.primitives == (Arc(0.0, math.pi),)


def test_expressions():
    assert number("pi/2") == pytest.approx(math.pi / 2)
    assert number("sqrt(72)") == pytest.approx(math.sqrt(72))
    assert number("2**3 - tau") == pytest.approx(8 - 2 * math.pi)
    assert number(-1.5) == -1.5
    with pytest.raises(ConfigError):
        number("__import__('os')")
    with pytest.raises(ConfigError):
        number("exp(1)")
    with pytest.raises(ConfigError):
        number(True)


def test_diagnostic_carries_line_and_field():
    text = "manifold:\n  kind: circle\ntime:\n  T: [25, 10, 100]\n"
    with pytest.raises(ConfigError) as exc:
        loads(text)
    assert exc.value.field == "time.T"
    assert exc.value.line == 4
    assert str(exc.value).startswith("line 4, field 'time.T'")


@pytest.mark.parametrize(
    "text, field",
    [
        ("foo: 1\n", "foo"),
        ("manifold:\n  kind: klein\n", "manifold.kind"),
        ("manifold:\n  kind: circle\n  periods: [1, 1]\n", "manifold.periods"),
        ("spectral:\n  cutoff: -2\n", "spectral.cutoff"),
        ("spectral:\n  quadrature: [10, 10]\n", "spectral.quadrature"),
        ("time:\n  T: [1, 2]\n", "time.T"),
        ("search:\n  preset: fast\n", "search.preset"),
        ("search:\n  seed: -1\n", "search.seed"),
        ("output:\n  formats: [pdf]\n", "output.formats"),
        ("region:\n  topology: open\n", "region.topology"),
        ("preset: nope\n", "preset"),
    ],
)
def test_field_diagnostics(text, field):
    with pytest.raises(ConfigError) as exc:
        loads(text)
    assert exc.value.field is not None
    assert exc.value.field.startswith(field)
    assert exc.value.line is not None


def test_primitive_diagnostics():
    text = "region:\n  primitives:\n    - {type: arc, start: 0}\n"
    with pytest.raises(ConfigError) as exc:
        loads(text)
    assert exc.value.field.startswith("region.primitives")


def test_overlapping_primitives_rejected():
    text = "region:\n  primitives:\n    - {type: arc, start: 0, end: 2}\n    - {type: arc, start: 1, end: 3}\n"
    with pytest.raises(ConfigError):
        loads(text)


def test_invalid_yaml_reports_line():
    with pytest.raises(ConfigError) as exc:
        loads("time:\n  T: [1, 2\n")
    assert exc.value.line is not None


def test_load_from_file(tmp_path):
    p = tmp_path / "run.yaml"
    p.write_text("preset: sphere-hemisphere\nsearch:\n  seed: 7\n")
    run = load(p)
    assert run.seed == 7 and run.manifold == ManifoldSpec.sphere()


arc_lists = st.lists(st.floats(0.05, 0.6), min_size=1, max_size=5).map(
    lambda ls: [Arc(1.2 * i, length) for i, length in enumerate(ls)]
)


@st.composite
def runs(draw):
    kind = draw(st.sampled_from(["circle", "torus", "sphere"]))
    if kind == "circle":
        m = ManifoldSpec.circle()
        prims = draw(arc_lists)
    elif kind == "torus":
        m = ManifoldSpec.torus(draw(st.floats(0.5, 3)), draw(st.floats(0.5, 3)))
        L1, L2 = m.periods
        prims = [Polygon.rectangle(0.0, 0.0, 0.4 * L1, 0.3 * L2), Polygon.triangle((0.5 * L1, 0.5 * L2), (0.9 * L1, 0.5 * L2), (0.5 * L1, 0.9 * L2))]
    else:
        m = ManifoldSpec.sphere()
        t = draw(st.floats(0.1, 1.4))
        prims = [Band(0.0, t), Band(t + 0.2, math.pi - 0.1)]
    topo = draw(st.sampled_from(["interior", "closure"]))
    times = tuple(sorted(set(draw(st.lists(st.floats(0.5, 200), min_size=3, max_size=5, unique=True)))))
    if len(times) < 3:
        times = (1.0, 2.0, 3.0)
    return RunConfig(
        manifold=m,
        region=Region(m, prims, topo),
        cutoff=draw(st.floats(2.0, 20.0)),
        quadrature=(24, 48) if kind == "sphere" and draw(st.booleans()) else None,
        times=times,
        search=SearchConfig(refine_from=draw(st.integers(1, 20))),
        seed=draw(st.integers(0, 2**31)),
        formats=tuple(draw(st.lists(st.sampled_from(config.FORMATS), min_size=1, max_size=3, unique=True))),
    )


@given(runs())
def test_round_trip_property(run):
    assert loads(run.dumps()) == run
