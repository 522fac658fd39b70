import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import power, segment_instance, triangle_instance
from eikonet.config import Numerics
from eikonet.errors import ConfigError, NetworkDocumentError, ParameterOutOfRange
from eikonet.hamiltonian import CheckStatus, a_zero, validate_field
from eikonet.instance import Instance
from eikonet.network import Orientation

FWD, REV = Orientation.FWD, Orientation.REV

ABS = power(1.0)
SHIFTED_PARABOLA = power(2.0, b=(1.0,))
WELL = power(2.0, V=(0.25, -1.0, 1.0))


def table_instance(mu_grid, values_fn):
    s_grid = np.linspace(0.0, 1.0, 5)
    mu_grid = np.asarray(mu_grid, dtype=float)
    values = [[float(values_fn(s, mu)) for mu in mu_grid] for s in s_grid]
    return segment_instance({"family": "table", "s_grid": s_grid.tolist(), "mu_grid": mu_grid.tolist(), "values": values})


def test_evaluate_examples():
    field = segment_instance(ABS).field
    assert field.evaluate("e", 0.4, -3.0) == pytest.approx(3.0)
    assert field.evaluate("e", 0.6, 3.0, REV) == pytest.approx(3.0)
    parabola = segment_instance(SHIFTED_PARABOLA).field
    np.testing.assert_allclose(parabola.evaluate("e", np.linspace(0, 1, 7), 1.0), 0.0)


def test_evaluate_rejects_parameters_outside_the_arc():
    with pytest.raises(ParameterOutOfRange):
        segment_instance(ABS).field.evaluate("e", 1.5, 0.0)


def test_min_over_mu_examples():
    assert segment_instance(ABS).field.min_over_mu("e", 0.3) == pytest.approx((0.0, 0.0))
    assert segment_instance(SHIFTED_PARABOLA).field.min_over_mu("e", 0.7) == pytest.approx((1.0, 0.0))
    assert segment_instance(WELL).field.min_over_mu("e", 0.25) == pytest.approx((0.0, -0.0625))


def test_support_function_examples():
    field = segment_instance(ABS).field
    assert field.sigma_plus_at("e", 1.0, 0.3) == pytest.approx(1.0)
    assert field.sigma_minus_at("e", 1.0, 0.3) == pytest.approx(-1.0)

    well = segment_instance(WELL).field
    assert well.sigma_plus_at("e", 0.0, 0.5) == pytest.approx(0.0)
    assert well.sigma_minus_at("e", 0.0, 0.5) == pytest.approx(0.0)

    loop_field = segment_instance(power(1.0, b=(2.0,))).field
    assert loop_field.sigma_plus_at("e", 2.0, 0.1) == pytest.approx(4.0)
    assert loop_field.sigma_minus_at("e", 2.0, 0.1) == pytest.approx(0.0)


def test_support_functions_undefined_below_the_minimum():
    sample = segment_instance(WELL).field.support_sample("e", -0.1, s_grid=[0.0, 0.5, 1.0])
    assert sample.sigma_plus[1] is None and sample.sigma_minus[1] is None
    assert sample.sigma_plus[0] == pytest.approx(np.sqrt(0.15))
    assert sample.m == pytest.approx([-0.25, 0.0, -0.25])


def test_energy_levels():
    well = segment_instance(WELL)
    assert well.field.energy_peak("e") == pytest.approx((0.5, 0.0), abs=1e-9)
    ramp = segment_instance(power(2.0, V=(0.0, 1.0)))
    assert ramp.field.energy_peak("e") == pytest.approx((0.0, 0.0), abs=1e-9)
    mixed = triangle_instance([ABS, power(1.0, V=(1.0,)), power(2.0, V=(1.0,))])
    assert a_zero(mixed.network, mixed.field) == pytest.approx(0.0)
    assert mixed.field.a_gamma("bc") == pytest.approx(-1.0)


def test_constant_subsolution_level():
    assert segment_instance(power(1.0, b=(2.0,))).field.constant_subsolution_level() == pytest.approx(2.0)
    assert segment_instance(WELL).field.constant_subsolution_level() == pytest.approx(0.0)


def test_contact_intervals_of_the_well():
    field = segment_instance(WELL).field
    (start, peak, end), = field.contact_intervals("e", 0.0)
    width = np.sqrt(field.numerics.energy_tolerance(0.0))
    assert start == pytest.approx(0.5 - width, rel=1e-6)
    assert end == pytest.approx(0.5 + width, rel=1e-6)
    assert peak == pytest.approx(0.5)
    assert field.breakpoints("e", 0.0).size == 3
    assert field.contact_intervals("e", 1.0) == []


def test_whole_arc_contact_for_flat_energy():
    field = segment_instance(ABS).field
    assert [(s, e) for s, _, e in field.contact_intervals("e", 0.0)] == [(0.0, 1.0)]


def test_table_family_matches_closed_form():
    field = table_instance(np.arange(-4.0, 5.0), lambda s, mu: abs(mu)).field
    mu_star, m = field.min_over_mu("e", 0.3)
    assert mu_star == pytest.approx(0.0, abs=1e-8)
    assert m == pytest.approx(0.0, abs=1e-8)
    assert field.sigma_plus_at("e", 1.0, 0.3) == pytest.approx(1.0, abs=1e-8)
    assert field.sigma_minus_at("e", 1.0, 0.3) == pytest.approx(-1.0, abs=1e-8)


def test_table_rejects_bad_shapes():
    doc = {"family": "table", "s_grid": [0.0, 1.0], "mu_grid": [-1.0, 0.0, 1.0], "values": [[1.0, 0.0, 1.0]]}
    with pytest.raises(NetworkDocumentError):
        segment_instance(doc)


def test_validation_power_family_passes():
    instance = triangle_instance([ABS, WELL, power(1.5, b=(0.5, 1.0), V=(0.0, 0.0, 1.0))])
    report = validate_field(instance.network, instance.field)
    assert report.passed
    assert report.warnings == 0


def test_validation_flags_bimodal_table():
    instance = table_instance(np.linspace(-2.0, 2.0, 9), lambda s, mu: (mu**2 - 1.0) ** 2 + mu**2 / 10)
    report = validate_field(instance.network, instance.field)
    assert not report.passed
    assert report.arcs[0].quasiconvexity is CheckStatus.FAIL


def test_validation_flags_non_coercive_table():
    instance = table_instance(np.linspace(-2.0, 2.0, 9), lambda s, mu: 1.0 + s)
    report = validate_field(instance.network, instance.field)
    assert not report.passed
    assert report.arcs[0].coercivity is CheckStatus.FAIL


def test_numerics_validation():
    with pytest.raises(ConfigError):
        Numerics.build(grid=64)
    with pytest.raises(ConfigError):
        Numerics.build(grid=65, panels=100)
    with pytest.raises(ConfigError):
        Numerics.build(pair_tol=0.0)
    assert Numerics.build(grid=129, panels=256).panels == 256


def test_numerics_from_environment(monkeypatch):
    monkeypatch.setenv("EIKONET_GRID", "129")
    monkeypatch.setenv("EIKONET_TOL", "1e-6")
    monkeypatch.delenv("EIKONET_PANELS", raising=False)
    numerics = Numerics.from_env()
    assert (numerics.grid, numerics.panels, numerics.pair_tol) == (129, 128, 1e-6)
    assert Numerics.from_env(grid=65).panels == 64


@pytest.mark.parametrize("variable, raw", [("EIKONET_GRID", "many"), ("EIKONET_PANELS", "2.5"), ("EIKONET_TOL", "tiny")])
def test_malformed_environment_values(monkeypatch, variable, raw):
    for name in ("EIKONET_GRID", "EIKONET_PANELS", "EIKONET_TOL"):
        monkeypatch.delenv(name, raising=False)
    monkeypatch.setenv(variable, raw)
    with pytest.raises(ConfigError, match=variable):
        Numerics.from_env()


RANDOM_POWER = st.builds(
    lambda p, b, v: power(p, b=b, V=v),
    st.sampled_from([1.0, 1.5, 2.0, 3.0]),
    st.lists(st.floats(-1, 1), min_size=1, max_size=3),
    st.lists(st.floats(-1, 1), min_size=1, max_size=3),
)


@settings(max_examples=30, deadline=None)
@given(RANDOM_POWER, st.floats(0.0, 1.0), st.floats(0.0, 3.0))
def test_support_function_identities(hamiltonian, s, lift):
    field = Instance.from_document(
        {
            "vertices": [{"id": "a", "coords": [0.0]}, {"id": "b", "coords": [1.0]}],
            "arcs": [{"id": "e", "from": "a", "to": "b", "hamiltonian": hamiltonian}],
        }
    ).field
    a = field.a_gamma("e") + lift
    plus = field.sigma_plus_at("e", a, s)
    minus = field.sigma_minus_at("e", a, s)
    assert field.evaluate("e", s, plus) == pytest.approx(a, abs=1e-9)
    assert field.evaluate("e", s, minus) == pytest.approx(a, abs=1e-9)
    assert minus <= plus + 1e-12
    mirrored = 1.0 - s
    assert field.sigma_minus_at("e", a, mirrored, REV) == -field.sigma_plus_at("e", a, 1.0 - mirrored)
    assert field.sigma_plus_at("e", a + 0.5, s) >= plus
