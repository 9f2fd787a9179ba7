import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from starcovert.errors import InvalidParameterError
from starcovert.system_model import (ChannelSet, NoiseModel, SystemParams, complex_gaussian, convert_db,
                                     default_noise, default_system, format_config, load_config, make_rng,
                                     parse_config, parse_value, path_loss, sample_channels, to_db, trial_seed)


def test_path_loss_reference_distance():
    assert path_loss(1.0, 2.0, 0.01) == 0.01


def test_path_loss_alice_to_surface():
    assert path_loss(100.0, 2.0, 0.01) == pytest.approx(1e-6, rel=1e-15)


def test_path_loss_matches_log_domain():
    expected = math.exp(math.log(0.01) - 2.0 * math.log(20.0))
    assert path_loss(20.0, 2.0, 0.01) == pytest.approx(expected, rel=1e-14)
    assert expected == pytest.approx(2.5e-5, rel=1e-14)


@pytest.mark.parametrize("args", [(0, 2, 0.01), (-1, 2, 0.01), (10, 0, 0.01), (10, 2, 0), (10, -2, 0.01)])
def test_path_loss_rejects_nonpositive(args):
    with pytest.raises(InvalidParameterError):
        path_loss(*args)


@given(st.floats(0.1, 1e3), st.floats(1e-3, 1e3), st.floats(0.5, 5.0))
def test_path_loss_scales_with_distance(d, c, alpha):
    assert path_loss(c * d, alpha, 0.01) == pytest.approx(c ** -alpha * path_loss(d, alpha, 0.01), rel=1e-12)


def test_convert_db_examples():
    assert convert_db(0.0) == 1.0
    assert convert_db(-80.0, "dBm") == pytest.approx(1e-11, rel=1e-15)
    assert convert_db(3.0) == pytest.approx(float(mpmath.power(10, mpmath.mpf(3) / 10)), rel=1e-15)
    assert convert_db(3.0) == pytest.approx(1.9953, abs=1e-4)


@given(st.floats(1e-30, 1e30))
def test_db_round_trip(x):
    assert convert_db(to_db(x)) == pytest.approx(x, rel=1e-12)
    assert convert_db(to_db(x, "dBm"), "dBm") == pytest.approx(x, rel=1e-12)


def test_convert_db_rejects_unknown_kind():
    with pytest.raises(InvalidParameterError):
        convert_db(1.0, "dBW")


@pytest.mark.parametrize("field,value", [
    ("element_count", 0), ("element_count", 2.5), ("d_ar", 0.0), ("path_loss_exponent", -1.0),
    ("reference_gain", 0.0), ("max_transmit_power", 0.0), ("covertness_level", 0.0),
    ("covertness_level", 1.0), ("qos_rate", -0.1),
])
def test_system_params_validation(field, value):
    with pytest.raises(InvalidParameterError):
        default_system(**{field: value})


@pytest.mark.parametrize("field,value", [("bob", 0.0), ("carol", -1.0), ("nominal_warden", 0.0),
                                         ("uncertainty", 1.0), ("uncertainty", 0.5)])
def test_noise_model_validation(field, value):
    with pytest.raises(InvalidParameterError):
        default_noise(**{field: value})


def test_defaults_match_simulation_setup():
    p, n = default_system(), default_noise()
    assert p.reference_gain == pytest.approx(0.01)
    assert (p.d_ar, p.d_rb, p.d_rc, p.d_rw, p.path_loss_exponent) == (100, 20, 15, 25, 2)
    assert n.bob == n.carol == n.nominal_warden == pytest.approx(1e-11)
    assert n.uncertainty == pytest.approx(10 ** 0.3)
    lo, hi = n.support
    assert lo * n.uncertainty == pytest.approx(n.nominal_warden)
    assert hi / n.uncertainty == pytest.approx(n.nominal_warden)


def test_sample_channels_deterministic():
    p = default_system()
    a, b = sample_channels(p, 1234), sample_channels(p, 1234)
    for name in ("h_ar", "h_rb", "h_rc"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))
    assert a.l_rw == b.l_rw == pytest.approx(path_loss(25.0, 2.0, 0.01))
    c = sample_channels(p, trial_seed(1234, 0))
    d = sample_channels(p, trial_seed(1234, 1))
    assert not np.allclose(c.h_ar, d.h_ar)


def test_channels_are_read_only():
    ch = sample_channels(default_system(), 0)
    with pytest.raises(ValueError):
        ch.h_ar[0] = 0


def test_channel_set_validation():
    with pytest.raises(InvalidParameterError):
        ChannelSet(np.ones(3), np.ones(2), np.ones(3), 1.0)
    with pytest.raises(InvalidParameterError):
        ChannelSet(np.ones(3), np.ones(3), np.ones(3), 0.0)


def test_unit_gaussian_moments():
    g = complex_gaussian(make_rng(7), (100_000,))
    assert np.mean(np.abs(g) ** 2) == pytest.approx(1.0, abs=0.02)
    assert np.var(g.real) == pytest.approx(0.5, abs=0.01)
    assert abs(np.mean(g)) < 0.01


def test_channel_variance_matches_path_loss():
    p = default_system(element_count=100_000)
    ch = sample_channels(p, 99)
    assert np.mean(np.abs(ch.h_rb) ** 2) == pytest.approx(p.link_gain("rb"), rel=0.03)
    assert np.mean(np.abs(ch.h_ar) ** 2) == pytest.approx(p.link_gain("ar"), rel=0.03)


def test_links_are_uncorrelated():
    p = default_system(element_count=100_000)
    ch = sample_channels(p, 5)
    vs = [ch.h_ar / np.sqrt(p.link_gain("ar")), ch.h_rb / np.sqrt(p.link_gain("rb")),
          ch.h_rc / np.sqrt(p.link_gain("rc"))]
    for i in range(3):
        for j in range(i + 1, 3):
            corr = np.vdot(vs[i], vs[j]) / np.sqrt(np.vdot(vs[i], vs[i]).real * np.vdot(vs[j], vs[j]).real)
            assert abs(corr) < 0.02


def test_parse_value_units():
    assert parse_value("-80 dBm") == pytest.approx(1e-11)
    assert parse_value("3dB") == pytest.approx(10 ** 0.3)
    assert parse_value("0.5 W") == 0.5
    assert parse_value("8") == 8.0
    with pytest.raises(InvalidParameterError):
        parse_value("ten")


def test_config_round_trip(tmp_path):
    system = default_system(element_count=12, qos_rate=3.0)
    noise = default_noise(uncertainty=convert_db(5.0))
    path = tmp_path / "run.cfg"
    path.write_text(format_config(system, noise))
    assert load_config(path) == (system, noise)


def test_config_parsing_and_errors():
    s, n = parse_config("# comment\nmax_transmit_power = 10 dBm\nuncertainty_factor = 3 dB  # rho\n")
    assert s.max_transmit_power == pytest.approx(0.01)
    assert n.uncertainty == pytest.approx(10 ** 0.3)
    with pytest.raises(InvalidParameterError):
        parse_config("bogus = 1")
    with pytest.raises(InvalidParameterError):
        parse_config("no equals sign")
