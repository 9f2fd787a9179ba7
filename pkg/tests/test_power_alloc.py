import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from starcovert.detection import covert_lambda_bound
from starcovert.errors import InfeasibleError, InvalidParameterError
from starcovert.noma import PowerSplit, rates_from_gains
from starcovert.power_alloc import PowerSubproblemInputs, allocate_power, check_sic_feasible, power_caps
from starcovert.system_model import default_noise, default_system, make_rng
from starcovert.verify import power_audit, power_grid_oracle, random_power_instance


def inputs(g_b=1e-9, g_c=1e-9, s_r=1e-7, **kw):
    return PowerSubproblemInputs(g_b, g_c, s_r, default_system(**kw), default_noise())


def s_r_for_cap(cap, params, noise):
    return covert_lambda_bound(params.covertness_level, noise) / (params.link_gain("rw") * cap)


def test_inputs_reject_negative_gains():
    with pytest.raises(InvalidParameterError):
        inputs(g_b=-1.0)


def test_sic_check_examples():
    assert check_sic_feasible(inputs(g_b=1e-9, g_c=1e-9))
    assert not check_sic_feasible(inputs(g_b=0.0, g_c=1e-9))


def test_sic_check_agrees_with_rates():
    rng = make_rng(8)
    for _ in range(200):
        g_b, g_c = 10 ** rng.uniform(-11, -8, 2)
        inp = inputs(g_b=g_b, g_c=g_c)
        expected = check_sic_feasible(inp)
        for _ in range(100):
            pb = rng.uniform(1e-4, 0.05)
            r = rates_from_gains(g_b, g_c, PowerSplit(pb, rng.uniform(pb, 0.1)), inp.noise)
            if abs(g_b - g_c) > 1e-9 * g_b:
                assert (r.r_bc >= r.r_cc) == expected


def test_symmetric_optimum_when_caps_slack():
    sp = allocate_power(inputs(s_r=0.0, qos_rate=0.0))
    assert sp.p_b == sp.p_c == pytest.approx(0.05, rel=1e-15)


def test_worked_example_against_grid():
    params = default_system(max_transmit_power=0.1, qos_rate=1.0)
    noise = default_noise()
    inp = PowerSubproblemInputs(1e-9, 1e-9, s_r_for_cap(0.02, params, noise), params, noise)
    caps = power_caps(inp)
    assert caps["qos"] == pytest.approx(0.045)
    assert caps["covert"] == pytest.approx(0.02)
    sp = allocate_power(inp)
    assert sp.p_b == pytest.approx(0.02, rel=1e-12)
    assert sp.p_c == pytest.approx(0.08, rel=1e-12)
    # 2-D grid over (P_b, P_c): the best feasible covert power sits at the closed form
    pb = np.linspace(0, 0.1, 1001)[:, None]
    pc = np.linspace(0, 0.1, 1001)[None, :]
    q = 2 ** params.qos_rate - 1
    ok = (pb + pc <= 0.1 + 1e-15) & (pc >= pb) & (pc * 1e-9 >= q * (pb * 1e-9 + noise.carol)) \
        & (pb * params.link_gain("rw") * inp.s_r <= covert_lambda_bound(params.covertness_level, noise) * (1 + 1e-12))
    best = float(np.max(np.where(ok, pb, -1)))
    assert best == pytest.approx(sp.p_b, abs=1e-4)


def test_qos_boundary_gives_zero_covert_power():
    params = default_system(max_transmit_power=0.1, qos_rate=1.0)
    noise = default_noise()
    g_c = noise.carol / 0.1       # P * g_c equals (2^R - 1) sigma^2
    sp = allocate_power(PowerSubproblemInputs(g_c, g_c, 1e-7, params, noise))
    assert sp.p_b == pytest.approx(0.0, abs=1e-15)
    assert sp.p_c == pytest.approx(0.1)


def test_infeasibility_is_typed():
    with pytest.raises(InfeasibleError) as e:
        allocate_power(inputs(g_b=1e-12, g_c=1e-9))
    assert e.value.constraint == "sic"
    with pytest.raises(InfeasibleError) as e:
        allocate_power(inputs(g_b=1e-12, g_c=1e-12))
    assert e.value.constraint == "qos"


@given(st.integers(0, 2**32 - 1))
def test_closed_form_is_feasible_and_maximal(seed):
    inp = random_power_instance(make_rng(seed))
    sp = allocate_power(inp)
    assert sp.p_b + sp.p_c == pytest.approx(inp.params.max_transmit_power, rel=1e-15)
    for v in power_audit(sp, inp).values():
        assert v <= 1e-12
    # one grid step (1e-4 P) beyond the closed form is infeasible
    p_tmax = inp.params.max_transmit_power
    if sp.p_b < p_tmax / 2:
        bumped = sp.p_b + 1e-4 * p_tmax
        grid_best, _ = power_grid_oracle(inp, 5001)
        assert grid_best <= sp.p_b * (1 + 1e-12)
        q = 2 ** inp.params.qos_rate - 1
        over_qos = (p_tmax - bumped) * inp.g_c < q * (bumped * inp.g_c + inp.noise.carol)
        over_cov = bumped * inp.l_rw * inp.s_r > covert_lambda_bound(inp.params.covertness_level, inp.noise)
        assert over_qos or over_cov or bumped > p_tmax / 2


@given(st.integers(0, 2**32 - 1), st.floats(0.05, 0.9), st.floats(0.05, 0.9))
def test_monotone_in_epsilon(seed, e1, e2):
    inp = random_power_instance(make_rng(seed))
    lo, hi = sorted((e1, e2))
    a = allocate_power(PowerSubproblemInputs(inp.g_b, inp.g_c, inp.s_r, default_system(
        max_transmit_power=inp.params.max_transmit_power, qos_rate=inp.params.qos_rate, covertness_level=lo), inp.noise))
    b = allocate_power(PowerSubproblemInputs(inp.g_b, inp.g_c, inp.s_r, default_system(
        max_transmit_power=inp.params.max_transmit_power, qos_rate=inp.params.qos_rate, covertness_level=hi), inp.noise))
    assert a.p_b <= b.p_b


@given(st.integers(0, 2**32 - 1), st.floats(1.0, 10.0), st.floats(0.0, 1.0))
def test_monotone_in_budget_and_rate(seed, scale, shrink):
    inp = random_power_instance(make_rng(seed))
    base = allocate_power(inp)
    more = PowerSubproblemInputs(inp.g_b, inp.g_c, inp.s_r, default_system(
        max_transmit_power=scale * inp.params.max_transmit_power, qos_rate=inp.params.qos_rate,
        covertness_level=inp.params.covertness_level), inp.noise)
    assert allocate_power(more).p_b >= base.p_b
    easier = PowerSubproblemInputs(inp.g_b, inp.g_c, inp.s_r, default_system(
        max_transmit_power=inp.params.max_transmit_power, qos_rate=shrink * inp.params.qos_rate,
        covertness_level=inp.params.covertness_level), inp.noise)
    assert allocate_power(easier).p_b >= base.p_b
