import os
import subprocess
from fractions import Fraction
from pathlib import Path

import pytest

import bichain

MODELS = Path(os.environ.get("BICHAIN_MODELS_DIR", Path(__file__).resolve().parents[2] / "models"))


def sir_json(s, i, r, e_beta="1/2", e_gamma="1/2"):
    return (
        '{"compartments":["S","I","R"],"initial":{"S":%d,"I":%d,"R":%d},'
        '"transfers":[{"from":"S","to":"I","coeffs":{"I":"1/20"}},{"from":"I","to":"R","offset":"1/10"}],'
        '"exp_table":{"entries":[{"from":"S","to":"I","var":"I","value":"%s"},'
        '{"from":"I","to":"R","var":"offset","value":"%s"}]}}' % (s, i, r, e_beta, e_gamma)
    )


def test_load_and_classify():
    sir = bichain.Chain.load(str(MODELS / "sir.json"))
    assert sir.names == ["S", "I", "R"]
    assert sir.initial == [99, 1, 0]
    assert sir.is_closed() and sir.is_acyclic() and not sir.is_simple()
    assert sir.is_sir()
    assert sir.support() == [(0, 1), (1, 2)]
    covid = bichain.Chain.load(str(MODELS / "covid_single_age.json"))
    assert len(covid) == 10
    assert covid.is_acyclic() and not covid.is_closed()


def test_round_trip():
    sir = bichain.Chain.load(str(MODELS / "sir.json"))
    assert bichain.Chain.from_json(sir.to_json()).to_json() == sir.to_json()


def test_errors_map_to_exceptions():
    with pytest.raises(bichain.InputError):
        bichain.Chain.from_json("{")
    with pytest.raises(bichain.Error):
        bichain.Chain.from_json('{"compartments":["A"],"initial":{"A":-1}}')


def test_eoe_geometric_and_engines():
    geo = bichain.Chain.from_json(sir_json(0, 1, 0))
    assert bichain.eoe(geo) == Fraction(2)
    small = bichain.Chain.from_json(sir_json(3, 1, 0, "3/4", "1/2"))
    exact = bichain.eoe(small, engine="sir")
    assert isinstance(exact, Fraction)
    assert exact == bichain.eoe(small, engine="general")
    assert bichain.eoe(small, backend="double") == pytest.approx(float(exact), rel=1e-12)


def test_successors_example():
    chain = bichain.Chain.from_json(sir_json(1, 1, 0, "1/2", "2/3"))
    step = bichain.successors(chain, (1, 1, 0))
    assert step[(0, 1, 1)] == Fraction(1, 6)
    assert sum(step.values()) == 1


def test_until_probability():
    chain = bichain.Chain.from_json(sir_json(2, 1, 0, "1/2", "2/3"))
    assert bichain.until_probability(chain, "true", "true") == 1
    assert bichain.until_probability(chain, "true", "S + I + R != N0") == 0
    os_value = bichain.until_probability(chain, "S >= S_init", "I = S_init + I_init")
    assert 0 < os_value < 1


def test_approx_exp():
    import math

    v = bichain.approx_exp(1, 2, 20)
    assert abs(float(v) - math.exp(-0.5)) <= 2.0**-20


def test_simulate_and_export():
    geo = bichain.Chain.from_json(sir_json(0, 1, 0))
    res = bichain.simulate(geo, runs=5000, seed=3)
    assert abs(res["mean"] - 2.0) <= 4 * res["std_error"]
    assert sum(res["final_states"].values()) == 5000
    model, props = bichain.export_prism(bichain.Chain.load(str(MODELS / "sir.json")))
    assert model.startswith("dtmc\n")
    assert 'R{"time_step"}' in props


def test_cli_binding_and_executable():
    code, out, _ = bichain.run_cli(["validate", str(MODELS / "sir.json")])
    assert code == 0 and "closed: yes" in out
    exe = os.environ.get("BICHAIN_CLI")
    if exe:
        proc = subprocess.run([exe, "--machine-output", "approx-exp", "1", "1", "10"], capture_output=True, text=True)
        assert proc.returncode == 0
        assert "value=" in proc.stdout
