import numpy as np
import pytest

from crossqed import analytic
from crossqed.core import ConfigurationError, InvalidParameterError, PulseShape
from crossqed.gates import (
    GateSpec,
    asymmetric_params,
    asymmetry_sweep,
    default_grid,
    evaluate_cnot_atom_control,
    evaluate_cnot_light_control,
    evaluate_fredkin,
)

from conftest import params_for


@pytest.fixture(scope="module")
def pulse():
    return PulseShape.from_duration(40.0)


@pytest.fixture(scope="module")
def short():
    return PulseShape.from_duration(10.0)


def test_specs_are_bijections():
    for kind, n in (("cnot_atom_control", 4), ("cnot_light_control", 4), ("fredkin", 8)):
        spec = GateSpec.for_kind(kind)
        assert len(spec.rows) == n
        assert sorted(i for i, _ in spec.rows) == sorted(o for _, o in spec.rows)
    fred = dict(GateSpec.for_kind("fredkin").rows)
    assert fred["g1,01"] == "g1,10" and fred["g2,01"] == "g2,01" and fred["g1,11"] == "g1,11"
    with pytest.raises(InvalidParameterError):
        GateSpec.for_kind("toffoli")
    with pytest.raises(InvalidParameterError):
        GateSpec("fredkin", (("a", "x"), ("b", "x")))


@pytest.mark.parametrize("gamma", [0.02, 20.0])
def test_atom_control_above_threshold_at_ten(pulse, gamma):
    table = evaluate_cnot_atom_control(params_for(10.0, gamma), pulse)
    assert table.min_success > 0.95
    for r in table.rows:
        assert r.success + r.loss + r.wrong_port <= 1 + 1e-6
        if r.input.startswith("g2"):
            assert r.success >= 1 - 1e-4


def test_swap_row_decomposition(pulse):
    C = 10.0
    table = evaluate_cnot_atom_control(params_for(C), pulse)
    r = table.row("g1,1")
    assert r.success + r.loss + r.wrong_port == pytest.approx(1.0, abs=1e-4)
    assert r.wrong_port == pytest.approx(analytic.resonant_reflection(C) ** 2, abs=2e-3)
    assert r.loss == pytest.approx(analytic.cross_loss_probability(C), abs=2e-3)
    assert r.success > r.wrong_port


def test_decoupled_atom_does_not_swap(short):
    table = evaluate_cnot_atom_control(params_for(0.0), short)
    assert table.row("g1,0").success == pytest.approx(0.0, abs=1e-6)
    assert table.row("g1,0").wrong_port == pytest.approx(1.0, abs=1e-4)


def test_light_control_dark_rows_trivial(pulse):
    table = evaluate_cnot_light_control(params_for(10.0), pulse)
    assert table.row("D,0").success == pytest.approx(1.0, abs=1e-4)
    assert table.row("D,1").success == pytest.approx(1.0, abs=1e-4)
    swap = evaluate_cnot_atom_control(params_for(10.0), pulse).row("g1,1").success
    for label in ("B,0", "B,1"):
        row = table.row(label)
        assert row.success == pytest.approx(swap, abs=1e-8)
        assert row.fidelity <= row.success + 1e-9


def test_light_control_ideal_limit(pulse):
    table = evaluate_cnot_light_control(params_for(1e4), pulse)
    assert table.min_success > 0.99


def test_argmax_above_threshold(pulse):
    for C in (0.5, 2.0):
        for table in (
            evaluate_cnot_atom_control(params_for(C), pulse),
            evaluate_cnot_light_control(params_for(C), pulse),
        ):
            for r in table.rows:
                assert r.success > r.wrong_port


def test_min_success_monotone_in_cooperativity(pulse):
    Cs = np.geomspace(1, 100, 6)
    atom = [evaluate_cnot_atom_control(params_for(C), pulse).min_success for C in Cs]
    light = [evaluate_cnot_light_control(params_for(C), pulse).min_success for C in Cs]
    assert np.all(np.diff(atom) > 0)
    assert np.all(np.diff(light) > 0)


def test_workers_give_identical_rows(short):
    p = params_for(3.0)
    seq = evaluate_cnot_atom_control(p, short)
    par = evaluate_cnot_atom_control(p, short, workers=2)
    assert seq.records() == par.records()


def test_fredkin_rows_and_backends(short):
    p = params_for(5.0)
    grid = default_grid(p, short, n_steps=1000)
    table = evaluate_fredkin(p, short, grid, cross_check=True)
    assert [r.input for r in table.rows] == [i for i, _ in GateSpec.for_kind("fredkin").rows]
    for r in table.rows:
        if r.input.startswith("g2"):
            assert r.success >= 0.999
    two = table.row("g1,11")
    assert two.method == "timebin"
    assert two.details["cross_check"] == pytest.approx(two.success, abs=1e-3)
    assert two.success + two.loss + two.wrong_port == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(ConfigurationError):
        evaluate_fredkin(p, short, grid, biphoton_backend=None)


def test_asymmetric_params_keep_total_coupling():
    p = params_for(10.0)
    q = asymmetric_params(p, 2.0)
    assert abs(q.g_a) / abs(q.g_b) == pytest.approx(2.0)
    assert abs(q.g_a) ** 2 + abs(q.g_b) ** 2 == pytest.approx(abs(p.g_a) ** 2 + abs(p.g_b) ** 2)
    assert q.g_a.real > 0 and q.g_b.real < 0
    with pytest.raises(InvalidParameterError):
        asymmetric_params(p, 0.0)


def test_asymmetry_sweep_peaks_at_balance(pulse):
    p = params_for(10.0)
    pts = asymmetry_sweep(p, [0.8, 1 / 1.1, 1.0, 1.1, 1.25], pulse)
    s = {round(pt.ratio, 6): pt.success for pt in pts}
    sym = evaluate_cnot_light_control(p, pulse)
    assert s[1.0] == pytest.approx(min(r.success for r in sym.rows if r.input.startswith("B")), abs=1e-12)
    assert s[1.1] < s[1.0]
    assert max(s, key=s.get) == 1.0
    # port exchange maps r to 1/r
    assert s[round(1 / 1.1, 6)] == pytest.approx(s[1.1], abs=1e-6)
    assert s[0.8] == pytest.approx(s[1.25], abs=1e-6)
