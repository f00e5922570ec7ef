import numpy as np
import pytest

from noisetomo.errors import DomainError
from noisetomo.fock import PhotonDistribution, SchemeParams
from noisetomo.povm import PovmModel, ProbeSetting, blocked_prob
from noisetomo.simulator import (
    ExperimentPlan,
    drift_multipliers,
    g2_estimate,
    inject_drift,
    model_probabilities,
    probe_schedule,
    simulate_clicks,
    simulate_thermal_intensities,
)


def ramp(count, top=20.0):
    return [ProbeSetting(i, float(m)) for i, m in enumerate(np.linspace(0, top, count))]


def test_plan_validation(lab, heralded):
    with pytest.raises(DomainError):
        ExperimentPlan(lab, heralded, ramp(3), 0)
    with pytest.raises(DomainError):
        ExperimentPlan(lab, heralded, [], 10)
    with pytest.raises(DomainError):
        ExperimentPlan(lab, heralded, ramp(3), 10, eta_multipliers=[1.0, 1.0])
    with pytest.raises(DomainError):
        ExperimentPlan(lab, heralded, ramp(2), 10, eta_multipliers=[1.0, 7.0])


def test_blind_detector_never_clicks(lab, heralded):
    plan = ExperimentPlan(lab.replace(eta=0.0), heralded, ramp(5), 1000, seed=2)
    assert all(r.no_clicks == r.pulses for r in simulate_clicks(plan))


def test_vacuum_in_vacuum_probe(lab):
    plan = ExperimentPlan(lab, PhotonDistribution.vacuum(2), [ProbeSetting(0, 0.0)], 5000)
    assert model_probabilities(plan)[0] == 1.0
    assert simulate_clicks(plan)[0].no_clicks == 5000


def test_deterministic(lab, heralded):
    plan = ExperimentPlan(lab, heralded, ramp(8), 10**5, seed=11)
    assert simulate_clicks(plan) == simulate_clicks(plan)
    assert simulate_clicks(plan) != simulate_clicks(plan.replace(seed=12))


def test_substreams_independent_of_plan_size(lab, heralded):
    full = simulate_clicks(ExperimentPlan(lab, heralded, ramp(10), 10**5, seed=4))
    part = simulate_clicks(ExperimentPlan(lab, heralded, ramp(10)[:4], 10**5, seed=4))
    assert full[:4] == part


def test_fig1_plan_within_five_sigma(lab, heralded):
    settings = probe_schedule(lab, 150, 200.0, kind="response")
    plan = ExperimentPlan(lab, heralded, settings, 10**7, seed=1)
    p = model_probabilities(plan)
    c = np.array([r.no_clicks for r in simulate_clicks(plan)])
    z = (c - 10**7 * p) / np.sqrt(10**7 * p * (1 - p))
    assert np.mean(np.abs(z) < 5) >= 0.99


def test_residuals_calibrated(lab, heralded):
    settings = ramp(100, top=100.0)
    zs = []
    for seed in range(20):
        plan = ExperimentPlan(lab, heralded, settings, 10**6, seed=seed)
        p = model_probabilities(plan)
        recs = simulate_clicks(plan)
        for counts, prob in (([r.no_clicks for r in recs], p),
                             ([r.blocked_no_clicks for r in recs], blocked_prob(lab, [s.mean for s in settings]))):
            lit = (prob > 0) & (prob < 1)
            c = np.asarray(counts)[lit]
            zs.append((c - 10**6 * prob[lit]) / np.sqrt(10**6 * prob[lit] * (1 - prob[lit])))
    z = np.concatenate(zs)
    assert abs(z.mean()) < 0.1
    assert 0.8 < z.var() < 1.2


def test_g2():
    _, g2 = simulate_thermal_intensities(1.0, 10**5, seed=1)
    assert 1.9 <= g2 <= 2.1
    i, g2 = simulate_thermal_intensities(3.0, 100, thermal=False)
    assert g2 == 1.0 and np.all(i == 3.0)
    assert g2_estimate([1.0, 1.0]) == 1.0
    with pytest.raises(DomainError):
        simulate_thermal_intensities(0.0, 10)
    with pytest.raises(DomainError):
        simulate_thermal_intensities(1.0, 1)


def test_g2_confidence():
    # 10**5 samples land inside [1.9, 2.1] essentially always
    g2 = [simulate_thermal_intensities(2.5, 10**5, seed=s)[1] for s in range(200)]
    assert np.mean((np.array(g2) >= 1.9) & (np.array(g2) <= 2.1)) > 0.99


def test_g2_converges():
    _, g2 = simulate_thermal_intensities(1.0, 4 * 10**6, seed=7)
    assert g2 == pytest.approx(2.0, abs=0.02)


def test_drift_profiles():
    lin = drift_multipliers("linear", 0.15, 600)
    assert lin[0] == 1.0 and lin[-1] == pytest.approx(0.85)
    assert np.all(np.diff(lin) < 0)
    step = drift_multipliers("step", 0.1, 10)
    np.testing.assert_allclose(step[:5], 1.0)
    np.testing.assert_allclose(step[5:], 0.9)
    sine = drift_multipliers("sinusoidal", 0.2, 101)
    assert sine.max() == 1.0 and sine.min() == pytest.approx(0.8)
    with pytest.raises(DomainError):
        drift_multipliers("linear", 0.6, 10)
    with pytest.raises(DomainError):
        drift_multipliers("random", 0.1, 10)


def test_inject_drift(lab, heralded):
    plan = ExperimentPlan(lab, heralded, ramp(600), 100)
    assert inject_drift(plan, "linear", 0.0) is plan
    drifted = inject_drift(plan, "linear", 0.15)
    assert drifted.etas[0] == pytest.approx(0.15)
    assert drifted.etas[-1] == pytest.approx(0.15 * 0.85)
    assert np.all(np.diff(drifted.etas) < 0)


def test_drift_changes_only_eta_in_blocked_counts(lab, heralded):
    plan = inject_drift(ExperimentPlan(lab, heralded, ramp(50), 10**7, seed=9), "linear", 0.15)
    recs = simulate_clicks(plan)
    means = np.array([s.mean for s in plan.settings])
    p = blocked_prob(lab, means, plan.etas)
    c = np.array([r.blocked_no_clicks for r in recs])
    z = (c - 10**7 * p)[1:] / np.sqrt(10**7 * p * (1 - p))[1:]
    assert np.all(np.abs(z) < 5)


@pytest.mark.parametrize("model", list(PovmModel))
def test_response_schedule(lab, model):
    s = probe_schedule(lab, 50, 200.0, kind="response", model=model)
    means = np.array([x.mean for x in s])
    assert means[0] == 0.0 and means[-1] == 200.0
    assert np.all(np.diff(means) > 0)
    assert [x.id for x in s] == list(range(50))


def test_linear_schedule(lab):
    s = probe_schedule(lab, 5, 4.0, start_id=10)
    assert [x.mean for x in s] == [0.0, 1.0, 2.0, 3.0, 4.0]
    assert s[0].id == 10
    with pytest.raises(DomainError):
        probe_schedule(lab, 5, 4.0, kind="zigzag")
