from __future__ import annotations

import numpy as np
import pytest

from tooldesign.evaluation import (
    PerturbationSpec, comparative_study, evaluate_robustness, robustness_metrics, sample_goals,
)
from tooldesign.geometry import ToolParams
from tooldesign.optimizers import OptimizerConfig
from tooldesign.sim import WorldConfig, default_plan

STRAIGHT = ToolParams((0.0, 0.0, 0.0))
HOOKED = ToolParams((1.8, 3.0, 4.9))


def test_empty_mass_list_gives_zero_metrics():
    rep = evaluate_robustness(STRAIGHT, default_plan(), WorldConfig(), PerturbationSpec(perturbed_masses=()))
    assert (rep.robustness, rep.accuracy, rep.control_deviation) == (0.0, 0.0, 0.0)
    assert rep.per_mass == []


def test_nominal_mass_gives_zero_deviation():
    rep = evaluate_robustness(HOOKED, default_plan(), WorldConfig(),
                              PerturbationSpec(nominal_mass=0.1, perturbed_masses=(0.1,)))
    assert rep.robustness == 0.0
    assert rep.control_deviation == 0.0
    assert rep.accuracy < 0.0


def test_metric_signs_and_per_mass_totals():
    rep = evaluate_robustness(HOOKED, default_plan(), WorldConfig())
    assert rep.robustness <= 0.0 and rep.accuracy <= 0.0 and rep.control_deviation >= 0.0
    assert [p["mass"] for p in rep.per_mass] == [0.3, 0.5, 0.7, 0.9]
    assert rep.robustness == pytest.approx(sum(p["robustness"] for p in rep.per_mass), rel=1e-15)
    lengths = {len(r) for r in rep.rollouts.values()}
    assert len(lengths) == 1


def test_metrics_match_hand_computation():
    rep = evaluate_robustness(STRAIGHT, default_plan(), WorldConfig(), PerturbationSpec(perturbed_masses=(0.5,)))
    nom, per = rep.rollouts[0.1], rep.rollouts[0.5]
    goal = np.array(WorldConfig().goal)
    assert rep.robustness == -np.sum(np.sqrt(np.sum((per.X - nom.X) ** 2, axis=1)))
    assert rep.accuracy == pytest.approx(-np.sum(np.hypot(*(per.X - goal).T)), rel=1e-12)
    assert rep.control_deviation == pytest.approx(np.sum(np.linalg.norm(per.U - nom.U, axis=1)), rel=1e-12)
    sq = robustness_metrics(nom, [per], goal, "squared")
    assert sq.accuracy == pytest.approx(-np.sum(np.sum((per.X - goal) ** 2, axis=1)), rel=1e-12)


def test_accuracy_invariant_to_mass_order():
    a = evaluate_robustness(HOOKED, default_plan(), WorldConfig(), PerturbationSpec(perturbed_masses=(0.3, 0.9, 0.5)))
    b = evaluate_robustness(HOOKED, default_plan(), WorldConfig(), PerturbationSpec(perturbed_masses=(0.9, 0.5, 0.3)))
    assert a.accuracy == pytest.approx(b.accuracy, rel=1e-12)
    assert a.robustness == pytest.approx(b.robustness, rel=1e-12)


@pytest.mark.parametrize("tool", [STRAIGHT, HOOKED])
@pytest.mark.parametrize("mass", [0.3, 0.5, 0.7, 0.9])
def test_metrics_continuous_in_mass(tool, mass):
    spec = PerturbationSpec(perturbed_masses=(mass,))
    spec_eps = PerturbationSpec(perturbed_masses=(mass + 1e-4,))
    a = evaluate_robustness(tool, default_plan(), WorldConfig(), spec)
    b = evaluate_robustness(tool, default_plan(), WorldConfig(), spec_eps)
    for key in ("robustness", "accuracy", "control_deviation"):
        scale = max(abs(getattr(a, key)), 1e-9)
        assert abs(getattr(a, key) - getattr(b, key)) < 0.01 * scale, key


def test_spec_validation():
    with pytest.raises(ValueError):
        PerturbationSpec(nominal_mass=0.0)
    with pytest.raises(ValueError):
        PerturbationSpec(perturbed_masses=(0.3, -0.1))
    with pytest.raises(ValueError):
        PerturbationSpec(accuracy_mode="abs")
    s = PerturbationSpec(perturbed_masses=(0.2,))
    assert PerturbationSpec.from_dict(s.to_dict()) == s


def test_sample_goals_in_range_and_seeded():
    goals = sample_goals(50, 3)
    assert goals == sample_goals(50, 3)
    xs, ys = np.array(goals).T
    assert xs.min() >= -0.5 and xs.max() <= 0.5
    assert ys.min() >= 0.5 and ys.max() <= 1.5


def test_study_single_cell_matches_report():
    opt = OptimizerConfig(population=4, iterations=2)
    out = comparative_study([(0.1, 1.2)], {"free_energy": 20.0}, 1, default_plan(), WorldConfig(), opt)
    assert len(out["cells"]) == 1 and len(out["table"]) == 1
    cell, row = out["cells"][0], out["table"][0]
    assert row["n"] == 1
    for key in ("robustness", "accuracy", "control_deviation"):
        assert row[key] == cell[key]
    rep = evaluate_robustness(ToolParams(tuple(cell["coeffs"])), default_plan(),
                              WorldConfig(goal=(0.1, 1.2)))
    assert rep.robustness == cell["robustness"]
    assert rep.accuracy == cell["accuracy"]
