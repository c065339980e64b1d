"""Cognition hierarchy over the forward games.

Players do not share one objective model. The human driver reads the
autonomous vehicles as typical members of their styles; the autonomous side
carries an estimate of the human's weights and simulates the human's view to
predict the human trajectory, then plans against that prediction. This module
builds those game instances, runs the predict/plan pipeline, and checks the
resulting joint profile against the equilibrium notion that tolerates a
bounded human-side gap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .game import make_game, ve_residual
from .netsim import run_distributed
from .scenario import StyleWeights, style_weights_for


def average_weights(scenario):
    """Per-CAV weights as outside observers assume them: typical for the style."""
    return {
        cav.vid: style_weights_for(cav.behavior.kind, cav.style) for cav in scenario.cavs
    }


@dataclass(frozen=True)
class CognitionProfile:
    """How far the autonomous fleet's assumed weights sit from the truth."""

    theta_ave: dict
    epsilon_c: float

    def __post_init__(self):
        if self.epsilon_c < 0:
            raise ValueError("cognitive threshold cannot be negative")


def cognition_profile(scenario):
    ave = average_weights(scenario)
    eps = 0.0
    for cav in scenario.cavs:
        eps = max(eps, float(np.linalg.norm(cav.weights_true.theta - ave[cav.vid].theta)))
    return CognitionProfile(theta_ave=ave, epsilon_c=eps)


@dataclass(frozen=True)
class HneTolerance:
    """Acceptable human-side optimality gap, in cost units."""

    perceptual_threshold: float
    linear_coefficient: float = None

    def __post_init__(self):
        if self.perceptual_threshold <= 0:
            raise ValueError("perceptual threshold must be positive")

    @classmethod
    def from_sweep(cls, sweep, epsilon_c, floor=1e-4):
        """Threshold twice the measured gap growth rate times the cognitive
        threshold, floored so a zero-mismatch family still has a usable bound."""
        eps_p = max(2.0 * sweep.slope * epsilon_c, floor)
        return cls(perceptual_threshold=eps_p, linear_coefficient=sweep.slope)


@dataclass(frozen=True)
class CognitionModel:
    """The autonomous side's working model of the human player."""

    theta_0c: StyleWeights
    s_0c: object
    cav_views: dict
    result: object = None
    trace: object = None


def _as_style_weights(scenario, theta):
    if isinstance(theta, StyleWeights):
        return theta
    return StyleWeights(np.asarray(theta, dtype=float), scenario.theta_min, scenario.theta_max)


def hv_subjective_game(scenario, hv_weights=None, segment=None, references=None,
                       initial_states=None):
    """The game the human believes it is playing: own true weights, typical
    weights for every autonomous opponent."""
    weights = {0: hv_weights or scenario.hv.weights_true}
    weights.update(average_weights(scenario))
    return make_game(scenario, weights, segment=segment, references=references,
                     initial_states=initial_states)


def cav_perceived_hv_game(scenario, theta_0c, segment=None, references=None,
                          initial_states=None):
    """The autonomous side's reconstruction of the human's game, with the
    human weight slot filled by the current estimate."""
    weights = {0: _as_style_weights(scenario, theta_0c)}
    weights.update(average_weights(scenario))
    return make_game(scenario, weights, segment=segment, references=references,
                     initial_states=initial_states)


def predict_hv(scenario, theta_0c, settings=None, segment=None, references=None,
               initial_states=None, transport=run_distributed):
    """Predict the human trajectory by solving the reconstructed game.

    The solve runs over the simulated message layer; the human-side
    subproblem is hosted at the roadside unit.
    """
    game = cav_perceived_hv_game(scenario, theta_0c, segment=segment,
                                 references=references, initial_states=initial_states)
    result, trace = transport(game, settings=settings)
    views = {vid: result.strategies[vid] for vid in game.decision_ids if vid != 0}
    return CognitionModel(
        theta_0c=_as_style_weights(scenario, theta_0c),
        s_0c=result.strategies[0],
        cav_views=views,
        result=result,
        trace=trace,
    )


def plan_cavs(scenario, s_0c, settings=None, segment=None, references=None,
              initial_states=None, transport=run_distributed):
    """Plan the autonomous trajectories against the predicted human strategy.

    The human is frozen data here; the planners use their own true weights.
    Returns the per-CAV strategies with the solve result and session trace.
    """
    weights = {cav.vid: cav.weights_true for cav in scenario.cavs}
    if references is not None:
        references = {vid: references[vid] for vid in weights}
    if initial_states is not None:
        initial_states = {vid: initial_states[vid] for vid in weights}
    game = make_game(scenario, weights, segment=segment, fixed={0: s_0c},
                     references=references, initial_states=initial_states)
    result, trace = transport(game, settings=settings)
    plans = {vid: result.strategies[vid] for vid in game.decision_ids}
    return plans, result, trace


@dataclass(frozen=True)
class HneVerdict:
    """Outcome of checking a profile against the tolerant equilibrium notion."""

    ok: bool
    hv_gap: float
    cav_gaps: dict
    perceptual_threshold: float
    gap_tol: float
    failing: tuple
    max_violation: float


def verify_hne(profile, scenario, eps_p, settings=None, gap_tol=1e-4, segment=None,
               references=None, initial_states=None):
    """Check a complete joint profile against true objectives.

    Autonomous players must be exact best responses up to the solver-quality
    tolerance, relative to their cost scale; the human side passes when its
    gap stays within the perceptual threshold.
    """
    eps_p = eps_p.perceptual_threshold if isinstance(eps_p, HneTolerance) else float(eps_p)
    weights = {0: scenario.hv.weights_true}
    weights.update({cav.vid: cav.weights_true for cav in scenario.cavs})
    game = make_game(scenario, weights, segment=segment, references=references,
                     initial_states=initial_states)
    report = ve_residual(profile, game, settings=settings)
    failing = []
    cav_gaps = {}
    for vid in sorted(report.gaps):
        if vid == 0:
            continue
        cav_gaps[vid] = report.gaps[vid]
        if report.gaps[vid] > gap_tol * (1.0 + abs(report.objectives[vid])):
            failing.append(vid)
    hv_gap = report.gaps[0]
    if hv_gap > eps_p:
        failing.append(0)
    return HneVerdict(
        ok=not failing,
        hv_gap=hv_gap,
        cav_gaps=cav_gaps,
        perceptual_threshold=eps_p,
        gap_tol=gap_tol,
        failing=tuple(sorted(failing)),
        max_violation=report.max_violation,
    )


def interpolated_scenario(scenario, alpha):
    """Scenario whose CAV truths sit a fraction alpha of the way from the
    typical weights to the configured truths. alpha = 0 removes all mismatch."""
    ave = average_weights(scenario)
    overrides = {}
    for cav in scenario.cavs:
        theta = ave[cav.vid].theta + alpha * (cav.weights_true.theta - ave[cav.vid].theta)
        overrides[cav.vid] = StyleWeights(theta, scenario.theta_min, scenario.theta_max)
    return scenario.with_weights(overrides)


@dataclass(frozen=True)
class GapSweep:
    """Measured human-side gap as a function of the cognitive threshold."""

    rows: tuple
    slope: float
    intercept: float

    def monotone(self, tol=0.0):
        gaps = [g for _, g in self.rows]
        return all(b >= a - tol for a, b in zip(gaps, gaps[1:]))


def hne_gap_sweep(scenario, alphas=(0.0, 0.25, 0.5, 0.75, 1.0), settings=None):
    """Run the predict/plan pipeline across a family of shrinking-mismatch
    scenarios and regress the human-side gap against the cognitive threshold.

    The human weight estimate is exact throughout, so the measured gap
    isolates the effect of misreading the autonomous drivers' styles.
    """
    rows = []
    for alpha in sorted(alphas):
        scen = interpolated_scenario(scenario, alpha)
        model = predict_hv(scen, scen.hv.weights_true, settings=settings)
        plans, _, _ = plan_cavs(scen, model.s_0c, settings=settings)
        profile = {0: model.s_0c}
        profile.update(plans)
        verdict = verify_hne(profile, scen, eps_p=float("inf"), settings=settings)
        # The human strategy can undercut the best feasible response when the
        # misread plans squeeze its feasible set, which flips the sign of the
        # raw gap.  Distance from equilibrium is the magnitude either way.
        rows.append((cognition_profile(scen).epsilon_c, abs(verdict.hv_gap)))
    xs = np.array([r[0] for r in rows])
    ys = np.array([r[1] for r in rows])
    slope, intercept = np.polyfit(xs, ys, 1)
    return GapSweep(rows=tuple(rows), slope=float(slope), intercept=float(intercept))
