"""Reactive task and motion planning stack for template-based dynamic legged locomotion.

Layers, from top to bottom:

* ``task_game``   -- two-player contact-decision game and its winning-strategy automaton.
* ``phase_plan``  -- nominal one-walking-step phase-space planning between keyframes.
* ``rfts``        -- robustness margin sets and the keyframe-level robust transition system.
* ``abstraction`` -- uniform-grid inter-sampling abstraction with disturbance inflation.
* ``reach_synth`` -- backward reachability controller synthesis and the policy store.
* ``executor``    -- closed-loop execution with mid-step policy switching and replanning.
* ``harness``     -- scenarios, Monte-Carlo experiments, CLI, and the session service.
"""

from locoplan.templates import (
    ComState,
    Keyframe,
    ModeKind,
    RiemCoord,
    TemplateParams,
)

__all__ = [
    "ComState",
    "Keyframe",
    "ModeKind",
    "RiemCoord",
    "TemplateParams",
]

__version__ = "0.1.0"
