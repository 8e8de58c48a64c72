"""Discrete-event VANET simulator for AOMDV and its speed/direction/stop_times metric variants."""

from .config import ScenarioConfig
from .simulation import ScenarioRun, ScriptedNetwork, run_once
from .traffic import RunReport

__version__ = "0.1.0"

__all__ = ["RunReport", "ScenarioConfig", "ScenarioRun", "ScriptedNetwork", "run_once"]
