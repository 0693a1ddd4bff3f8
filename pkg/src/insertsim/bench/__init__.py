from insertsim.bench.scenario import (
    ArmErrorConfig,
    ScenarioConfig,
    Strategy,
    build_needle_scenario,
    build_usb_scenario,
    load_scenario,
    scenario_from_dict,
    scenario_to_dict,
)
from insertsim.bench.runner import ExperimentReport, TrialRecord, replay_trial, run_experiment, run_trial
from insertsim.bench.reference import make_reference_cloud

__all__ = [
    "ArmErrorConfig",
    "ScenarioConfig",
    "Strategy",
    "build_needle_scenario",
    "build_usb_scenario",
    "load_scenario",
    "scenario_from_dict",
    "scenario_to_dict",
    "ExperimentReport",
    "TrialRecord",
    "replay_trial",
    "run_experiment",
    "run_trial",
    "make_reference_cloud",
]
