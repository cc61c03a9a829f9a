"""Experiment drivers run as Prefect flows from the command line."""

from pipelines.assimilate import assimilate_flow, run_assimilation
from pipelines.context import RunContext, build_context
from pipelines.ensemble import ensemble_flow
from pipelines.manifest import RunManifest, build_manifest, write_manifest
from pipelines.params import ParamsResult, params_advice
from pipelines.simulate import EnergySeries, run_simulation, simulate_flow
from pipelines.verify import VerifyReport, run_suites, verify_flow

__all__ = [
    "EnergySeries",
    "ParamsResult",
    "RunContext",
    "RunManifest",
    "VerifyReport",
    "assimilate_flow",
    "build_context",
    "build_manifest",
    "ensemble_flow",
    "params_advice",
    "run_assimilation",
    "run_simulation",
    "run_suites",
    "simulate_flow",
    "verify_flow",
    "write_manifest",
]
