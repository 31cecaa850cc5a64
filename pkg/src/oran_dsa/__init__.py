"""Multi-timescale rApp/xApp dynamic spectrum allocation simulator for O-RAN."""

from oran_dsa.radio import RuConfig, SpectrumGrid, prb_count
from oran_dsa.scenario import ScenarioConfig, load_config
from oran_dsa.sim import RunSummary, SlotRecord, run_scenario

__all__ = [
    "RuConfig",
    "RunSummary",
    "ScenarioConfig",
    "SlotRecord",
    "SpectrumGrid",
    "load_config",
    "prb_count",
    "run_scenario",
]

__version__ = "0.1.0"
