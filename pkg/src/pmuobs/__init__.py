"""Multi-machine power-system transient simulation with PMU measurement
synthesis and decentralized observers for generator internal states.

The package has three layers:

* ``params`` / ``model`` / ``network`` / ``simulator`` — the synthetic
  truth: flux-decay machines with AVR/PSS excitation control coupled
  through a Kron-reduced network, integrated with fixed-step RK4, sampled
  by a 60 Hz PMU model with configurable noise.
* ``observers`` — the estimation stack that consumes only the PMU stream:
  instantaneous algebraic recovery of load angle and internal voltage,
  online identification of the mechanical parameters through regressor
  extension and mixing, and an immersion-and-invariance speed observer.
* ``metrics`` / ``cli`` — scoring (sMAPE tables, decay-rate fits) and the
  batch runner that ties a scenario config to CSV artifacts on disk.
"""

from pmuobs.params import GeneratorParams, RawGeneratorParams, derive_coefficients
from pmuobs.model import MachineState, PmuSample, TerminalSignals

__version__ = "0.1.0"

__all__ = [
    "GeneratorParams",
    "RawGeneratorParams",
    "derive_coefficients",
    "MachineState",
    "PmuSample",
    "TerminalSignals",
    "__version__",
]
