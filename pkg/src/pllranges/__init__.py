"""Nonlinear phase-space analysis of PLL-based loops.

Builds the autonomous (filter state, phase error) model of a loop from a
declarative description and computes its hold-in set, pull-in estimate,
unique lock-in frequency, cycle-slip statistics, and phase-plane artifacts.
"""

from .equilibria import Equilibrium, existence_bound, find_equilibria
from .errors import ConfigError, IntegrationError, RefusalError
from .intervals import Interval, IntervalUnion
from .loopfilter import (FilterRealization, TransferFunction, impulse_response,
                         realize, zero_input_response)
from .model import LoopSpec, LureForm, PllModel, apply_symmetry, build, to_lure
from .nonlinearity import PdCharacteristic, make_pd
from .ranges import (BandResult, LockInResult, PullInReport, StateBox,
                     lock_in_band, lock_in_frequency, pull_in_estimate)
from .sim import (IntegratorConfig, Trajectory, detect_lock, detect_slips,
                  integrate, integrate_batch, pi_lyapunov_series)
from .stability import (char_poly, classified_equilibria, classify,
                        hold_in_frequency, hold_in_set, jacobian,
                        routh_hurwitz, stable_equilibria)

__version__ = "0.1.0"
