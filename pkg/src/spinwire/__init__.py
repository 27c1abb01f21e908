"""spinwire: boundary-driven magnetic solitons on a classical ferromagnetic
spin chain, and the remote control of a qubit coupled to it."""

from .chain import (ChainParams, PhysicalUnits, SpinConfig, chain_energy,
                    ground_state, to_physical_units)
from .dynamics import (DriveProtocol, EnergyLedger, Trajectory, integrate_step,
                       make_drive, run_injection, run_injection_batch, NO_DRIVE)
from .errors import ConfigError, DetectionError, NumericalError, SpinwireError
from .qubit import (AnalyticSolitonField, AsymptoticState, BlochState,
                    BlochTrajectory, CouplingProfile, QubitParams,
                    backaction_ratio, evolve_qubit, extract_asymptotics,
                    smeared_field)
from .soliton import SolitonScales, SolitonSpec, tw_profile, tw_scales, tw_sz
from .thermal import (ThermalDiagnostics, ThermalSpec, sample_thermal,
                      sample_thermal_ensemble, thermal_diagnostics)
from .tracker import TrackResult, estimate_beta_eff, track_core
from .trajectory_io import (load_trajectory, save_trajectory, write_density_csv,
                            write_density_svg)

__version__ = "0.1.0"
