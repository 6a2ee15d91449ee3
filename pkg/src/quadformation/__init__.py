"""Leader-follower formation tracking for quadrotors.

A local feedback-linearizing tracking controller per vehicle, distributed
observers that provide each vehicle's virtual reference, a joint RK4
simulator, and numerical monitors for the closed-loop guarantees.
"""

from .controller import (
    AttitudeSingularity,
    ControllerGains,
    ErrorChain,
    ThrustDegenerate,
    TrackingRef,
    attitude_control,
    compute_control,
    error_chain,
    outer_control,
    steady_state_attitude,
    thrust_control,
    yaw_control,
)
from .graph import CommGraph, h_matrix, laplacian, min_eigenvalue, validate_graph
from .leader import circle_leader, fixed_leader, poly_leader, sigma_bounds
from .observer import ObserverGains, validate_observer_gains
from .plant import GRAVITY, ControlInput, QuadState, state_derivative
from .scenario import Scenario, ScenarioError, preset, validate_scenario
from .simulation import SimulationError, Trace, monitors, run, step

__version__ = "0.1.0"
