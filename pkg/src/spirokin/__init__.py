"""spirokin: kinematics engine for a logarithmic-spiral cable-driven
soft continuum manipulator."""

from .errors import SpirokinError, DomainError, SolverError
from .spiral import (SpiralParams, DesignConstraints, DiscreteProfile,
                     GraspRange, spiral_point, solve_design_parameters,
                     compactness_residual, grasp_range, discretize_profile,
                     revolve_mesh)
from .manipulator import (MaterialConstants, SectionSpec, ManipulatorSpec,
                          JointGeometry, CABLES, build_spec,
                          bending_stiffness, rest_chord, joint_geometry)
from .gravity import (RestState, gravity_moment, solve_rest_shape,
                      rest_configuration, rest_shape, tilt_transform)
from .actuation import (ActuationCommand, JointConfiguration, BackboneShape,
                        BendResult, TwistResult, angle_from_chord,
                        chord_from_angle, bend_portions, total_cable_budget,
                        distribute_bend, forward_shape,
                        forward_shape_from_rotations, apply_twist,
                        passive_cable_lengths, command_configuration,
                        actuate_from_rest)
from .calibration import SlackModel, compensation_factor, adjusted_schedule
from .strategies import (StrategyScript, Keyframe, PlaybackFrame,
                         available_strategies, get_strategy, playback)
from .validation import (Trace, ComparisonReport, load_trace_csv,
                         save_trace_csv, average_traces, transform_trace,
                         rigid_align, compare)

__version__ = "0.1.0"
