"""Framework-agnostic quantum neural network toolkit.

A small circuit IR with a statevector simulator, data encoders, gradient
strategies, a basis/coupling-aware transpiler, a mock hardware layer and a
portable model bundle format.
"""
from .circuit import (BasisProjector, Bound, CircuitDag, CircuitError, GateKind, GateOp,
                      MeasurementSpec, ParameterStore, PauliSum, Symbol, bind, counts, gate,
                      interaction_graph, parse_observable, pauli, sum_z, z_on)
from .encoders import (EncodingConfig, EncodingError, amplitude_encode, angle_encode,
                       dense_angle_encode, encode, iqp_encode, truncate_amplitudes,
                       verify_encoding_equivalence)
from .export import (ModelBundle, ExportError, export_bundle, export_dialect, export_qasm,
                     import_bundle, import_dialect, parse_qasm, roundtrip_fidelity)
from .gradients import (ShotExecutor, Strategy, adjoint_gradient, finite_diff, gradient,
                        noise_budget, param_shift)
from .hal import (Calibration, ExecutionManager, JobRequest, JobStatus, ScoreWeights,
                  load_registry, score, select_best)
from .simulator import NoiseModel, StateVector, evolve, expectation, noisy_expectation, sample, unitary_of
from .training import QuantumLayer, TrainConfig, load_iris, load_wine, train
from .transpiler import BUILTIN_PROFILES, TargetProfile, TranspileError, transpile, verify

__version__ = "0.1.0"
