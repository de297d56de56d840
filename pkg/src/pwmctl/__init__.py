"""pwmctl: quantum optimal control with pulse-width-modulated trains.

Continuous control waveforms are encoded as on/off pulse trains whose
per-interval integrals match the waveform; propagation then draws every
step generator from a finite, cached set of eigendecompositions instead
of running generic matrix exponentials.
"""

from .bench import BenchCase, BenchReport, run_bench
from .devices import DeviceSpec, TargetGate, build_chain, embed_gate, qubit_projector
from .linalg import (
    EigenPair,
    eig_hermitian,
    expm_eig,
    expm_pade,
    frob_dist,
    is_hermitian,
    kron,
)
from .optimize import (
    Objective,
    OptimizationResult,
    OptimizerConfig,
    evaluate_staircase_conversion,
    fidelity,
    gradient_fd,
    objective_for_gate,
    optimize,
    random_train,
)
from .propagate import (
    Control,
    ControlSystem,
    EigenCache,
    JitterConfig,
    JitterResult,
    Segment,
    composition_windows,
    higher_order_segments,
    interval_segments,
    jitter_expectation,
    jitter_monte_carlo,
    propagate_composed,
    propagate_hard_pulse,
    propagate_interval,
    propagate_staircase,
    propagate_state,
    propagate_train,
    reference_oracle,
)
from .pwm import (
    PulseTrain,
    SampledWaveform,
    SineWaveform,
    SpectrumReport,
    amplitude_from_waveform,
    render_samples,
    spectrum_compare,
    staircase_from_train,
    stretch_train,
    switching_instances,
    train_callable,
    train_from_waveforms,
    two_level_durations,
    widths_from_waveform,
)

__version__ = "0.1.0"
