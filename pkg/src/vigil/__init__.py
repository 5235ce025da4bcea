"""Real-time group-vigilance monitoring, graduated operator alerting, and
mission replay for wildlife drone operations."""

from .alerting import (
    AlertEvent,
    AlertEventKind,
    AlertMachine,
    AlertState,
    OrderingError,
    reset_alert,
    step_alert,
)
from .core import (
    AlertLevel,
    BehaviorLabel,
    BoundingBox,
    FrameObservation,
    IndividualObservation,
    VigilanceConfig,
    VigilanceSample,
    compute_vigilance,
    default_weights,
    filter_confident,
    instantaneous_level,
)
from .metrics import (
    ComparisonReport,
    InterventionAccounting,
    MetricsReport,
    adverse_duration,
    build_metrics_report,
    comparison_report,
    usable_frames,
    usable_frames_counterfactual,
    warning_window,
)
from .pipeline import (
    BackendCapabilities,
    BackendError,
    BackendMode,
    FrameHandle,
    InferenceBackend,
    LatencyRecord,
    PipelineStats,
    ProcessedFrame,
    SamplingMode,
    SamplingPolicy,
    SkippedFrame,
    SkipReason,
    SocketBackend,
    TraceBackend,
    VirtualClock,
    WallClock,
    adaptive_stride,
    run_pipeline,
    trace_frame_source,
)
from .replay import (
    AS_FAST_AS_POSSIBLE,
    GeneratorParams,
    InterventionModel,
    PhaseKind,
    PhaseSpec,
    ReplayResult,
    batch_scores,
    generate_synthetic_trace,
    replay_clock,
    replay_mission,
)
from .trace_io import (
    CollectionMode,
    Diagnostic,
    EventKind,
    GroundTruthEvent,
    MissionMetadata,
    MissionTrace,
    TraceError,
    TraceInvariantError,
    TraceOrderingError,
    TraceSchemaError,
    parse_trace,
    validate_trace,
    write_trace,
)

__version__ = "0.1.0"
