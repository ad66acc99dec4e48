"""Automatic page turning for sheet-music images.

The pipeline: detect the systems on each page image
(:mod:`pageflip.layout`), snap and filter raw tracker predictions into
reading order (:mod:`pageflip.filtering`), decide when to turn
(:mod:`pageflip.policy`), and drive a turning device from a session loop
(:mod:`pageflip.session`). :mod:`pageflip.simulate` provides trace replay
and seeded synthetic trackers for deterministic offline evaluation.
"""

__version__ = "0.1.0"

from .device import Ack, MockDevice, SerialDevice, device_from_spec
from .errors import (
    BadConfig,
    DeviceError,
    DeviceIo,
    DeviceTimeout,
    LogMismatch,
    NoInk,
    NonMonotonicTrace,
    PageFlipError,
    ParseError,
)
from .filtering import (
    Accept,
    FilterConfig,
    FilterState,
    Reject,
    RejectReason,
    ReadingPosition,
    TrackerPrediction,
    filter_step,
    position_for_fraction,
    reading_fraction,
    reset_for_page,
    snap_to_system,
)
from .images import load_image, save_layout_overlay
from .layout import (
    LayoutConfig,
    LineBand,
    PageLayout,
    Staff,
    System,
    analyze_page,
    binarize_adaptive_gaussian,
    detect_line_bands,
    group_bands_into_staves,
    group_staves_into_systems,
    row_ink_profile,
    system_x_extent,
    to_grayscale,
)
from .policy import (
    PolicyConfig,
    PolicyState,
    Turn,
    halfway_step,
    policy_step,
    tempo_estimate,
    tempo_step,
)
from .session import (
    PageTurnEvent,
    SessionConfig,
    SessionLog,
    TurnMetrics,
    evaluate_turns,
    run_session,
)
from .simulate import (
    SyntheticConfig,
    load_trace,
    oracle_turn_time,
    save_trace,
    synth_trajectory,
)
