"""Link-level simulator for Z3RO and MRT precoding under nonlinear amplifiers."""

__version__ = "0.1.0"

from .analysis import (
    BussgangResult,
    SymbolEnsemble,
    bussgang_analysis,
    bussgang_gain,
    distortion_variance,
    draw_symbols,
    rate,
    received_noiseless,
    sndr,
    to_db,
)
from .channel import (
    ChannelSet,
    UserChannel,
    load_channel_set,
    select_user_channel,
    synth_los_ula,
    synth_rayleigh,
    write_channel_set,
)
from .errors import (
    BoundsError,
    InconsistencyError,
    ParseError,
    SimulationError,
    SingularityError,
    ValidationError,
)
from .experiments import (
    DistortionReport,
    ScenarioConfig,
    angular_pattern,
    ecdf,
    noise_sweep,
    reduction_statistics,
    single_user_scan,
    two_user_scan,
)
from .pa import Ideal, Polynomial3, Rapp, amplify, small_signal_gain
from .precoding import (
    PowerBudget,
    PrecoderKind,
    PrecoderWeights,
    Selection,
    mrt_weights,
    precode_symbols,
    scale_to_backoff,
    z3ro_weights,
)
