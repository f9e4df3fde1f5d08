"""Secure-key-rate engine for wavelength-multiplexed entangled-photon QKD.

Modules: ``spectral`` (efficiency profile and ITU channel pairs), ``rates``
(analytic coincidence and key-rate kernels), ``optimizer`` (window and pump
power optimization), ``montecarlo`` (time-tag simulation), ``validation``
(simulation against the analytic kernels), ``network`` (fully connected
multi-user plans) and ``cli``.
"""

__version__ = "0.1.0"

from .network import (  # noqa: E402
    NetworkPlan,
    assign_channels,
    max_fully_connected_users,
    point_to_point_users,
)
from .optimizer import (  # noqa: E402
    ScenarioConfig,
    SweepResult,
    apply_detector_cap,
    apply_link_loss_approx,
    optimize_power,
    optimize_window,
    standard_scenario,
    sweep_power,
    total_key_rate,
)
from .rates import (  # noqa: E402
    ChannelRates,
    DetectorParams,
    SourceParams,
    binary_entropy,
    channel_key_rate,
    total_qber,
)
from .spectral import (  # noqa: E402
    ChannelPair,
    SpectralProfile,
    WdmGrid,
    build_grid,
    default_profile,
    effective_efficiency,
)
