import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

# Default data directory is '_data' in the project root
DEFAULT_DATA_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.dirname(__file__))), "_data")

# Environment variable that can override the default data directory
ENV_DATA_DIR = "RTXP_SIM_DATA_DIR"

# Run defaults, overridable with environment variables (or a .env file)
DEFAULT_SEED = int(os.environ.get("RTXP_SIM_SEED", "1"))
DEFAULT_WORKERS = int(os.environ.get("RTXP_SIM_WORKERS", "1"))
LOG_LEVEL = os.environ.get("RTXP_SIM_LOG_LEVEL", "INFO")
DEFAULT_DUTY_CYCLE = float(os.environ.get("RTXP_SIM_DUTY_CYCLE", "0.01"))  # 1%


class ConfigError(ValueError):
    """Raised when a parameter set cannot describe a valid simulation."""


def get_data_dir():
    """Get the data directory from environment variable or use default."""
    return os.environ.get(ENV_DATA_DIR, DEFAULT_DATA_DIR)


# Create data directory if it doesn't exist
def ensure_data_dir():
    """Ensure the data directory exists."""
    data_dir = get_data_dir()
    Path(data_dir).mkdir(parents=True, exist_ok=True)
    return data_dir


def _require_positive(**values):
    for name, value in values.items():
        if value <= 0:
            raise ConfigError(f"{name} must be positive, got {value}")


@dataclass(frozen=True)
class RadioParams:
    """Half-duplex mono-channel transceiver profile."""

    bitrate_bps: int = 500_000
    radio_range: float = 10.0
    path_loss_exponent: float = 2.0
    shadowing_sigma_db: float = 4.0
    reference_distance: float = 1.0
    tx_power_dbm: float = 0.0
    jamming_us: int = 200
    packet_bytes: int = 100
    tx_mw: float = 60.0
    rx_mw: float = 60.0
    listen_mw: float = 60.0
    sleep_mw: float = 0.003

    def __post_init__(self):
        _require_positive(
            bitrate_bps=self.bitrate_bps,
            radio_range=self.radio_range,
            path_loss_exponent=self.path_loss_exponent,
            reference_distance=self.reference_distance,
            jamming_us=self.jamming_us,
            packet_bytes=self.packet_bytes,
            tx_mw=self.tx_mw,
            rx_mw=self.rx_mw,
            listen_mw=self.listen_mw,
            sleep_mw=self.sleep_mw,
        )
        if self.shadowing_sigma_db < 0:
            raise ConfigError("shadowing_sigma_db must be non-negative")
        if self.sleep_mw >= self.listen_mw:
            raise ConfigError("sleep_mw must be well below listen_mw")

    @property
    def data_us(self) -> int:
        """Airtime of one data packet."""
        return self.packet_bytes * 8 * 1_000_000 // self.bitrate_bps


@dataclass(frozen=True)
class RtxpConfig:
    """
    Timing of the rtxp duty cycle.

    All durations are integer microseconds; the derived properties follow the
    closed-form relations between backoff, awake, sleep and activity periods.
    """

    jamming_us: int = 200
    max_backoff_us: int = 10_000
    backoff_slot_us: int = 200
    data_us: int = 1_600
    duty_cycle: float = DEFAULT_DUTY_CYCLE
    max_retx_per_cycle: int = 5

    def __post_init__(self):
        if not 0 < self.duty_cycle <= 1:
            raise ConfigError(f"duty cycle must lie in (0, 1], got {self.duty_cycle}")
        _require_positive(
            jamming_us=self.jamming_us,
            max_backoff_us=self.max_backoff_us,
            backoff_slot_us=self.backoff_slot_us,
            data_us=self.data_us,
        )
        if self.max_retx_per_cycle < 0:
            raise ConfigError("max_retx_per_cycle must be non-negative")

    @property
    def d_b(self) -> int:
        return self.max_backoff_us + self.jamming_us

    @property
    def d_bf(self) -> int:
        return self.max_backoff_us + self.jamming_us

    @property
    def d_r(self) -> int:
        return self.data_us

    @property
    def d_l(self) -> int:
        return self.jamming_us

    @property
    def d_awake(self) -> int:
        return self.d_b + self.d_bf + 2 * self.d_r + self.d_l

    @property
    def d_sleep(self) -> int:
        return round(self.d_awake * (1 / self.duty_cycle - 1))

    @property
    def sub_period(self) -> int:
        """One awake period: B, R and BF back to back."""
        return self.d_b + self.d_r + self.d_bf

    @property
    def d_activity(self) -> int:
        return 3 * self.sub_period + self.d_l

    @property
    def cycle_us(self) -> int:
        return self.d_activity + self.d_sleep

    @property
    def capacity(self) -> int:
        return self.cycle_us // self.d_activity

    def wctt_us(self, nb_hop_max: int) -> int:
        return (nb_hop_max + 1) * self.cycle_us


@dataclass(frozen=True)
class XmacConfig:
    """Short-preamble low power listening with gradient forwarding."""

    cycle_period_us: Optional[int] = None  # None: one third of the rtxp cycle
    strobe_us: int = 500
    response_us: int = 500
    listen_window_us: int = 2_000
    cca_us: int = 200
    ack_us: int = 500
    max_retries: int = 5
    backoff_slot_us: int = 200
    cw_min_slots: int = 32
    max_doublings: int = 3

    def __post_init__(self):
        _require_positive(
            strobe_us=self.strobe_us,
            response_us=self.response_us,
            listen_window_us=self.listen_window_us,
            cca_us=self.cca_us,
            ack_us=self.ack_us,
            backoff_slot_us=self.backoff_slot_us,
            cw_min_slots=self.cw_min_slots,
        )
        if self.cycle_period_us is not None and self.cycle_period_us <= 0:
            raise ConfigError("cycle_period_us must be positive")
        if self.max_retries < 0:
            raise ConfigError("max_retries must be non-negative")
        if self.max_doublings < 0:
            raise ConfigError("max_doublings must be non-negative")

    @property
    def strobe_period_us(self) -> int:
        return self.strobe_us + self.response_us

    def resolve_cycle(self, rtxp: RtxpConfig) -> int:
        return self.cycle_period_us or rtxp.cycle_us // 3


@dataclass(frozen=True)
class PedamacsConfig:
    """Idealized TDMA convergecast."""

    t_slot_us: int = 2_000
    guard_us: int = 400
    frame_alignment_us: int = 1_000_000
    # also keep same-slot senders two hops away from every receiver
    guard_receivers: bool = False

    def __post_init__(self):
        _require_positive(
            t_slot_us=self.t_slot_us,
            guard_us=self.guard_us,
            frame_alignment_us=self.frame_alignment_us,
        )
        if self.guard_us >= self.t_slot_us:
            raise ConfigError("guard_us must be shorter than the slot")

    def wctt_us(self, node_count: int) -> int:
        return 3 * (node_count - 1) * self.t_slot_us


@dataclass(frozen=True)
class ProtocolSettings:
    """Every parameter set a run needs, resolved."""

    radio: RadioParams = RadioParams()
    rtxp: RtxpConfig = RtxpConfig()
    xmac: XmacConfig = XmacConfig()
    pedamacs: PedamacsConfig = PedamacsConfig()
