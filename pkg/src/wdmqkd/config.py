"""Run configuration documents (YAML or JSON) with explicit units in every key.

Unknown keys are rejected. Each section maps onto the library's parameter
records; see ``RunConfig`` for the defaults.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from . import rates
from .montecarlo import SimConfig
from .optimizer import ScenarioConfig
from .rates import DetectorParams, SourceParams
from .spectral import WdmGrid, load_profile, pairs_in_span

PositiveFloat = Annotated[float, Field(gt=0, allow_inf_nan=False)]
NonNegFloat = Annotated[float, Field(ge=0, allow_inf_nan=False)]
PositiveInt = Annotated[int, Field(ge=1)]
Probability = Annotated[float, Field(ge=0, le=1)]
ErrorProbability = Annotated[float, Field(ge=0, lt=0.5)]


class ConfigError(ValueError):
    pass


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GridSection(_Section):
    center_frequency_thz: PositiveFloat = 193.4
    spacing_ghz: Union[PositiveFloat, list[PositiveFloat]] = 100.0
    # default: every pair that fits into span_nm
    num_pairs: Optional[PositiveInt] = None
    span_nm: PositiveFloat = 106.0
    fill_factor: Annotated[float, Field(gt=0, le=1)] = 0.75
    half_offset: bool = False

    @property
    def spacings_ghz(self) -> list[float]:
        return list(self.spacing_ghz) if isinstance(self.spacing_ghz, list) else [self.spacing_ghz]


class ProfileSection(_Section):
    # wavelength_nm,efficiency CSV; relative paths resolve against the config file
    csv_path: Optional[str] = None


class SourceSection(_Section):
    spectral_brightness_cps_per_mw_nm: PositiveFloat = rates.DEFAULT_BRIGHTNESS
    pump_power_mw: NonNegFloat = 400.0
    e_pol: ErrorProbability = rates.DEFAULT_E_POL
    lambda0_nm: PositiveFloat = 1550.12


class DetectorSection(_Section):
    jitter_fwhm_ps: PositiveFloat = 38.0
    dark_counts_cps: NonNegFloat = rates.DEFAULT_DARK_COUNTS
    max_count_rate_mhz: PositiveFloat = 200.0
    deadtime_loss_at_max: Annotated[float, Field(ge=0, lt=1)] = rates.DEFAULT_DEADTIME_LOSS
    hard_clamp: bool = False


class LinkSection(_Section):
    loss_db_a: NonNegFloat = 0.0
    loss_db_b: NonNegFloat = 0.0


class SweepSection(_Section):
    min_power_mw: NonNegFloat = 0.0
    max_power_mw: NonNegFloat = 1000.0
    steps: PositiveInt = 50


class SimulationSection(_Section):
    pair_rate_cps: NonNegFloat = 1e6
    eta_a: Probability = 0.25
    eta_b: Probability = 0.25
    jitter_fwhm_per_detector_ps: NonNegFloat = 38.0 / math.sqrt(2.0)
    sigma_c_ps: NonNegFloat = 0.0
    dead_time_ps: NonNegFloat = 0.0
    dark_rate_cps: NonNegFloat = 100.0
    e_pol: ErrorProbability = rates.DEFAULT_E_POL
    duration_s: PositiveFloat = 1.0
    shard_duration_s: PositiveFloat = 1.0
    max_events: PositiveInt = 60_000_000


class ValidationSection(_Section):
    pair_rates_cps: list[PositiveFloat] = [2e5, 5e5, 1e6]
    t_cc_ps: list[PositiveFloat] = [40.0, 200.0, 1000.0]
    sigma_c_ps: list[NonNegFloat] = [0.0, 20.0, 47.0]
    eta_a: Probability = 0.25
    eta_b: Probability = 0.25
    # combined two-detector FWHM; each detector gets 1/sqrt(2) of it
    jitter_fwhm_ps: PositiveFloat = 38.0
    dark_rate_cps: NonNegFloat = 1e5
    e_pol: ErrorProbability = rates.DEFAULT_E_POL
    duration_s: PositiveFloat = 10.0
    n_sigma: PositiveFloat = 3.0
    # negative control: coherence time offset seen by the analytic model only
    model_sigma_c_offset_ps: float = 0.0
    g2_bin_ps: PositiveFloat = 1.0
    g2_span_ps: PositiveFloat = 250.0


class NetworkSection(_Section):
    users: Optional[Annotated[int, Field(ge=2)]] = None


class RunConfig(_Section):
    command: Optional[Literal["rates", "sweep", "validate", "network", "simulate"]] = None
    seed: Annotated[int, Field(ge=0, lt=2**64)] = 0
    grid: GridSection = GridSection()
    profile: ProfileSection = ProfileSection()
    source: SourceSection = SourceSection()
    detectors: DetectorSection = DetectorSection()
    link: LinkSection = LinkSection()
    sweep: SweepSection = SweepSection()
    simulation: SimulationSection = SimulationSection()
    validation: ValidationSection = ValidationSection()
    network: NetworkSection = NetworkSection()

    def digest(self) -> str:
        payload = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def scenarios(self, base_dir: Path | None = None) -> list[ScenarioConfig]:
        """One scenario per configured spacing."""
        profile_path = self.profile.csv_path
        if profile_path is not None and base_dir is not None and not Path(profile_path).is_absolute():
            profile_path = str(base_dir / profile_path)
        profile = load_profile(profile_path)
        src = SourceParams(
            spectral_brightness=self.source.spectral_brightness_cps_per_mw_nm,
            pump_power=self.source.pump_power_mw,
            e_pol=self.source.e_pol,
            lambda0=self.source.lambda0_nm,
        )
        det = DetectorParams(
            jitter_fwhm=self.detectors.jitter_fwhm_ps * 1e-12,
            dark_counts=self.detectors.dark_counts_cps,
            max_count_rate=self.detectors.max_count_rate_mhz * 1e6,
            deadtime_loss_at_max=self.detectors.deadtime_loss_at_max,
            hard_clamp=self.detectors.hard_clamp,
        )
        out = []
        for spacing_ghz in self.grid.spacings_ghz:
            spacing = spacing_ghz * 1e9
            n = self.grid.num_pairs or pairs_in_span(spacing, self.grid.span_nm, self.source.lambda0_nm)
            if n < 1:
                raise ConfigError(f"grid.spacing_ghz: {spacing_ghz} GHz leaves no channel pair in grid.span_nm")
            grid = WdmGrid(
                center_frequency=self.grid.center_frequency_thz * 1e12,
                spacing=spacing,
                fill_factor=self.grid.fill_factor,
                num_pairs=n,
                half_offset=self.grid.half_offset,
            )
            out.append(
                ScenarioConfig(
                    grid=grid,
                    profile=profile,
                    source=src,
                    detectors=det,
                    link_loss_db_a=self.link.loss_db_a,
                    link_loss_db_b=self.link.loss_db_b,
                    power_sweep=(self.sweep.min_power_mw, self.sweep.max_power_mw, self.sweep.steps),
                )
            )
        return out

    def sim_config(self) -> SimConfig:
        s = self.simulation
        return SimConfig(
            pair_rate=s.pair_rate_cps,
            eta_a=s.eta_a,
            eta_b=s.eta_b,
            jitter_fwhm_per_detector=s.jitter_fwhm_per_detector_ps * 1e-12,
            sigma_c=s.sigma_c_ps * 1e-12,
            dead_time=s.dead_time_ps * 1e-12,
            dark_rate=s.dark_rate_cps,
            e_pol=s.e_pol,
            duration=s.duration_s,
            seed=self.seed,
            shard_duration=s.shard_duration_s,
            max_events=s.max_events,
        )

    def validation_base(self) -> SimConfig:
        v = self.validation
        return SimConfig(
            pair_rate=v.pair_rates_cps[0],
            eta_a=v.eta_a,
            eta_b=v.eta_b,
            jitter_fwhm_per_detector=v.jitter_fwhm_ps * 1e-12 / math.sqrt(2.0),
            dark_rate=v.dark_rate_cps,
            e_pol=v.e_pol,
            duration=v.duration_s,
            seed=self.seed,
            max_events=self.simulation.max_events,
        )


def _format_errors(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        path = ".".join(str(p) for p in e["loc"]) or "<root>"
        lines.append(f"{path}: {e['msg']}")
    return "\n".join(lines)


def parse_config(data: dict | None, **overrides) -> RunConfig:
    """Validate a config mapping; ``overrides`` replace top-level keys."""
    data = dict(data or {})
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return RunConfig.model_validate(data)
    except ValidationError as err:
        raise ConfigError(_format_errors(err)) from None


def load_config(path: str | Path | None, **overrides) -> RunConfig:
    if path is None:
        return parse_config({}, **overrides)
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as err:
        raise ConfigError(f"{path}: not a valid YAML/JSON document ({err})") from None
    if data is not None and not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return parse_config(data, **overrides)
