"""Experiment configuration read from INI files.

Sections are ``[experiment] [dag] [vc] [channel] [rfid] [mga]``. Every key is
optional; see ``DEFAULTS`` for the values used when a key is missing.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field

from ..channel import ChannelParams
from ..dag import DagGenParams
from ..baselines import MGAScheduler
from ..errors import ConfigError, InfeasibleLayering
from ..mobility import ContactModel, TraceParams
from ..rfid import CTI_MODES, RFIDScheduler

AXES = ("n_subtasks", "n_vehicles", "n_layers", "ccr")
SCHEDULER_NAMES = ("rfid", "heft", "la", "mga")

DEFAULTS = {
    "experiment": {
        "axis": "n_subtasks",
        "values": "15,20,25,30,35,40,45,50,55,60,65,70",
        "trials": "200",
        "schedulers": "rfid,heft,la,mga",
        "base_seed": "0",
        "timing": "true",
        "trace_csv": "",
        "vehicles_csv": "",
    },
    "dag": {
        "n_subtasks": "35",
        "n_layers": "10",
        "ccr": "1.0",
        "workload_mean": "3e6",
        "workload_var": "0.2",
        "data_mean": "1.2e6",
        "data_var": "0.2",
        "max_preds": "3",
    },
    "vc": {
        "n_vehicles": "30",
        "region_x": "1000",
        "region_y": "1000",
        "speed_min": "5",
        "speed_max": "20",
        "horizon": "120",
        "sample_dt": "0.5",
        "cpu_mean": "20e6",
        "cpu_var": "0.2",
        "antenna_m": "1.5",
        "arrival_rate": "0.15",
        "departure_rate": "0.005",
        "contact_mode": "kinematic",
        "mu_const": "0.1",
        "mu_floor": "1e-3",
    },
    "channel": {
        "l_b_db": "20",
        "pl_d0_db": "46.4",
        "eta2": "4",
        "delta": "0.05",
        "wavelength_m": "0.0508",
        "gamma_a": "0.15",
        "gamma_b": "0.001",
        "gamma_scale": repr(1.0 / 60.0),
        "radius_m": "500",
        "theta": "0.9",
    },
    "rfid": {"alpha_t": "1.0", "alpha_r": "1.0", "phi_scale": "0.5", "cti_sign_mode": "absolute"},
    "mga": {"population": "50", "generations": "100", "crossover_rate": "0.8", "mutation_rate": "0.1", "elite": "2"},
}


@dataclass
class ExperimentConfig:
    axis: str = "n_subtasks"
    values: list = field(default_factory=lambda: [15, 20, 25, 30, 35, 40, 45, 50, 55, 60, 65, 70])
    trials: int = 200
    schedulers: list = field(default_factory=lambda: list(SCHEDULER_NAMES))
    base_seed: int = 0
    timing: bool = True
    trace_csv: str = ""
    vehicles_csv: str = ""
    dag: DagGenParams = field(default_factory=DagGenParams)
    vc: TraceParams = field(default_factory=TraceParams)
    contact: ContactModel = field(default_factory=ContactModel)
    channel: ChannelParams = field(default_factory=ChannelParams)
    rfid: dict = field(default_factory=lambda: {"alpha_t": 1.0, "alpha_r": 1.0, "phi_scale": 0.5, "cti_sign_mode": "absolute"})
    mga: dict = field(
        default_factory=lambda: {"population": 50, "generations": 100, "crossover_rate": 0.8, "mutation_rate": 0.1, "elite": 2}
    )

    def check(self):
        if self.axis not in AXES:
            raise ConfigError(f"axis must be one of {', '.join(AXES)}, got {self.axis!r}")
        if not self.values:
            raise ConfigError("axis values must not be empty")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if not self.schedulers:
            raise ConfigError("schedulers must not be empty")
        bad = [s for s in self.schedulers if s not in SCHEDULER_NAMES]
        if bad:
            raise ConfigError(f"unknown schedulers: {', '.join(bad)}")
        if len(set(self.schedulers)) != len(self.schedulers):
            raise ConfigError("schedulers listed twice")
        if self.rfid["cti_sign_mode"] not in CTI_MODES:
            raise ConfigError(f"rfid.cti_sign_mode must be one of {CTI_MODES}")
        for v in self.values:
            try:
                self.dag_params(v).check()
                self.trace_params(v).check()
            except (ValueError, InfeasibleLayering) as exc:
                raise ConfigError(f"{self.axis}={v}: {exc}") from None
        try:
            RFIDScheduler(**self.rfid)._check_params()
            MGAScheduler(**self.mga)._check_params()
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        return self

    def dag_params(self, value) -> DagGenParams:
        if self.axis in ("n_subtasks", "n_layers", "ccr"):
            return dataclasses.replace(self.dag, **{self.axis: value})
        return self.dag

    def trace_params(self, value) -> TraceParams:
        if self.axis == "n_vehicles":
            return dataclasses.replace(self.vc, n_vehicles=value)
        return self.vc

    def cell(self, value) -> dict:
        """The four instance-shape numbers recorded in every results row."""
        d = self.dag_params(value)
        return {
            "n_subtasks": d.n_subtasks,
            "n_vehicles": self.trace_params(value).n_vehicles,
            "n_layers": d.n_layers,
            "ccr": d.ccr,
        }


def _get(cp, section, key, conv):
    raw = cp.get(section, key, fallback=DEFAULTS[section][key]).strip()
    try:
        return conv(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r}") from None


def _bool(text):
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(text)


def _list(text):
    return [p.strip() for p in text.split(",") if p.strip()]


def parse_config(text: str, source="<string>") -> ExperimentConfig:
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    for section in cp.sections():
        if section not in DEFAULTS:
            raise ConfigError(f"unknown section [{section}]")
        unknown = set(cp[section]) - set(DEFAULTS[section])
        if unknown:
            raise ConfigError(f"[{section}] unknown keys: {', '.join(sorted(unknown))}")

    axis = _get(cp, "experiment", "axis", str)
    num = float if axis == "ccr" else int
    values = _get(cp, "experiment", "values", lambda s: [num(v) for v in _list(s)])
    g = lambda sec, key, conv=float: _get(cp, sec, key, conv)  # noqa: E731

    try:
        dag = DagGenParams(
            n_subtasks=g("dag", "n_subtasks", int),
            n_layers=g("dag", "n_layers", int),
            ccr=g("dag", "ccr"),
            workload_mean=g("dag", "workload_mean"),
            workload_var=g("dag", "workload_var"),
            data_mean=g("dag", "data_mean"),
            data_var=g("dag", "data_var"),
            max_preds=g("dag", "max_preds", int),
        )
        vc = TraceParams(
            n_vehicles=g("vc", "n_vehicles", int),
            region=(g("vc", "region_x"), g("vc", "region_y")),
            speed_min=g("vc", "speed_min"),
            speed_max=g("vc", "speed_max"),
            horizon=g("vc", "horizon"),
            sample_dt=g("vc", "sample_dt"),
            cpu_mean=g("vc", "cpu_mean"),
            cpu_var=g("vc", "cpu_var"),
            antenna_m=g("vc", "antenna_m"),
            arrival_rate=g("vc", "arrival_rate"),
            departure_rate=g("vc", "departure_rate"),
        )
        contact = ContactModel(
            mode=g("vc", "contact_mode", str), mu_const=g("vc", "mu_const"), mu_floor=g("vc", "mu_floor")
        )
        channel = ChannelParams(
            l_b_db=g("channel", "l_b_db"),
            pl_d0_db=g("channel", "pl_d0_db"),
            eta2=g("channel", "eta2"),
            delta=g("channel", "delta"),
            wavelength_m=g("channel", "wavelength_m"),
            gamma_a=g("channel", "gamma_a"),
            gamma_b=g("channel", "gamma_b"),
            gamma_scale=g("channel", "gamma_scale"),
            radius_m=g("channel", "radius_m"),
            theta=g("channel", "theta"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    cfg = ExperimentConfig(
        axis=axis,
        values=values,
        trials=g("experiment", "trials", int),
        schedulers=g("experiment", "schedulers", _list),
        base_seed=g("experiment", "base_seed", int),
        timing=g("experiment", "timing", _bool),
        trace_csv=g("experiment", "trace_csv", str),
        vehicles_csv=g("experiment", "vehicles_csv", str),
        dag=dag,
        vc=vc,
        contact=contact,
        channel=channel,
        rfid={
            "alpha_t": g("rfid", "alpha_t"),
            "alpha_r": g("rfid", "alpha_r"),
            "phi_scale": g("rfid", "phi_scale"),
            "cti_sign_mode": g("rfid", "cti_sign_mode", str),
        },
        mga={
            "population": g("mga", "population", int),
            "generations": g("mga", "generations", int),
            "crossover_rate": g("mga", "crossover_rate"),
            "mutation_rate": g("mga", "mutation_rate"),
            "elite": g("mga", "elite", int),
        },
    )
    return cfg.check()


def load_config(path) -> ExperimentConfig:
    """Raises OSError when the file cannot be read, ConfigError when its
    content is invalid."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_config(text, source=str(path))
