"""Statistical stand-in for the testbed: labeled attack episodes and windows.

Every episode draws an intrusion start from a geometric distribution, pads
the prefix with ``Continue`` and then plays the 17-step script of its attack
type. Each step emits a 50-attribute observation vector. Most attributes are
constant, a few are scaled copies of others, and the informative ones are
IDS alert counts (Poisson) and server statistics (Gaussian) whose
parameters depend on the concurrent action. Alert classes listed in
``background_rates`` also receive action-independent Poisson noise.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .actions import ATTACK_LENGTH, N_ACTIONS, AttackAction, AttackType

WINDOW_LENGTH = 10
STEP_SECONDS = 30

# Per-action parameters are listed in AttackAction order:
# Continue, PingScan, Cve2017_7494, NetworkServiceLogin, InstallTools,
# DvwaSqlInjection, Cve2015_1427.
# The SQL injection and the Samba exploit trip the same rules and load the
# server alike; only the surrounding actions tell them apart.
DEFAULT_ALERT_RATES = {
    "alert_misc_activity": [0.0, 7.0, 15.0, 15.0, 32.0, 15.0, 75.0],
    "alert_attempted_recon": [0.0, 4.0, 0.0, 0.0, 6.0, 0.0, 6.0],
    "alert_web_application_attack": [0.0, 4.0, 0.0, 0.0, 1.0, 0.0, 12.0],
    "alert_attempted_user": [0.0, 4.0, 0.0, 0.0, 2.0, 0.0, 2.0],
}
# Unrelated traffic that trips the catch-all rule class; the specific classes stay silent.
DEFAULT_BACKGROUND_RATES = {"alert_misc_activity": 0.8}
DEFAULT_SERVER_MEANS = {
    "cpu_utilization": [20.0, 20.3, 21.8, 20.9, 22.1, 21.8, 21.8],
    "memory_utilization": [40.0, 40.0, 40.9, 40.3, 41.2, 40.9, 40.9],
    "net_rx_kbytes": [300.0, 309.0, 318.0, 306.0, 324.0, 318.0, 318.0],
    "net_tx_kbytes": [280.0, 286.0, 295.0, 292.0, 286.0, 295.0, 292.0],
    "num_processes": [180.0, 180.0, 181.5, 180.9, 183.0, 181.5, 181.8],
    "num_open_connections": [60.0, 61.8, 61.2, 62.4, 60.6, 61.2, 61.5],
    "num_failed_logins": [2.0, 2.0, 2.15, 2.6, 2.15, 2.15, 2.15],
}
DEFAULT_SERVER_STDS = {
    "cpu_utilization": 3.0,
    "memory_utilization": 2.0,
    "net_rx_kbytes": 30.0,
    "net_tx_kbytes": 30.0,
    "num_processes": 4.0,
    "num_open_connections": 5.0,
    "num_failed_logins": 1.0,
}
# Redundant attributes: name -> (source attribute, scale factor).
DEFAULT_DUPLICATES = {
    "cpu_load_percent": ("cpu_utilization", 2.0),
    "net_rx_packets_x2": ("net_rx_kbytes", 2.0),
    "process_table_entries": ("num_processes", 2.0),
}


def _constant_attributes():
    names = (
        ["num_cpus", "mem_total_mb", "disk_total_gb", "kernel_release",
         "num_interfaces", "mtu_bytes", "swap_total_mb", "num_users"]
        + [f"alert_rule_{k:02d}" for k in range(20)]
        + [f"service_{k}_up" for k in range(8)]
    )
    values = [4.0, 8192.0, 256.0, 5.4, 2.0, 1500.0, 2048.0, 12.0] + [0.0] * 20 + [1.0] * 8
    return dict(zip(names, values))


DEFAULT_CONSTANTS = _constant_attributes()


@dataclass(frozen=True)
class Attribute:
    name: str
    kind: str  # constant | duplicate | alert-count | server-statistic
    source: str | None = None


@dataclass
class SimConfig:
    seed: int = 0
    p_geom: float = 0.2
    episodes_per_type: int = 200
    noise: float = 1.0
    background_rates: dict = field(default_factory=lambda: dict(DEFAULT_BACKGROUND_RATES))
    alert_rates: dict = field(default_factory=lambda: {k: list(v) for k, v in DEFAULT_ALERT_RATES.items()})
    server_means: dict = field(default_factory=lambda: {k: list(v) for k, v in DEFAULT_SERVER_MEANS.items()})
    server_stds: dict = field(default_factory=lambda: dict(DEFAULT_SERVER_STDS))
    duplicates: dict = field(default_factory=lambda: {k: tuple(v) for k, v in DEFAULT_DUPLICATES.items()})
    constants: dict = field(default_factory=lambda: dict(DEFAULT_CONSTANTS))

    def validate(self):
        if not 0.0 < self.p_geom <= 1.0:
            raise ValueError(f"p_geom must lie in (0, 1], got {self.p_geom}")
        if self.episodes_per_type < 0:
            raise ValueError("episodes_per_type must be non-negative")
        if self.noise < 0:
            raise ValueError("noise multiplier must be non-negative")
        for name, rate in self.background_rates.items():
            if name not in self.alert_rates:
                raise ValueError(f"background rate given for unknown alert {name!r}")
            if rate < 0:
                raise ValueError(f"background rate for {name} must be non-negative")
        for name, rates in self.alert_rates.items():
            if len(rates) != N_ACTIONS or min(rates) < 0:
                raise ValueError(f"alert rates for {name} need {N_ACTIONS} non-negative values")
        for name, means in self.server_means.items():
            if len(means) != N_ACTIONS:
                raise ValueError(f"server means for {name} need {N_ACTIONS} values")
            if self.server_stds.get(name, 0.0) <= 0:
                raise ValueError(f"server std-dev for {name} must be positive")
        informative = set(self.alert_rates) | set(self.server_means)
        for name, (source, scale) in self.duplicates.items():
            if source not in informative or scale <= 0:
                raise ValueError(f"duplicate {name} needs an informative source and positive scale")
        return self

    def attributes(self):
        """Fixed attribute manifest. Duplicates always follow their source."""
        consts = list(self.constants)
        alerts = list(self.alert_rates)
        servers = list(self.server_means)
        dups = list(self.duplicates)
        # Interleave so that the manifest is not grouped by kind.
        out = []
        informative = [Attribute(a, "alert-count") for a in alerts] + [
            Attribute(s, "server-statistic") for s in servers
        ]
        dup_after = {}
        for d in dups:
            dup_after.setdefault(self.duplicates[d][0], []).append(d)
        ci = 0
        per_slot = max(1, len(consts) // max(1, len(informative)))
        for attr in informative:
            out.extend(Attribute(c, "constant") for c in consts[ci:ci + per_slot])
            ci += per_slot
            out.append(attr)
            out.extend(Attribute(d, "duplicate", self.duplicates[d][0]) for d in dup_after.get(attr.name, []))
        out.extend(Attribute(c, "constant") for c in consts[ci:])
        return out

    def to_dict(self):
        d = asdict(self)
        d["duplicates"] = {k: list(v) for k, v in self.duplicates.items()}
        return d

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        if "duplicates" in data:
            data["duplicates"] = {k: tuple(v) for k, v in data["duplicates"].items()}
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown SimConfig fields: {sorted(unknown)}")
        return cls(**data).validate()

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class Episode:
    episode_id: int
    attack_type: AttackType
    t_start: int  # 1-based
    actions: list
    observations: np.ndarray  # (T_ep, D)

    def __len__(self):
        return len(self.actions)


@dataclass
class SampleWindow:
    episode_id: int
    attack_type: AttackType | None
    t_rand: int | None
    actions: list | None
    observations: np.ndarray  # (T, D)
    t_start_local: int | None


def episode_rng(seed, episode_id):
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(episode_id)]))


def sample_start_time(config, rng):
    """Draw the intrusion start step, ``P(t_start = k) = (1 - p)**(k - 1) * p``."""
    p = config.p_geom
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p_geom must lie in (0, 1], got {p}")
    return int(rng.geometric(p))


def _noisy_counts(rate, noise, rng, size):
    draw = rng.poisson(rate, size=size)
    if noise == 1.0:
        return draw.astype(float)
    return np.maximum(0.0, np.rint(rate + noise * (draw - rate)))


def emit_observations(config, actions, rng):
    """Observation matrix (len(actions), D) for an action sequence."""
    attrs = config.attributes()
    col = {a.name: j for j, a in enumerate(attrs)}
    acts = np.asarray([int(a) for a in actions])
    n = len(acts)
    obs = np.empty((n, len(attrs)))
    for name, value in config.constants.items():
        obs[:, col[name]] = value
    for name, rates in config.alert_rates.items():
        lam = np.asarray(rates, dtype=float)[acts]
        counts = _noisy_counts(lam, config.noise, rng, n)
        bg = config.background_rates.get(name, 0.0)
        if bg > 0:
            counts = counts + _noisy_counts(bg, config.noise, rng, n)
        obs[:, col[name]] = counts
    for name, means in config.server_means.items():
        mu = np.asarray(means, dtype=float)[acts]
        obs[:, col[name]] = mu + config.noise * config.server_stds[name] * rng.standard_normal(n)
    for name, (source, scale) in config.duplicates.items():
        obs[:, col[name]] = scale * obs[:, col[source]]
    return obs


def generate_episode(config, attack_type, rng, episode_id=0, t_start=None):
    if t_start is None:
        t_start = sample_start_time(config, rng)
    if t_start < 1:
        raise ValueError("t_start is 1-based")
    attack_type = AttackType(attack_type)
    actions = [AttackAction.Continue] * (t_start - 1) + list(attack_type.actions)
    observations = emit_observations(config, actions, rng)
    return Episode(episode_id, attack_type, t_start, actions, observations)


def cut_window(episode, rng, length=WINDOW_LENGTH):
    """Cut a window that is guaranteed to contain the intrusion start."""
    lo = max(1, episode.t_start - (length - 1))
    hi = episode.t_start
    t_rand = int(rng.integers(lo, hi + 1))
    sl = slice(t_rand - 1, t_rand - 1 + length)
    return SampleWindow(
        episode_id=episode.episode_id,
        attack_type=episode.attack_type,
        t_rand=t_rand,
        actions=list(episode.actions[sl]),
        observations=episode.observations[sl].copy(),
        t_start_local=episode.t_start - t_rand + 1,
    )


def generate_dataset(config):
    config.validate()
    windows = []
    n = config.episodes_per_type
    for attack_type in AttackType:
        for k in range(n):
            episode_id = int(attack_type) * n + k
            rng = episode_rng(config.seed, episode_id)
            ep = generate_episode(config, attack_type, rng, episode_id)
            windows.append(cut_window(ep, rng))
    return windows
